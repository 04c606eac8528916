#include "beable/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace beable {

double OccupancyStats::max_sigma() const {
  double worst = 0.0;
  const double n = static_cast<double>(trajectories);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < weights[k].size(); ++i) {
      const double w = weights[k][i];
      const double diff = std::abs(frequencies[k][i] - w);
      const double var = w * (1.0 - w);
      if (var <= 0.0) {
        if (diff > 1e-12) worst = std::numeric_limits<double>::infinity();
        continue;
      }
      worst = std::max(worst, diff / std::sqrt(var / n));
    }
  }
  return worst;
}

OccupancyStats occupancy_stats(const std::vector<JumpTrajectory>& ensemble, const RateModel& model,
                               const std::vector<double>& times) {
  if (ensemble.empty()) throw ConfigError("occupancy statistics need at least one trajectory");
  OccupancyStats out;
  out.times = times;
  out.trajectories = ensemble.size();
  const Index n = model.count();
  for (const double t : times) {
    std::vector<double> freq(static_cast<std::size_t>(n), 0.0);
    for (const auto& tr : ensemble) freq[static_cast<std::size_t>(tr.index_at(t))] += 1.0;
    for (auto& f : freq) f /= static_cast<double>(ensemble.size());
    out.frequencies.push_back(std::move(freq));
    out.weights.push_back(model.at(t).weights);
  }
  return out;
}

std::vector<double> occupation_fractions(const JumpTrajectory& trajectory, Index cells, double t0, double t1) {
  if (!(t1 > t0)) throw RangeError("time window needs t1 > t0");
  if (t0 < trajectory.t0 || t1 > trajectory.t1) throw RangeError("time window exceeds the trajectory");
  std::vector<double> spent(static_cast<std::size_t>(cells), 0.0);
  Index current = trajectory.initial_index;
  double since = t0;
  for (const auto& e : trajectory.events) {
    if (e.time <= t0) {
      current = e.to;
      continue;
    }
    if (e.time >= t1) break;
    spent[static_cast<std::size_t>(current)] += e.time - since;
    since = e.time;
    current = e.to;
  }
  spent[static_cast<std::size_t>(current)] += t1 - since;
  for (auto& s : spent) s /= (t1 - t0);
  return spent;
}

double time_average(const JumpTrajectory& trajectory, const CoarseObservable& observable, double t0, double t1) {
  const auto fractions = occupation_fractions(trajectory, observable.family.size(), t0, t1);
  double sum = 0.0;
  for (std::size_t i = 0; i < fractions.size(); ++i) sum += fractions[i] * observable.values[static_cast<Index>(i)];
  return sum;
}

namespace {

const HermitianSpectrum& single_spectrum(const QuantumSystem& system) {
  if (system.schedule().size() != 1) throw ConfigError("equilibration analysis needs a time-independent Hamiltonian");
  return system.spectrum(0);
}

// Rows r of V_i^dagger V scaled by the eigen-amplitudes a_n.
CMatrix cell_amplitudes(const HermitianSpectrum& spec, const ProjectorCell& cell, const CVector& a) {
  CMatrix b = cell.basis().adjoint() * spec.vectors();
  for (Index n = 0; n < b.cols(); ++n) b.col(n) *= a[n];
  return b;
}

}  // namespace

std::vector<double> averaged_weights(const QuantumSystem& system, const ProjectorFamily& family, double t0,
                                     double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  const HermitianSpectrum& spec = single_spectrum(system);
  const CVector a = spec.vectors().adjoint() * system.state_at(t0);
  const Index n = spec.dim();
  CMatrix kernel(n, n);
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q < n; ++q) {
      const double w = (spec.energies()[p] - spec.energies()[q]) * horizon / system.hbar();
      // average of exp(-i w s / T) over s in [0, T]
      kernel(p, q) = std::abs(w) < 1e-12 ? Complex(1.0) : (1.0 - std::exp(Complex(0.0, -w))) / Complex(0.0, w);
    }
  }
  std::vector<double> out;
  for (const auto& cell : family.cells()) {
    const CMatrix x = cell_amplitudes(spec, cell, a);
    double sum = 0.0;
    for (Index r = 0; r < x.rows(); ++r) {
      sum += (x.row(r) * kernel * x.row(r).adjoint())(0, 0).real();
    }
    out.push_back(sum);
  }
  return out;
}

std::vector<double> dephasing_weights(const QuantumSystem& system, const ProjectorFamily& family) {
  const HermitianSpectrum& spec = single_spectrum(system);
  const CVector a = spec.vectors().adjoint() * system.initial_state().amplitudes();
  std::vector<double> out;
  for (const auto& cell : family.cells()) out.push_back(cell_amplitudes(spec, cell, a).squaredNorm());
  return out;
}

EquilibrationReport equilibration_check(const QuantumSystem& system, const ProjectorFamily& family, double horizon,
                                        std::size_t samples) {
  if (samples < 2) throw ConfigError("equilibration check needs at least two samples");
  EquilibrationReport rep;
  const double t0 = system.t0();
  rep.averaged = averaged_weights(system, family, t0, horizon);
  rep.dephasing = dephasing_weights(system, family);
  const Index cells = family.size();
  for (Index i = 0; i < cells; ++i) {
    const auto s = static_cast<std::size_t>(i);
    rep.target.push_back(static_cast<double>(family.cell(i).rank()) / static_cast<double>(family.dim()));
    rep.max_deviation_target = std::max(rep.max_deviation_target, std::abs(rep.averaged[s] - rep.target[s]) / rep.target[s]);
    if (rep.dephasing[s] > 0.0) {
      rep.max_deviation_dephasing =
          std::max(rep.max_deviation_dephasing, std::abs(rep.averaged[s] - rep.dephasing[s]) / rep.dephasing[s]);
    }
  }
  std::vector<std::vector<double>> series;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = t0 + (static_cast<double>(k) + 0.5) * horizon / static_cast<double>(samples);
    const CVector psi = system.state_at(t);
    std::vector<double> w;
    for (const auto& cell : family.cells()) w.push_back(cell.weight(psi));
    series.push_back(std::move(w));
  }
  const CVector psi0 = system.state_at(t0);
  rep.frozen = true;
  std::vector<double> mean(static_cast<std::size_t>(cells), 0.0);
  std::vector<double> var(static_cast<std::size_t>(cells), 0.0);
  for (const auto& w : series) {
    for (Index i = 0; i < cells; ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (std::abs(w[s] - family.cell(i).weight(psi0)) > 1e-12) rep.frozen = false;
      mean[s] += w[s] / static_cast<double>(samples);
    }
  }
  for (const auto& w : series)
    for (std::size_t s = 0; s < w.size(); ++s) var[s] += (w[s] - mean[s]) * (w[s] - mean[s]) / static_cast<double>(samples);
  std::size_t outliers = 0;
  for (const auto& w : series) {
    for (std::size_t s = 0; s < w.size(); ++s) {
      const double sigma = std::sqrt(var[s]);
      if (sigma > 0.0 && std::abs(w[s] - mean[s]) > 3.0 * sigma) ++outliers;
    }
  }
  rep.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(samples * static_cast<std::size_t>(cells));
  return rep;
}

DecayFit fit_decay(std::vector<double> lags, std::vector<double> metric, double noise_floor) {
  if (lags.size() != metric.size()) throw ConfigError("lags and metric differ in length");
  if (lags.size() < 4) throw FitError("decay fit needs at least four probe times", lags, metric);
  DecayFit fit;
  fit.times = lags;
  fit.metric = metric;
  std::size_t used = 0;
  while (used < metric.size() && metric[used] > noise_floor) ++used;
  if (used < 3) throw FitError("fewer than three points above the noise floor", lags, metric);
  double running = metric[0];
  for (std::size_t k = 1; k < used; ++k) {
    if (metric[k] > 1.5 * running) {
      throw FitError("memory metric is not monotone beyond noise at T = " + std::to_string(lags[k]), lags, metric);
    }
    running = std::min(running, metric[k]);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(used);
  for (std::size_t k = 0; k < used; ++k) {
    const double y = std::log(metric[k]);
    sx += lags[k];
    sy += y;
    sxx += lags[k] * lags[k];
    sxy += lags[k] * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw FitError("probe times are degenerate", lags, metric);
  const double slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - slope * sx) / n;
  fit.mu = -slope;
  fit.used = used;
  double ss = 0.0;
  for (std::size_t k = 0; k < used; ++k) {
    const double r = std::log(metric[k]) - (fit.intercept + slope * lags[k]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  if (!(fit.mu > 1e-12)) throw FitError("memory metric does not decay", lags, metric);
  return fit;
}

DecayFit ergodicity_decay(const RateModel& model, double t_start, const std::vector<double>& lags, double noise_floor,
                          const IntegrationOptions& options) {
  std::vector<double> probes;
  for (const double lag : lags) probes.push_back(t_start + lag);
  const auto w0 = model.at(t_start).weights;
  std::vector<Index> occupied;
  for (Index j = 0; j < model.count(); ++j) {
    if (w0[static_cast<std::size_t>(j)] >= model.eps_occ()) occupied.push_back(j);
  }
  if (occupied.size() < 2) throw FitError("fewer than two occupied cells", lags, {});
  std::vector<double> metric;
  for (const auto& p : integrated_probabilities(model, t_start, probes, options)) {
    double m = 0.0;
    for (Index i = 0; i < p.count(); ++i) {
      double lo = 1.0, hi = 0.0;
      for (Index j : occupied) {
        lo = std::min(lo, p(i, j));
        hi = std::max(hi, p(i, j));
      }
      m = std::max(m, hi - lo);
    }
    metric.push_back(m);
  }
  return fit_decay(lags, std::move(metric), noise_floor);
}

double DriftVariance::slope() const {
  const double n = static_cast<double>(times.size());
  if (times.size() < 2) throw RangeError("slope needs at least two times");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    sx += times[k];
    sy += mean[k];
    sxx += times[k] * times[k];
    sxy += times[k] * mean[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

DriftVariance drift_variance(const std::vector<JumpTrajectory>& ensemble, const std::vector<double>& cell_centers,
                             const std::vector<double>& times, double ring_length) {
  if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("times must be sorted");
  DriftVariance out;
  out.times = times;
  std::vector<double> sum(times.size(), 0.0), sq(times.size(), 0.0);
  auto step = [&](Index from, Index to) {
    double d = cell_centers.at(static_cast<std::size_t>(to)) - cell_centers.at(static_cast<std::size_t>(from));
    if (ring_length > 0.0) d -= ring_length * std::round(d / ring_length);
    return d;
  };
  for (const auto& tr : ensemble) {
    double x = 0.0;
    std::size_t e = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] < tr.t0 || times[k] > tr.t1) throw RangeError("time outside the trajectory window");
      while (e < tr.events.size() && tr.events[e].time <= times[k]) {
        x += step(tr.events[e].from, tr.events[e].to);
        ++e;
      }
      sum[k] += x;
      sq[k] += x * x;
    }
  }
  const double n = static_cast<double>(ensemble.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double m = sum[k] / n;
    out.mean.push_back(m);
    out.variance.push_back(std::max(0.0, sq[k] / n - m * m));
  }
  return out;
}

ChiSquare chi_square_binomial(const std::vector<long>& samples, long n, double p, double min_expected) {
  if (samples.empty()) throw ConfigError("chi-square test needs samples");
  if (n < 1 || !(p > 0.0 && p < 1.0)) throw ConfigError("binomial parameters out of range");
  const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  const double total = static_cast<double>(samples.size());
  std::vector<double> observed(static_cast<std::size_t>(n + 1), 0.0);
  for (const long s : samples) observed[static_cast<std::size_t>(std::clamp(s, 0L, n))] += 1.0;
  std::vector<double> expected(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) expected[static_cast<std::size_t>(k)] = total * boost::math::pdf(dist, static_cast<double>(k));

  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  double o = 0.0, e = 0.0;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    o += observed[k];
    e += expected[k];
    if (e >= min_expected) {
      bins.emplace_back(o, e);
      o = e = 0.0;
    }
  }
  if (bins.empty()) throw ConfigError("too few samples for a chi-square test");
  bins.back().first += o;
  bins.back().second += e;

  ChiSquare out;
  for (const auto& [ob, ex] : bins) out.statistic += (ob - ex) * (ob - ex) / ex;
  out.bins = bins.size();
  out.dof = static_cast<int>(bins.size()) - 1;
  if (out.dof < 1) throw ConfigError("chi-square test needs at least two bins");
  out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
  return out;
}

std::vector<double> positive_rates(const RateModel& model, const std::vector<double>& times) {
  std::vector<double> out;
  for (const double t : times) {
    const auto snap = model.at(t);
    for (Index j = 0; j < snap.rates.count(); ++j)
      for (Index i = 0; i < snap.rates.count(); ++i)
        if (snap.rates(i, j) > 0.0) out.push_back(snap.rates(i, j));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw RangeError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw RangeError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace beable
