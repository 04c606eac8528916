#include "beable/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCore>

namespace beable {

namespace {

// Step-doubling differences below this are rounding noise.
constexpr double kRoundoff = 1e-14;

// Generator with a sparse copy when at most a tenth of the entries are nonzero.
struct Generator {
  RMatrix dense;
  Eigen::SparseMatrix<double> sparse;
  bool use_sparse = false;

  explicit Generator(RMatrix q) : dense(std::move(q)) {
    const Index n = dense.rows();
    if (n >= 16 && (dense.array() != 0.0).count() * 10 <= n * n) {
      sparse = dense.sparseView();
      use_sparse = true;
    }
  }
  RMatrix operator*(const RMatrix& p) const { return use_sparse ? RMatrix(sparse * p) : RMatrix(dense * p); }
};

using Q = Generator;

RMatrix rk4(const RMatrix& p, const Q& q0, const Q& qm, const Q& q1, double h) {
  const RMatrix k1 = q0 * p;
  const RMatrix k2 = qm * (p + 0.5 * h * k1);
  const RMatrix k3 = qm * (p + 0.5 * h * k2);
  const RMatrix k4 = q1 * (p + h * k3);
  return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double max_exit_rate(const Q& q) { return (-q.dense.diagonal()).maxCoeff(); }

// Clips to [0, 1] and renormalizes columns; returns the largest column-sum defect.
double clip_and_normalize(RMatrix& p) {
  p = p.cwiseMax(0.0).cwiseMin(1.0);
  double defect = 0.0;
  for (Index j = 0; j < p.cols(); ++j) {
    const double sum = p.col(j).sum();
    defect = std::max(defect, std::abs(sum - 1.0));
    if (sum > 0.0) p.col(j) /= sum;
  }
  return defect;
}

}  // namespace

std::vector<IntegratedProbabilities> integrated_probabilities(const RateModel& model, double t_from,
                                                              const std::vector<double>& probe_times,
                                                              const IntegrationOptions& options) {
  if (probe_times.empty()) throw ConfigError("no probe times given");
  if (!(options.max_step > 0.0)) throw ConfigError("integration step must be positive");
  for (std::size_t k = 0; k < probe_times.size(); ++k) {
    const double prev = k == 0 ? t_from : probe_times[k - 1];
    if (!(probe_times[k] > prev)) throw ConfigError("probe times must increase strictly from t_from");
  }
  const QuantumSystem& system = model.system();
  std::vector<double> stops = system.breakpoints(t_from, probe_times.back());
  stops.insert(stops.end(), probe_times.begin(), probe_times.end());
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  auto generator = [&](double t, std::size_t seg) { return Q(model.at(t, seg).rates.generator()); };

  const Index n = model.count();
  RMatrix p = RMatrix::Identity(n, n);
  double t = t_from;
  double h = options.max_step;
  double drift = 0.0;
  std::size_t steps = 0;
  std::size_t next_probe = 0;
  std::vector<IntegratedProbabilities> out;

  for (const double stop : stops) {
    const std::size_t seg = system.segment_index(t);
    Q q0 = generator(t, seg);
    while (t < stop) {
      const double remaining = stop - t;
      h = std::min({h, options.max_step, remaining});
      const double lam = max_exit_rate(q0);
      if (lam > 0.0) h = std::min(h, 2.5 / lam);
      h = std::max(h, std::min(options.min_step, remaining));
      if (remaining - h < 0.01 * h) h = remaining;

      const Q qq = generator(t + 0.25 * h, seg);
      const Q qh = generator(t + 0.5 * h, seg);
      const Q q3 = generator(t + 0.75 * h, seg);
      Q q1 = generator(t + h, seg);
      const RMatrix full = rk4(p, q0, qh, q1, h);
      RMatrix half = rk4(rk4(p, q0, qq, qh, 0.5 * h), qh, q3, q1, 0.5 * h);
      const double err = (full - half).cwiseAbs().maxCoeff();
      half += (half - full) / 15.0;
      const double allowed = std::max(options.tolerance * h, kRoundoff);
      if (err <= allowed || h <= options.min_step) {
        drift += clip_and_normalize(half);
        p = std::move(half);
        t = (h == remaining) ? stop : t + h;
        q0 = std::move(q1);
        ++steps;
        const double grow = err > 0.0 ? 0.9 * std::pow(allowed / err, 0.2) : 4.0;
        h *= std::clamp(grow, 0.2, 4.0);
      } else {
        h *= std::max(0.2, 0.9 * std::pow(allowed / err, 0.2));
      }
    }
    if (next_probe < probe_times.size() && stop == probe_times[next_probe]) {
      const double span = stop - t_from;
      if (drift / span > options.drift_limit) {
        throw NumericalError("renormalization drift " + std::to_string(drift) + " over [" + std::to_string(t_from) +
                             ", " + std::to_string(stop) + "] exceeds the limit; use a smaller step");
      }
      out.push_back(IntegratedProbabilities{t_from, stop, p, drift, steps});
      ++next_probe;
    }
  }
  return out;
}

IntegratedProbabilities integrated_probabilities(const RateModel& model, double t_from, double t_to,
                                                 const IntegrationOptions& options) {
  return integrated_probabilities(model, t_from, std::vector<double>{t_to}, options).front();
}

IntegratedProbabilities integrated_probabilities(const QuantumSystem& system, const ProjectorFamily& family,
                                                 double t_from, double t_to, double dt) {
  IntegrationOptions options;
  options.max_step = dt;
  return integrated_probabilities(RateModel(system, family), t_from, t_to, options);
}

}  // namespace beable
