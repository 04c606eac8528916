#include "beable/rates.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace beable {

double RateMatrix::one_way_defect() const {
  double worst = 0.0;
  for (Index j = 0; j < count(); ++j) {
    for (Index i = j + 1; i < count(); ++i) worst = std::max(worst, std::min(rates(i, j), rates(j, i)));
  }
  return worst;
}

RMatrix RateMatrix::generator() const {
  RMatrix q = rates;
  for (Index j = 0; j < count(); ++j) {
    q(j, j) = 0.0;
    q(j, j) = -q.col(j).sum();
  }
  return q;
}

RateMatrix rates_from_flux(const RMatrix& flux, const std::vector<double>& weights, double eps_occ) {
  const Index n = flux.rows();
  if (!flux.allFinite()) throw NumericalError("probability flux is not finite");
  RateMatrix out(n);
  for (Index j = 0; j < n; ++j) {
    const double wj = weights[static_cast<std::size_t>(j)];
    if (!(wj >= eps_occ)) continue;
    for (Index i = 0; i < n; ++i) {
      if (i == j || !(weights[static_cast<std::size_t>(i)] >= eps_occ)) continue;
      const double f = flux(i, j);
      if (f > 0.0) out.rates(i, j) = f / wj;
    }
  }
  return out;
}

namespace {

void check_hamiltonian(Index dim, const HermitianOperator& h) {
  if (h.dim() != dim) {
    throw ShapeError("Hamiltonian dimension " + std::to_string(h.dim()) + " does not match state dimension " +
                     std::to_string(dim));
  }
}

void check_starvation(const MicrostateDecomposition& decomp) {
  for (Index j = 0; j < decomp.size(); ++j) {
    if (decomp.occupied(j) && decomp.weights[static_cast<std::size_t>(j)] < decomp.eps_occ) {
      throw StarvationError("occupied microstate " + std::to_string(j) + " has weight below eps_occ");
    }
  }
}

// Copies the strict lower triangle onto the upper one with a sign flip.
void antisymmetrize_from_lower(RMatrix& f) {
  for (Index j = 0; j < f.cols(); ++j) {
    f(j, j) = 0.0;
    for (Index i = j + 1; i < f.rows(); ++i) f(j, i) = -f(i, j);
  }
}

}  // namespace

RateMatrix rates_pure(const MicrostateDecomposition& decomp, const HermitianOperator& h, double hbar) {
  check_starvation(decomp);
  const Index n = decomp.size();
  if (n == 0) return RateMatrix(0);
  check_hamiltonian(decomp.dim(), h);
  std::vector<CVector> h_states(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (decomp.occupied(i)) h_states[static_cast<std::size_t>(i)] = h.matrix() * decomp.states[static_cast<std::size_t>(i)];
  }
  RMatrix flux = RMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    if (!decomp.occupied(j)) continue;
    const auto& psi_j = decomp.states[static_cast<std::size_t>(j)];
    const Complex cj = decomp.amplitudes[static_cast<std::size_t>(j)];
    for (Index i = j + 1; i < n; ++i) {
      if (!decomp.occupied(i)) continue;
      const Complex ci = decomp.amplitudes[static_cast<std::size_t>(i)];
      const Complex g = std::conj(cj) * ci * psi_j.dot(h_states[static_cast<std::size_t>(i)]);
      flux(i, j) = -(2.0 / hbar) * g.imag();
    }
  }
  antisymmetrize_from_lower(flux);
  return rates_from_flux(flux, decomp.weights, decomp.eps_occ);
}

CMatrix microstate_derivative(const MicrostateDecomposition& now, const MicrostateDecomposition& next, double dt) {
  if (now.size() != next.size()) {
    throw ConfigError("decompositions have different slot counts (" + std::to_string(now.size()) + " vs " +
                      std::to_string(next.size()) + ")");
  }
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const Index n = now.size();
  CMatrix d = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    if (!now.occupied(i) || !next.occupied(i)) continue;
    const auto& before = now.states[static_cast<std::size_t>(i)];
    CVector after = next.states[static_cast<std::size_t>(i)];
    if (before.size() != after.size()) throw ConfigError("decompositions live on different spaces");
    const Complex overlap = before.dot(after);
    if (std::abs(overlap) > 0.0) after *= std::conj(overlap) / std::abs(overlap);
    for (Index j = 0; j < n; ++j) {
      if (!now.occupied(j)) continue;
      Complex value = now.states[static_cast<std::size_t>(j)].dot(after);
      if (i == j) value -= 1.0;
      d(j, i) = value / dt;
    }
  }
  return d;
}

RateMatrix rates_timedep(const MicrostateDecomposition& now, const MicrostateDecomposition& next,
                         const HermitianOperator& h, double dt, double hbar) {
  check_starvation(now);
  const CMatrix d = microstate_derivative(now, next, dt);
  const Index n = now.size();
  check_hamiltonian(now.dim(), h);
  std::vector<CVector> h_states(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (now.occupied(i)) h_states[static_cast<std::size_t>(i)] = h.matrix() * now.states[static_cast<std::size_t>(i)];
  }
  const Complex ihbar(0.0, hbar);
  auto raw = [&](Index i, Index j) {
    const Complex ci = now.amplitudes[static_cast<std::size_t>(i)];
    const Complex cj = now.amplitudes[static_cast<std::size_t>(j)];
    const Complex hji = now.states[static_cast<std::size_t>(j)].dot(h_states[static_cast<std::size_t>(i)]);
    return -(2.0 / hbar) * (std::conj(cj) * ci * (hji - ihbar * d(j, i))).imag();
  };
  RMatrix flux = RMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    if (!now.occupied(j)) continue;
    for (Index i = j + 1; i < n; ++i) {
      if (!now.occupied(i)) continue;
      flux(i, j) = 0.5 * (raw(i, j) - raw(j, i));
    }
  }
  antisymmetrize_from_lower(flux);
  return rates_from_flux(flux, now.weights, now.eps_occ);
}

RateMatrix rates_mixed(const MixedDecomposition& mixed, const HermitianOperator& h, double hbar) {
  const Index n = mixed.size();
  check_hamiltonian(mixed.family.dim(), h);
  std::vector<CMatrix> bases(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) bases[static_cast<std::size_t>(i)] = mixed.family.cell(i).basis();
  RMatrix flux = RMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    if (!mixed.occupied(j)) continue;
    const CMatrix vj_h = bases[static_cast<std::size_t>(j)].adjoint() * h.matrix();
    for (Index i = j + 1; i < n; ++i) {
      if (!mixed.occupied(i)) continue;
      // Tr_i([H, B_ij]) = -Tr(b_ij V_j^dagger H V_i)
      const CMatrix k = vj_h * bases[static_cast<std::size_t>(i)];
      const Complex tr = (mixed.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * k).trace();
      flux(i, j) = -(2.0 / hbar) * tr.imag();
    }
  }
  antisymmetrize_from_lower(flux);
  return rates_from_flux(flux, mixed.weights, mixed.eps_occ);
}

RateMatrix particle_rates_current(const StateVector& psi_grid, const ProjectorFamily& family, double mass,
                                  double hbar, double eps_occ) {
  if (!family.grid()) throw ConfigError("family carries no position grid");
  if (!(mass > 0.0)) throw ConfigError("mass must be positive");
  const PositionGrid& grid = *family.grid();
  if (psi_grid.dim() != grid.points || family.dim() != grid.points) {
    throw ShapeError("wavefunction has " + std::to_string(psi_grid.dim()) + " points, grid has " +
                     std::to_string(grid.points));
  }
  const Index n = family.size();
  const Index m = grid.points / n;
  for (Index i = 0; i < n; ++i) {
    const auto& cell = family.cell(i);
    if (!cell.is_index_set() || cell.rank() != m || cell.indices().front() != i * m || cell.indices().back() != (i + 1) * m - 1) {
      throw ConfigError("family is not a consecutive position-cell family");
    }
  }
  const CVector& psi = psi_grid.amplitudes();
  const double a = grid.spacing();
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) weights[static_cast<std::size_t>(i)] = psi.segment(i * m, m).squaredNorm();

  RMatrix flux = RMatrix::Zero(n, n);
  auto add_boundary = [&](Index left, Index right, Index n_left, Index n_right) {
    const double current = (hbar / mass) * (std::conj(psi[n_left]) * psi[n_right]).imag() / (a * a);
    flux(right, left) += current;
    flux(left, right) -= current;
  };
  for (Index i = 0; i + 1 < n; ++i) add_boundary(i, i + 1, (i + 1) * m - 1, (i + 1) * m);
  if (grid.boundary == Boundary::Periodic && n > 1) add_boundary(n - 1, 0, grid.points - 1, 0);
  return rates_from_flux(flux, weights, eps_occ);
}

RVector master_rhs(const RateMatrix& rates, const std::vector<double>& weights) {
  const Index n = rates.count();
  RVector w(n);
  for (Index i = 0; i < n; ++i) w[i] = weights[static_cast<std::size_t>(i)];
  return rates.generator() * w;
}

double master_residual(const std::vector<double>& times, const std::vector<std::vector<double>>& weights,
                       const std::vector<RateMatrix>& rates) {
  if (times.size() != weights.size() || times.size() != rates.size()) {
    throw ConfigError("master_residual inputs have different lengths");
  }
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const double span = times[k + 1] - times[k - 1];
    const RVector rhs = master_rhs(rates[k], weights[k]);
    for (Index i = 0; i < rhs.size(); ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double lhs = (weights[k + 1][s] - weights[k - 1][s]) / span;
      worst = std::max(worst, std::abs(lhs - rhs[i]));
    }
  }
  return worst;
}

double master_residual(const std::vector<std::pair<double, MicrostateDecomposition>>& series,
                       const HermitianOperator& h, double hbar) {
  std::vector<double> times;
  std::vector<std::vector<double>> weights;
  std::vector<RateMatrix> rates;
  for (const auto& [t, decomp] : series) {
    times.push_back(t);
    weights.push_back(decomp.weights);
    rates.push_back(rates_pure(decomp, h, hbar));
  }
  return master_residual(times, weights, rates);
}

std::vector<double> marginal_weights(const std::vector<double>& joint_weights, Index n1, Index n2, Side side) {
  if (static_cast<Index>(joint_weights.size()) != n1 * n2) throw ConfigError("joint labels do not factorize");
  std::vector<double> out(static_cast<std::size_t>(side == Side::A ? n1 : n2), 0.0);
  for (Index i1 = 0; i1 < n1; ++i1) {
    for (Index i2 = 0; i2 < n2; ++i2) {
      out[static_cast<std::size_t>(side == Side::A ? i1 : i2)] += joint_weights[static_cast<std::size_t>(i1 * n2 + i2)];
    }
  }
  return out;
}

RateMatrix marginal_rates(const RateMatrix& joint, const std::vector<double>& joint_weights, Index n1, Index n2,
                          Side side, double eps_occ) {
  if (joint.count() != n1 * n2) throw ConfigError("joint rate labels do not factorize as n1 * n2");
  const std::vector<double> marginal = marginal_weights(joint_weights, n1, n2, side);
  const Index n = side == Side::A ? n1 : n2;
  RMatrix flux = RMatrix::Zero(n, n);
  for (Index j1 = 0; j1 < n1; ++j1) {
    for (Index j2 = 0; j2 < n2; ++j2) {
      const Index src = j1 * n2 + j2;
      const double w = joint_weights[static_cast<std::size_t>(src)];
      for (Index i1 = 0; i1 < n1; ++i1) {
        for (Index i2 = 0; i2 < n2; ++i2) {
          const Index dst = i1 * n2 + i2;
          const double t = joint(dst, src);
          if (t == 0.0) continue;
          const Index a = side == Side::A ? i1 : i2;
          const Index b = side == Side::A ? j1 : j2;
          if (a != b) flux(a, b) += t * w;
        }
      }
    }
  }
  RateMatrix out(n);
  for (Index b = 0; b < n; ++b) {
    const double wb = marginal[static_cast<std::size_t>(b)];
    for (Index a = 0; a < n; ++a) {
      if (flux(a, b) == 0.0) continue;
      if (!(wb >= eps_occ)) {
        throw StarvationError("marginal weight of label " + std::to_string(b) + " is below eps_occ");
      }
      out.rates(a, b) = flux(a, b) / wb;
    }
  }
  return out;
}

LocalityReport locality_audit(const StateVector& psi, const ProjectorFamily& family_a, Index dim_e,
                              const HermitianOperator& h_a, const HermitianOperator& h_e,
                              const HermitianOperator& h_int, const HermitianOperator& h_e_alt, double hbar) {
  const Index dim_a = family_a.dim();
  const Index dim = dim_a * dim_e;
  if (h_a.dim() != dim_a) throw ConfigError("H_A dimension does not match the family");
  if (h_e.dim() != dim_e || h_e_alt.dim() != dim_e) throw ConfigError("H_E dimension does not match dim_e");
  if (h_int.dim() != dim) throw ConfigError("H_int dimension is not dim_A * dim_E");
  if (psi.dim() != dim) throw ConfigError("state dimension is not dim_A * dim_E");

  const ProjectorFamily family = lift_family(family_a, 1, dim_e);
  const MicrostateDecomposition decomp = decompose_pure(psi, family);
  const auto id_a = HermitianOperator::identity(dim_a);
  const auto id_e = HermitianOperator::identity(dim_e);
  const HermitianOperator local = tensor_product(h_a, id_e) + h_int;
  const HermitianOperator env = tensor_product(id_a, h_e);
  const HermitianOperator full = local + env;
  const HermitianOperator alt = local + tensor_product(id_a, h_e_alt);

  LocalityReport report;
  for (Index i = 0; i < decomp.size(); ++i) {
    if (!decomp.occupied(i)) continue;
    const CVector he_i = env.matrix() * decomp.states[static_cast<std::size_t>(i)];
    for (Index j = 0; j < decomp.size(); ++j) {
      if (j == i || !decomp.occupied(j)) continue;
      report.env_offdiagonal = std::max(report.env_offdiagonal, std::abs(decomp.states[static_cast<std::size_t>(j)].dot(he_i)));
    }
  }
  report.rates = rates_pure(decomp, full, hbar);
  report.local_deviation = (report.rates.rates - rates_pure(decomp, local, hbar).rates).cwiseAbs().maxCoeff();
  report.replaced_deviation = (report.rates.rates - rates_pure(decomp, alt, hbar).rates).cwiseAbs().maxCoeff();
  return report;
}

RateModel::RateModel(const QuantumSystem& system, ProjectorFamily family, double eps_occ)
    : system_(system), family_(std::move(family)), eps_occ_(eps_occ) {
  if (family_.dim() != system_.dim()) {
    throw ShapeError("family dimension " + std::to_string(family_.dim()) + " differs from system dimension " +
                     std::to_string(system_.dim()));
  }
  if (family_.index_based()) {
    for (const auto& seg : system_.schedule()) {
      std::vector<Coupling> list;
      const CMatrix& h = seg.hamiltonian.matrix();
      for (Index b = 0; b < h.cols(); ++b) {
        const Index cb = family_.cell_of(b);
        if (cb < 0) continue;
        for (Index a = 0; a < h.rows(); ++a) {
          const Index ca = family_.cell_of(a);
          if (ca < 0 || ca >= cb) continue;
          if (h(a, b) != Complex(0.0, 0.0)) list.push_back({a, b, h(a, b)});
        }
      }
      std::vector<std::vector<Coupling>> per_source(static_cast<std::size_t>(family_.size()));
      for (const auto& c : list) {
        per_source[static_cast<std::size_t>(family_.cell_of(c.a))].push_back(c);
        per_source[static_cast<std::size_t>(family_.cell_of(c.b))].push_back({c.b, c.a, std::conj(c.h)});
      }
      couplings_.push_back(std::move(list));
      by_source_.push_back(std::move(per_source));
    }
  } else {
    for (Index i = 0; i < family_.size(); ++i) bases_.push_back(family_.cell(i).basis());
  }
}

std::vector<double> RateModel::weights(const CVector& psi) const {
  std::vector<double> w(static_cast<std::size_t>(family_.size()));
  for (Index i = 0; i < family_.size(); ++i) {
    w[static_cast<std::size_t>(i)] =
        family_.index_based() ? family_.cell(i).weight(psi) : (bases_[static_cast<std::size_t>(i)].adjoint() * psi).squaredNorm();
  }
  return w;
}

RMatrix RateModel::flux(const CVector& psi, std::size_t segment) const {
  const Index n = family_.size();
  const double scale = -2.0 / system_.hbar();
  RMatrix f = RMatrix::Zero(n, n);
  if (family_.index_based()) {
    for (const auto& c : couplings_[segment]) {
      f(family_.cell_of(c.b), family_.cell_of(c.a)) += scale * (std::conj(psi[c.a]) * c.h * psi[c.b]).imag();
    }
  } else {
    CMatrix w(psi.size(), n);
    for (Index i = 0; i < n; ++i) {
      const CMatrix& v = bases_[static_cast<std::size_t>(i)];
      w.col(i) = v * (v.adjoint() * psi);
    }
    const CMatrix g = w.adjoint() * (system_.schedule()[segment].hamiltonian.matrix() * w);
    for (Index j = 0; j < n; ++j) {
      for (Index i = j + 1; i < n; ++i) f(i, j) = scale * g(j, i).imag();
    }
  }
  antisymmetrize_from_lower(f);
  return f;
}

RateSnapshot RateModel::evaluate(const CVector& psi, std::size_t segment, double t) const {
  RateSnapshot snap;
  snap.t = t;
  snap.weights = weights(psi);
  snap.rates = rates_from_flux(flux(psi, segment), snap.weights, eps_occ_);
  return snap;
}

RateSnapshot RateModel::at(double t) const {
  const std::size_t seg = system_.segment_index(t);
  return evaluate(system_.state_in_segment(t, seg), seg, t);
}

RateSnapshot RateModel::at(double t, std::size_t segment) const {
  return evaluate(system_.state_in_segment(t, segment), segment, t);
}

std::vector<std::pair<Index, double>> RateModel::source_rates(const CVector& psi, std::size_t segment, Index source,
                                                              double* source_weight) const {
  const Index n = family_.size();
  const std::vector<double> w = weights(psi);
  const double wj = w[static_cast<std::size_t>(source)];
  if (source_weight) *source_weight = wj;
  std::vector<std::pair<Index, double>> out;
  if (!(wj >= eps_occ_)) return out;
  const double scale = -2.0 / system_.hbar();
  RVector f = RVector::Zero(n);
  if (family_.index_based()) {
    for (const auto& c : by_source_[segment][static_cast<std::size_t>(source)]) {
      f[family_.cell_of(c.b)] += scale * (std::conj(psi[c.a]) * c.h * psi[c.b]).imag();
    }
  } else {
    const CMatrix& vj = bases_[static_cast<std::size_t>(source)];
    const CVector wsrc = vj * (vj.adjoint() * psi);
    const CVector hw = system_.schedule()[segment].hamiltonian.matrix().adjoint() * wsrc;
    for (Index i = 0; i < n; ++i) {
      if (i == source) continue;
      const CMatrix& vi = bases_[static_cast<std::size_t>(i)];
      const CVector wi = vi * (vi.adjoint() * psi);
      f[i] = scale * hw.dot(wi).imag();
    }
  }
  if (!f.allFinite()) throw NumericalError("probability flux is not finite");
  for (Index i = 0; i < n; ++i) {
    if (i == source || !(w[static_cast<std::size_t>(i)] >= eps_occ_)) continue;
    if (f[i] > 0.0) out.emplace_back(i, f[i] / wj);
  }
  return out;
}

}  // namespace beable
