#pragma once

#include <utility>
#include <vector>

#include "beable/microstates.hpp"
#include "beable/system.hpp"

namespace beable {

/// Jump rates T_ij (from j to i, units 1/time). The diagonal is zero.
struct RateMatrix {
  RMatrix rates;

  RateMatrix() = default;
  explicit RateMatrix(Index n) : rates(RMatrix::Zero(n, n)) {}

  Index count() const noexcept { return rates.rows(); }
  double operator()(Index i, Index j) const { return rates(i, j); }
  /// Sum_i T_ij.
  double exit_rate(Index j) const { return rates.col(j).sum(); }
  /// max over pairs of min(T_ij, T_ji).
  double one_way_defect() const;
  /// Generator Q with Q_ij = T_ij off the diagonal and Q_jj = -Sum_i T_ij.
  RMatrix generator() const;
};

/// Turns an antisymmetric net-flux matrix F (F_ij = flow from j into i) into
/// rates T_ij = max(F_ij, 0) / w_j, zero whenever i or j is unoccupied.
RateMatrix rates_from_flux(const RMatrix& flux, const std::vector<double>& weights, double eps_occ);

RateMatrix rates_pure(const MicrostateDecomposition& decomp, const HermitianOperator& h, double hbar = 1.0);

/// Matrix D_ji ~ <Psi_j(t)|d/dt|Psi_i(t)> from two decompositions dt apart.
///
/// Each |Psi_i(t+dt)> is first phase-aligned with |Psi_i(t)> (parallel
/// transport), which removes the arbitrary per-time phase convention from the
/// finite difference. Entries involving an unoccupied slot are zero.
CMatrix microstate_derivative(const MicrostateDecomposition& now, const MicrostateDecomposition& next,
                              double dt);

/// Rates for time-dependent microstates; first order in dt.
RateMatrix rates_timedep(const MicrostateDecomposition& now, const MicrostateDecomposition& next,
                         const HermitianOperator& h, double dt, double hbar = 1.0);

RateMatrix rates_mixed(const MixedDecomposition& mixed, const HermitianOperator& h, double hbar = 1.0);

/// Nearest-neighbour rates from the probability current at cell boundaries.
///
/// The current is evaluated halfway between the two grid points adjacent to
/// each boundary: Psi = (psi_n + psi_n+1)/2 and dPsi/dx = (psi_n+1 - psi_n)/a,
/// with psi the grid amplitudes divided by sqrt(a).
RateMatrix particle_rates_current(const StateVector& psi_grid, const ProjectorFamily& family, double mass,
                                  double hbar = 1.0, double eps_occ = kDefaultEpsOcc);

/// Sum_j (T_ij w_j - T_ji w_i).
RVector master_rhs(const RateMatrix& rates, const std::vector<double>& weights);

/// Largest |dw_i/dt - master_rhs_i| over the interior samples, with centered
/// differences. `times`, `weights`, `rates` are parallel sequences.
double master_residual(const std::vector<double>& times, const std::vector<std::vector<double>>& weights,
                       const std::vector<RateMatrix>& rates);

/// master_residual for a time-independent H and family along sampled states.
double master_residual(const std::vector<std::pair<double, MicrostateDecomposition>>& series,
                       const HermitianOperator& h, double hbar = 1.0);

enum class Side { A, B };

/// Marginal rates of one factor of a product label set, labels ordered i1 * n2 + i2.
RateMatrix marginal_rates(const RateMatrix& joint, const std::vector<double>& joint_weights, Index n1, Index n2,
                          Side side, double eps_occ = kDefaultEpsOcc);

/// Sum_{i2} w_{i1 i2} (side A) or Sum_{i1} w_{i1 i2} (side B).
std::vector<double> marginal_weights(const std::vector<double>& joint_weights, Index n1, Index n2, Side side);

struct LocalityReport {
  double env_offdiagonal = 0.0;   // max |<Psi_i|1 (x) H_E|Psi_j>|, i != j
  double local_deviation = 0.0;   // max |T(full H) - T(H_A + H_int)|
  double replaced_deviation = 0.0;  // max |T(full H) - T(H with H_E replaced)|
  RateMatrix rates;

  bool passed(double tol = 1e-9) const noexcept {
    return env_offdiagonal <= tol && local_deviation <= tol && replaced_deviation <= tol;
  }
};

/// Checks that rates of a family on factor A ignore the environment Hamiltonian.
/// `family_a` acts on H_A; it is lifted to H_A (x) H_E internally. `h_e_alt`
/// replaces H_E for the third comparison.
LocalityReport locality_audit(const StateVector& psi, const ProjectorFamily& family_a, Index dim_e,
                              const HermitianOperator& h_a, const HermitianOperator& h_e,
                              const HermitianOperator& h_int, const HermitianOperator& h_e_alt,
                              double hbar = 1.0);

/// Weights and rates of one instant.
struct RateSnapshot {
  double t = 0.0;
  std::vector<double> weights;
  RateMatrix rates;
};

/// Fast rate evaluation for a fixed (system, family) pair.
///
/// Index-based families precompute the cross-cell entries of each scheduled
/// Hamiltonian, so an evaluation costs one state propagation plus O(nnz).
/// General families use G = W^dagger H W with W the projected components.
/// Results agree with rates_pure(decompose_pure(...)).
class RateModel {
 public:
  RateModel(const QuantumSystem& system, ProjectorFamily family, double eps_occ = kDefaultEpsOcc);

  const QuantumSystem& system() const noexcept { return system_; }
  const ProjectorFamily& family() const noexcept { return family_; }
  Index count() const noexcept { return family_.size(); }
  double eps_occ() const noexcept { return eps_occ_; }

  std::vector<double> weights(const CVector& psi) const;
  RateSnapshot at(double t) const;
  /// As `at`, with the Hamiltonian of segment k (left limits at breakpoints).
  RateSnapshot at(double t, std::size_t segment) const;
  /// Rates out of a single source cell: (target, rate) pairs and the source weight.
  std::vector<std::pair<Index, double>> source_rates(const CVector& psi, std::size_t segment, Index source,
                                                     double* source_weight = nullptr) const;
  RateSnapshot evaluate(const CVector& psi, std::size_t segment, double t) const;

 private:
  struct Coupling {
    Index a;
    Index b;
    Complex h;
  };
  RMatrix flux(const CVector& psi, std::size_t segment) const;

  QuantumSystem system_;
  ProjectorFamily family_;
  double eps_occ_;
  // Per segment: entries H_ab with cell(a) < cell(b) and both cells defined.
  std::vector<std::vector<Coupling>> couplings_;
  // Per segment and source cell: entries H_ab with a in the cell and b in another cell.
  std::vector<std::vector<std::vector<Coupling>>> by_source_;
  std::vector<CMatrix> bases_;
};

}  // namespace beable
