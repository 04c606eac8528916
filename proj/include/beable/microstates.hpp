#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "beable/linalg.hpp"

namespace beable {

/// Default occupancy threshold on microstate weights |c_i|^2.
inline constexpr double kDefaultEpsOcc = 1e-12;

enum class Boundary { Periodic, HardWall };

/// Position-grid metadata for families built on a discretized line.
///
/// Grid point n sits at x_lo + (n + 1/2) * spacing, so every cell boundary
/// lies halfway between two grid points.
struct PositionGrid {
  Index points = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  Boundary boundary = Boundary::Periodic;

  double spacing() const noexcept { return (x_hi - x_lo) / static_cast<double>(points); }
  double position(Index n) const noexcept {
    return x_lo + (static_cast<double>(n) + 0.5) * spacing();
  }
};

struct CellLabel {
  std::string text;
  // Interval [lo, hi] for position cells; NaN otherwise.
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();

  bool has_interval() const noexcept { return lo == lo && hi == hi; }
  double center() const noexcept { return 0.5 * (lo + hi); }
};

/// One projector Pi_i, stored either as an index set over the computational
/// basis or as a matrix of orthonormal columns spanning its range.
class ProjectorCell {
 public:
  static ProjectorCell from_indices(Index dim, std::vector<Index> indices);
  /// Columns must be orthonormal within 1e-10 (ShapeError otherwise).
  static ProjectorCell from_basis(CMatrix basis);

  Index dim() const noexcept { return dim_; }
  Index rank() const noexcept;
  bool is_index_set() const noexcept { return index_set_; }
  const std::vector<Index>& indices() const noexcept { return indices_; }

  /// dim x rank matrix with orthonormal columns.
  CMatrix basis() const;
  /// Dense dim x dim projector.
  CMatrix matrix() const;
  CVector project(const CVector& v) const;
  /// Squared norm of the projection, <v|Pi|v>.
  double weight(const CVector& v) const;

 private:
  Index dim_ = 0;
  bool index_set_ = true;
  std::vector<Index> indices_;
  CMatrix basis_;
};

/// Ordered family of mutually orthogonal projectors (the coarse-grained
/// observable set).
class ProjectorFamily {
 public:
  ProjectorFamily() = default;
  /// Validates orthogonality and idempotency within `tol` (ConfigError otherwise).
  ProjectorFamily(Index dim, std::vector<ProjectorCell> cells, std::vector<CellLabel> labels,
                  double resolution, double tol = 1e-10);

  Index dim() const noexcept { return dim_; }
  Index size() const noexcept { return static_cast<Index>(cells_.size()); }
  const ProjectorCell& cell(Index i) const { return cells_.at(static_cast<std::size_t>(i)); }
  const std::vector<ProjectorCell>& cells() const noexcept { return cells_; }
  const CellLabel& label(Index i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<CellLabel>& labels() const noexcept { return labels_; }
  double resolution() const noexcept { return resolution_; }
  bool exhaustive() const noexcept { return exhaustive_; }

  /// True when every cell is an index set; `cell_of()` is then available.
  bool index_based() const noexcept { return index_based_; }
  /// Cell containing basis index k, or -1. Only valid for index-based families.
  Index cell_of(Index k) const { return cell_of_.at(static_cast<std::size_t>(k)); }

  const std::optional<PositionGrid>& grid() const noexcept { return grid_; }
  void set_grid(PositionGrid grid) { grid_ = grid; }

  /// max over pairs of ||Pi_i Pi_j - delta_ij Pi_i|| (entrywise max).
  double orthogonality_defect() const;
  /// Entrywise max of |sum_i Pi_i - 1|.
  double completeness_defect() const;

 private:
  Index dim_ = 0;
  std::vector<ProjectorCell> cells_;
  std::vector<CellLabel> labels_;
  double resolution_ = 0.0;
  bool exhaustive_ = false;
  bool index_based_ = false;
  std::vector<Index> cell_of_;
  std::optional<PositionGrid> grid_;
};

/// Sum_i values_i Pi_i.
struct CoarseObservable {
  ProjectorFamily family;
  RVector values;

  HermitianOperator operator_form() const;
};

/// Microstate decomposition |Psi> = Sum_i c_i |Psi_i>.
///
/// Slots follow the family's cell order. Unoccupied slots have amplitude 0,
/// weight 0 and an empty state vector. `source_cells[i]` lists the family
/// cells merged into slot i.
struct MicrostateDecomposition {
  std::vector<Complex> amplitudes;
  std::vector<double> weights;
  std::vector<CVector> states;
  std::vector<std::vector<Index>> source_cells;
  double eps_occ = kDefaultEpsOcc;

  Index size() const noexcept { return static_cast<Index>(weights.size()); }
  bool occupied(Index i) const { return states.at(static_cast<std::size_t>(i)).size() > 0; }
  /// Number of occupied microstates.
  Index count() const;
  Index dim() const;
  /// Sum_i c_i |Psi_i>.
  CVector reconstruct() const;
};

/// Pi_i rho Pi_j blocks of a density matrix.
///
/// Blocks are stored in cell coordinates, block(i, j) = V_i^dagger rho V_j
/// where V_i spans cell i, and are left unnormalized for i != j.
struct MixedDecomposition {
  ProjectorFamily family;
  std::vector<double> weights;  // A_ii = Tr(Pi_i rho Pi_i)
  std::vector<std::vector<CMatrix>> blocks;
  double eps_occ = kDefaultEpsOcc;

  Index size() const noexcept { return static_cast<Index>(weights.size()); }
  bool occupied(Index i) const { return weights.at(static_cast<std::size_t>(i)) >= eps_occ; }
  /// B_ij = Pi_i rho Pi_j as a dim x dim operator.
  CMatrix off_diagonal(Index i, Index j) const;
  /// rho_ii = Pi_i rho Pi_i / A_ii as a dim x dim operator (zero if unoccupied).
  CMatrix diagonal(Index i) const;
};

ProjectorFamily build_position_projectors(Index grid_points, Index cells, double x_lo, double x_hi,
                                          Boundary boundary);

/// Lifts a family on H_f to 1_left (x) f (x) 1_right.
ProjectorFamily lift_family(const ProjectorFamily& family, Index dim_left, Index dim_right);

/// Common refinement {Pi^a_i Pi^b_j} of two commuting index-based families on the
/// same space, ordered i * b.size() + j. Empty intersections are kept as rank-0 cells.
ProjectorFamily refine_families(const ProjectorFamily& a, const ProjectorFamily& b);

/// values_i = lambda0 + (i - 1/2) * delta for cells i = 1..N.
CoarseObservable build_coarse_observable(const ProjectorFamily& family, double lambda0, double delta);

MicrostateDecomposition decompose_pure(const StateVector& psi, const ProjectorFamily& family,
                                       double eps_occ = kDefaultEpsOcc);

/// Throws DomainError if rho is not Hermitian PSD with unit trace.
MixedDecomposition decompose_mixed(const CMatrix& rho, const ProjectorFamily& family,
                                   double eps_occ = kDefaultEpsOcc);

struct NondegeneracyReport {
  std::vector<std::pair<Index, Index>> degenerate_pairs;
  bool all_distinguished() const noexcept { return degenerate_pairs.empty(); }
};

/// Flags occupied pairs (k, l) that no observable distinguishes: every O_n has
/// <Psi_a|O_n|Psi_b> = mu_n delta_ab on {k, l} within tol * ||O_n||, where
/// mu_n = <Psi_k|O_n|Psi_k>.
NondegeneracyReport verify_nondegeneracy(const MicrostateDecomposition& decomp,
                                         const std::vector<HermitianOperator>& observables,
                                         double tol = 1e-8);

/// Replaces slots k and l with the normalized combination c_k|Psi_k> + c_l|Psi_l>.
/// The merged slot takes position min(k, l); the other slot is removed.
MicrostateDecomposition merge(const MicrostateDecomposition& decomp, Index k, Index l);

/// Merges every connected class of degenerate pairs from the report.
MicrostateDecomposition merge_degenerate(const MicrostateDecomposition& decomp,
                                         const NondegeneracyReport& report);

/// -Sum_i w_i log w_i with natural log.
double ensemble_entropy(const MicrostateDecomposition& decomp);
double ensemble_entropy(const std::vector<double>& weights);

/// Pi'_i = Pi_{2i} + Pi_{2i+1} (0-based); resolution doubles.
ProjectorFamily block_projectors(const ProjectorFamily& family);

/// u(N) generators O_ij on a Hilbert space with an explicit adjoint block.
///
/// `generators[i * N + j]` is O_ij and `adjoint_basis` holds the orthonormal
/// states |kl> (column k * N + l) with O_ij |kl> = delta_jk |il>.
struct UNFamily {
  Index n = 0;
  std::vector<CMatrix> generators;
  CMatrix adjoint_basis;

  const CMatrix& generator(Index i, Index j) const {
    return generators.at(static_cast<std::size_t>(i * n + j));
  }
  /// Embeds C^N (x) C^N in the first N^2 basis states of a `dim`-dimensional space,
  /// with O_ij = E_ij (x) 1 on that block and zero elsewhere.
  static UNFamily standard(Index n, Index dim);
};

struct UNAlignment {
  MicrostateDecomposition decomposition;  // N Cartan states, then |Psi_perp>
  CMatrix rotation;                       // u with M = u D u^dagger
  UNFamily aligned;                       // rotated generators and adjoint basis
};

/// Aligns a u(N) family with the state so the adjoint-block coefficient matrix
/// becomes diagonal. Throws AlgebraError if the commutation relations or the
/// adjoint action fail, NotNormalError if the coefficient matrix is not normal.
UNAlignment align_uN(const StateVector& psi, const UNFamily& family, double tol = 1e-9);

}  // namespace beable
