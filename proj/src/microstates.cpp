#include "beable/microstates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace beable {

namespace {

// Phase of the first component above a relative noise floor. Dividing a
// microstate by it makes that component real positive.
Complex phase_anchor(const CVector& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  for (Index k = 0; k < v.size(); ++k) {
    const double mag = std::abs(v[k]);
    if (mag > 1e-8 * peak) return v[k] / mag;
  }
  return Complex(1.0, 0.0);
}

// Splits v = c |s> with the fixed phase convention on |s>.
std::pair<Complex, CVector> split_amplitude(const CVector& v) {
  const double norm = v.norm();
  const Complex phase = phase_anchor(v);
  const Complex amplitude = norm * phase;
  return {amplitude, v / amplitude};
}

}  // namespace

// ---------------------------------------------------------------------------
// ProjectorCell

ProjectorCell ProjectorCell::from_indices(Index dim, std::vector<Index> indices) {
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw ConfigError("projector index set contains duplicates");
  }
  for (Index k : indices) {
    if (k < 0 || k >= dim) throw ConfigError("projector index out of range");
  }
  ProjectorCell cell;
  cell.dim_ = dim;
  cell.index_set_ = true;
  cell.indices_ = std::move(indices);
  return cell;
}

ProjectorCell ProjectorCell::from_basis(CMatrix basis) {
  const Index rank = basis.cols();
  if (rank > 0) {
    const double defect = (basis.adjoint() * basis - CMatrix::Identity(rank, rank)).cwiseAbs().maxCoeff();
    if (defect > 1e-10) throw ShapeError("projector basis columns are not orthonormal");
  }
  ProjectorCell cell;
  cell.dim_ = basis.rows();
  cell.index_set_ = false;
  cell.basis_ = std::move(basis);
  return cell;
}

Index ProjectorCell::rank() const noexcept {
  return index_set_ ? static_cast<Index>(indices_.size()) : basis_.cols();
}

CMatrix ProjectorCell::basis() const {
  if (!index_set_) return basis_;
  CMatrix out = CMatrix::Zero(dim_, rank());
  for (std::size_t c = 0; c < indices_.size(); ++c) out(indices_[c], static_cast<Index>(c)) = 1.0;
  return out;
}

CMatrix ProjectorCell::matrix() const {
  if (index_set_) {
    CMatrix out = CMatrix::Zero(dim_, dim_);
    for (Index k : indices_) out(k, k) = 1.0;
    return out;
  }
  return basis_ * basis_.adjoint();
}

CVector ProjectorCell::project(const CVector& v) const {
  if (index_set_) {
    CVector out = CVector::Zero(dim_);
    for (Index k : indices_) out[k] = v[k];
    return out;
  }
  return basis_ * (basis_.adjoint() * v);
}

double ProjectorCell::weight(const CVector& v) const {
  if (index_set_) {
    double w = 0.0;
    for (Index k : indices_) w += std::norm(v[k]);
    return w;
  }
  return (basis_.adjoint() * v).squaredNorm();
}

// ---------------------------------------------------------------------------
// ProjectorFamily

ProjectorFamily::ProjectorFamily(Index dim, std::vector<ProjectorCell> cells,
                                 std::vector<CellLabel> labels, double resolution, double tol)
    : dim_(dim), cells_(std::move(cells)), labels_(std::move(labels)), resolution_(resolution) {
  if (dim_ <= 0) throw ConfigError("projector family needs a positive dimension");
  if (labels_.empty()) {
    labels_.resize(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) labels_[i].text = std::to_string(i);
  }
  if (labels_.size() != cells_.size()) throw ConfigError("one label per projector cell required");
  for (const auto& c : cells_) {
    if (c.dim() != dim_) throw ConfigError("projector cell dimension differs from family dimension");
  }

  index_based_ = std::all_of(cells_.begin(), cells_.end(), [](const ProjectorCell& c) { return c.is_index_set(); });
  Index total_rank = 0;
  for (const auto& c : cells_) total_rank += c.rank();

  if (index_based_) {
    cell_of_.assign(static_cast<std::size_t>(dim_), -1);
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      for (Index k : cells_[i].indices()) {
        auto& slot = cell_of_[static_cast<std::size_t>(k)];
        if (slot != -1) throw ConfigError("projector cells overlap at basis index " + std::to_string(k));
        slot = static_cast<Index>(i);
      }
    }
    exhaustive_ = total_rank == dim_;
    return;
  }

  const double defect = orthogonality_defect();
  if (defect > tol) {
    throw ConfigError("projector family is not orthogonal (defect " + std::to_string(defect) + ")");
  }
  exhaustive_ = total_rank == dim_ && completeness_defect() <= tol;
}

double ProjectorFamily::orthogonality_defect() const {
  if (index_based_) return 0.0;
  double defect = 0.0;
  std::vector<CMatrix> bases;
  bases.reserve(cells_.size());
  for (const auto& c : cells_) bases.push_back(c.basis());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i; j < bases.size(); ++j) {
      if (bases[i].cols() == 0 || bases[j].cols() == 0) continue;
      CMatrix overlap = bases[i].adjoint() * bases[j];
      if (i == j) overlap -= CMatrix::Identity(overlap.rows(), overlap.cols());
      defect = std::max(defect, overlap.cwiseAbs().maxCoeff());
    }
  }
  return defect;
}

double ProjectorFamily::completeness_defect() const {
  CMatrix sum = CMatrix::Zero(dim_, dim_);
  for (const auto& c : cells_) sum += c.matrix();
  return (sum - CMatrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
}

ProjectorFamily build_position_projectors(Index grid_points, Index cells, double x_lo, double x_hi,
                                          Boundary boundary) {
  if (grid_points <= 0 || cells <= 0) throw ConfigError("grid points and cell count must be positive");
  if (grid_points % cells != 0) {
    throw ConfigError("grid of " + std::to_string(grid_points) + " points is not divisible into " +
                      std::to_string(cells) + " cells");
  }
  if (!(x_hi > x_lo)) throw ConfigError("position domain must satisfy x_hi > x_lo");
  const Index per_cell = grid_points / cells;
  const double width = (x_hi - x_lo) / static_cast<double>(cells);
  std::vector<ProjectorCell> out;
  std::vector<CellLabel> labels;
  for (Index i = 0; i < cells; ++i) {
    std::vector<Index> idx(static_cast<std::size_t>(per_cell));
    std::iota(idx.begin(), idx.end(), i * per_cell);
    out.push_back(ProjectorCell::from_indices(grid_points, std::move(idx)));
    CellLabel label;
    label.lo = x_lo + static_cast<double>(i) * width;
    label.hi = x_lo + static_cast<double>(i + 1) * width;
    label.text = "[" + std::to_string(label.lo) + "," + std::to_string(label.hi) + "]";
    labels.push_back(std::move(label));
  }
  ProjectorFamily family(grid_points, std::move(out), std::move(labels), width);
  family.set_grid(PositionGrid{grid_points, x_lo, x_hi, boundary});
  return family;
}

ProjectorFamily lift_family(const ProjectorFamily& family, Index dim_left, Index dim_right) {
  if (dim_left <= 0 || dim_right <= 0) throw ConfigError("lift dimensions must be positive");
  const Index df = family.dim();
  const Index dim = dim_left * df * dim_right;
  std::vector<ProjectorCell> cells;
  for (const auto& c : family.cells()) {
    if (c.is_index_set()) {
      std::vector<Index> idx;
      for (Index l = 0; l < dim_left; ++l)
        for (Index k : c.indices())
          for (Index r = 0; r < dim_right; ++r) idx.push_back(composite_index(composite_index(l, k, df), r, dim_right));
      cells.push_back(ProjectorCell::from_indices(dim, std::move(idx)));
    } else {
      const CMatrix left = CMatrix::Identity(dim_left, dim_left);
      const CMatrix right = CMatrix::Identity(dim_right, dim_right);
      cells.push_back(ProjectorCell::from_basis(kron(kron(left, c.basis()), right)));
    }
  }
  return ProjectorFamily(dim, std::move(cells), family.labels(), family.resolution());
}

ProjectorFamily refine_families(const ProjectorFamily& a, const ProjectorFamily& b) {
  if (a.dim() != b.dim()) throw ConfigError("families act on different spaces");
  if (!a.index_based() || !b.index_based()) throw ConfigError("refinement requires index-based families");
  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) {
      std::vector<Index> idx;
      std::set_intersection(a.cell(i).indices().begin(), a.cell(i).indices().end(), b.cell(j).indices().begin(),
                            b.cell(j).indices().end(), std::back_inserter(idx));
      cells.push_back(ProjectorCell::from_indices(a.dim(), std::move(idx)));
      CellLabel label;
      label.text = a.label(i).text + "|" + b.label(j).text;
      labels.push_back(std::move(label));
    }
  }
  return ProjectorFamily(a.dim(), std::move(cells), std::move(labels), std::min(a.resolution(), b.resolution()));
}

HermitianOperator CoarseObservable::operator_form() const {
  CMatrix m = CMatrix::Zero(family.dim(), family.dim());
  for (Index i = 0; i < family.size(); ++i) m += values[i] * family.cell(i).matrix();
  return HermitianOperator(std::move(m));
}

CoarseObservable build_coarse_observable(const ProjectorFamily& family, double lambda0, double delta) {
  RVector values(family.size());
  for (Index i = 0; i < family.size(); ++i) values[i] = lambda0 + (static_cast<double>(i + 1) - 0.5) * delta;
  return CoarseObservable{family, std::move(values)};
}

// ---------------------------------------------------------------------------
// Decompositions

Index MicrostateDecomposition::count() const {
  Index n = 0;
  for (const auto& s : states) n += s.size() > 0 ? 1 : 0;
  return n;
}

Index MicrostateDecomposition::dim() const {
  for (const auto& s : states)
    if (s.size() > 0) return s.size();
  return 0;
}

CVector MicrostateDecomposition::reconstruct() const {
  CVector out = CVector::Zero(dim());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() > 0) out += amplitudes[i] * states[i];
  }
  return out;
}

MicrostateDecomposition decompose_pure(const StateVector& psi, const ProjectorFamily& family, double eps_occ) {
  if (psi.dim() != family.dim()) throw ShapeError("state and projector family dimensions differ");
  MicrostateDecomposition out;
  out.eps_occ = eps_occ;
  const auto n = static_cast<std::size_t>(family.size());
  out.amplitudes.assign(n, Complex(0.0, 0.0));
  out.weights.assign(n, 0.0);
  out.states.resize(n);
  out.source_cells.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.source_cells[i] = {static_cast<Index>(i)};
    const auto& cell = family.cell(static_cast<Index>(i));
    const double w = cell.weight(psi.amplitudes());
    if (w < eps_occ) continue;
    auto [amplitude, state] = split_amplitude(cell.project(psi.amplitudes()));
    out.amplitudes[i] = amplitude;
    out.weights[i] = std::norm(amplitude);
    out.states[i] = std::move(state);
  }
  return out;
}

CMatrix MixedDecomposition::off_diagonal(Index i, Index j) const {
  return family.cell(i).basis() * blocks.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)) *
         family.cell(j).basis().adjoint();
}

CMatrix MixedDecomposition::diagonal(Index i) const {
  if (!occupied(i)) return CMatrix::Zero(family.dim(), family.dim());
  return off_diagonal(i, i) / weights.at(static_cast<std::size_t>(i));
}

MixedDecomposition decompose_mixed(const CMatrix& rho, const ProjectorFamily& family, double eps_occ) {
  if (rho.rows() != family.dim() || rho.cols() != family.dim()) {
    throw ShapeError("density matrix and projector family dimensions differ");
  }
  if (hermiticity_defect(rho) > 1e-10) throw DomainError("density matrix is not Hermitian");
  const double trace = rho.trace().real();
  if (std::abs(trace - 1.0) > 1e-9) throw DomainError("density matrix trace is " + std::to_string(trace));
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho, Eigen::EigenvaluesOnly);
  const double min_eig = solver.eigenvalues().minCoeff();
  if (min_eig < -1e-9) {
    throw DomainError("density matrix is not positive semidefinite (eigenvalue " + std::to_string(min_eig) + ")");
  }

  MixedDecomposition out;
  out.family = family;
  out.eps_occ = eps_occ;
  const auto n = static_cast<std::size_t>(family.size());
  std::vector<CMatrix> bases;
  bases.reserve(n);
  for (const auto& c : family.cells()) bases.push_back(c.basis());
  out.weights.resize(n);
  out.blocks.assign(n, std::vector<CMatrix>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const CMatrix left = bases[i].adjoint() * rho;
    for (std::size_t j = 0; j < n; ++j) out.blocks[i][j] = left * bases[j];
    out.weights[i] = out.blocks[i][i].trace().real();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-degeneracy and merging

NondegeneracyReport verify_nondegeneracy(const MicrostateDecomposition& decomp,
                                         const std::vector<HermitianOperator>& observables, double tol) {
  std::vector<double> scale;
  scale.reserve(observables.size());
  for (const auto& o : observables) scale.push_back(std::max(operator_norm(o), 1e-300));

  NondegeneracyReport report;
  for (Index k = 0; k < decomp.size(); ++k) {
    if (!decomp.occupied(k)) continue;
    for (Index l = k + 1; l < decomp.size(); ++l) {
      if (!decomp.occupied(l)) continue;
      const CVector& sk = decomp.states[static_cast<std::size_t>(k)];
      const CVector& sl = decomp.states[static_cast<std::size_t>(l)];
      bool distinguished = false;
      for (std::size_t n = 0; n < observables.size() && !distinguished; ++n) {
        const CMatrix& o = observables[n].matrix();
        const CVector ol = o * sl;
        const Complex mu = sk.dot(o * sk);
        const Complex ll = sl.dot(ol);
        const Complex kl = sk.dot(ol);
        const double bound = tol * scale[n];
        distinguished = std::abs(ll - mu) > bound || std::abs(kl) > bound;
      }
      if (!distinguished) report.degenerate_pairs.emplace_back(k, l);
    }
  }
  return report;
}

MicrostateDecomposition merge(const MicrostateDecomposition& decomp, Index k, Index l) {
  if (k == l || k < 0 || l < 0 || k >= decomp.size() || l >= decomp.size()) {
    throw RangeError("invalid microstate pair for merge");
  }
  const auto keep = static_cast<std::size_t>(std::min(k, l));
  const auto drop = static_cast<std::size_t>(std::max(k, l));
  MicrostateDecomposition out = decomp;

  CVector combined = CVector::Zero(decomp.dim());
  for (std::size_t s : {keep, drop}) {
    if (decomp.states[s].size() > 0) combined += decomp.amplitudes[s] * decomp.states[s];
  }
  auto& sources = out.source_cells[keep];
  sources.insert(sources.end(), decomp.source_cells[drop].begin(), decomp.source_cells[drop].end());
  std::sort(sources.begin(), sources.end());

  if (combined.size() > 0 && combined.squaredNorm() >= decomp.eps_occ) {
    auto [amplitude, state] = split_amplitude(combined);
    out.amplitudes[keep] = amplitude;
    out.weights[keep] = std::norm(amplitude);
    out.states[keep] = std::move(state);
  } else {
    out.amplitudes[keep] = 0.0;
    out.weights[keep] = 0.0;
    out.states[keep] = CVector();
  }
  const auto offset = static_cast<std::ptrdiff_t>(drop);
  out.amplitudes.erase(out.amplitudes.begin() + offset);
  out.weights.erase(out.weights.begin() + offset);
  out.states.erase(out.states.begin() + offset);
  out.source_cells.erase(out.source_cells.begin() + offset);
  return out;
}

MicrostateDecomposition merge_degenerate(const MicrostateDecomposition& decomp, const NondegeneracyReport& report) {
  const auto n = static_cast<std::size_t>(decomp.size());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [k, l] : report.degenerate_pairs) {
    const auto a = find(static_cast<std::size_t>(k));
    const auto b = find(static_cast<std::size_t>(l));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  // Merge from the highest slot down so lower slot indices stay valid.
  MicrostateDecomposition out = decomp;
  for (std::size_t s = n; s-- > 0;) {
    const auto root = find(s);
    if (root != s) out = merge(out, static_cast<Index>(root), static_cast<Index>(s));
  }
  return out;
}

double ensemble_entropy(const std::vector<double>& weights) {
  double s = 0.0;
  for (double w : weights) {
    if (w > 0.0) s -= w * std::log(w);
  }
  return s;
}

double ensemble_entropy(const MicrostateDecomposition& decomp) { return ensemble_entropy(decomp.weights); }

ProjectorFamily block_projectors(const ProjectorFamily& family) {
  if (family.size() % 2 != 0) {
    throw ConfigError("blocking needs an even number of cells, got " + std::to_string(family.size()));
  }
  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  for (Index i = 0; i < family.size(); i += 2) {
    const auto& a = family.cell(i);
    const auto& b = family.cell(i + 1);
    if (a.is_index_set() && b.is_index_set()) {
      std::vector<Index> idx = a.indices();
      idx.insert(idx.end(), b.indices().begin(), b.indices().end());
      cells.push_back(ProjectorCell::from_indices(family.dim(), std::move(idx)));
    } else {
      CMatrix basis(family.dim(), a.rank() + b.rank());
      basis << a.basis(), b.basis();
      cells.push_back(ProjectorCell::from_basis(std::move(basis)));
    }
    const auto& la = family.label(i);
    const auto& lb = family.label(i + 1);
    CellLabel merged;
    merged.text = la.text + "+" + lb.text;
    if (la.has_interval() && lb.has_interval()) {
      merged.lo = std::min(la.lo, lb.lo);
      merged.hi = std::max(la.hi, lb.hi);
      merged.text = "[" + std::to_string(merged.lo) + "," + std::to_string(merged.hi) + "]";
    }
    labels.push_back(std::move(merged));
  }
  ProjectorFamily out(family.dim(), std::move(cells), std::move(labels), 2.0 * family.resolution());
  if (family.grid()) out.set_grid(*family.grid());
  return out;
}

// ---------------------------------------------------------------------------
// u(N) alignment

UNFamily UNFamily::standard(Index n, Index dim) {
  if (n <= 0 || dim < n * n) throw ConfigError("u(N) block needs dim >= N^2");
  UNFamily out;
  out.n = n;
  out.adjoint_basis = CMatrix::Zero(dim, n * n);
  for (Index k = 0; k < n * n; ++k) out.adjoint_basis(k, k) = 1.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      CMatrix o = CMatrix::Zero(dim, dim);
      for (Index l = 0; l < n; ++l) o(i * n + l, j * n + l) = 1.0;
      out.generators.push_back(std::move(o));
    }
  }
  return out;
}

namespace {

void check_un_family(const UNFamily& f, Index dim, double tol) {
  const Index n = f.n;
  if (n <= 0 || static_cast<Index>(f.generators.size()) != n * n) {
    throw AlgebraError("u(N) family needs N^2 generators");
  }
  if (f.adjoint_basis.rows() != dim || f.adjoint_basis.cols() != n * n) {
    throw AlgebraError("adjoint basis must be dim x N^2");
  }
  for (const auto& o : f.generators) {
    if (o.rows() != dim || o.cols() != dim) throw AlgebraError("generator dimension differs from state");
  }
  const double ortho =
      (f.adjoint_basis.adjoint() * f.adjoint_basis - CMatrix::Identity(n * n, n * n)).cwiseAbs().maxCoeff();
  if (ortho > tol) throw AlgebraError("adjoint basis is not orthonormal");

  // [O_ij, O_kl] = delta_jk O_il - delta_li O_kj
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) {
          const CMatrix& a = f.generator(i, j);
          const CMatrix& b = f.generator(k, l);
          CMatrix expected = CMatrix::Zero(dim, dim);
          if (j == k) expected += f.generator(i, l);
          if (l == i) expected -= f.generator(k, j);
          const double defect = (a * b - b * a - expected).cwiseAbs().maxCoeff();
          if (defect > tol) throw AlgebraError("generators violate the u(N) commutation relations");
        }

  // O_ij |kl> = delta_jk |il>
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) {
          CVector expected = CVector::Zero(dim);
          if (j == k) expected = f.adjoint_basis.col(i * n + l);
          const double defect = (f.generator(i, j) * f.adjoint_basis.col(k * n + l) - expected).cwiseAbs().maxCoeff();
          if (defect > tol) throw AlgebraError("generators do not act on the adjoint basis as O_ij|kl> = d_jk|il>");
        }
}

}  // namespace

UNAlignment align_uN(const StateVector& psi, const UNFamily& family, double tol) {
  const Index dim = psi.dim();
  const Index n = family.n;
  check_un_family(family, dim, tol);

  const CVector& v = psi.amplitudes();
  CMatrix m(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index l = 0; l < n; ++l) m(k, l) = family.adjoint_basis.col(k * n + l).dot(v);

  const double scale = std::max(1.0, m.squaredNorm());
  const double normal_defect = (m * m.adjoint() - m.adjoint() * m).cwiseAbs().maxCoeff();
  if (normal_defect > tol * scale) {
    throw NotNormalError("adjoint-block coefficient matrix is not normal (defect " + std::to_string(normal_defect) +
                         "); no U(N) rotation diagonalizes it");
  }

  // For normal M the Schur form is diagonal: M = u D u^dagger.
  Eigen::ComplexSchur<CMatrix> schur(m);
  const CMatrix& u = schur.matrixU();
  const CVector d = schur.matrixT().diagonal();

  UNAlignment out;
  out.rotation = u;
  out.aligned.n = n;
  out.aligned.adjoint_basis = CMatrix::Zero(dim, n * n);
  out.aligned.generators.assign(static_cast<std::size_t>(n * n), CMatrix::Zero(dim, dim));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) {
          const Complex coeff = u(k, i) * std::conj(u(l, j));
          out.aligned.adjoint_basis.col(i * n + j) += coeff * family.adjoint_basis.col(k * n + l);
          out.aligned.generators[static_cast<std::size_t>(i * n + j)] += coeff * family.generator(k, l);
        }

  auto& decomp = out.decomposition;
  decomp.eps_occ = kDefaultEpsOcc;
  const auto slots = static_cast<std::size_t>(n + 1);
  decomp.amplitudes.assign(slots, Complex(0.0, 0.0));
  decomp.weights.assign(slots, 0.0);
  decomp.states.resize(slots);
  decomp.source_cells.resize(slots);
  for (Index i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    decomp.source_cells[s] = {i};
    if (std::norm(d[i]) < decomp.eps_occ) continue;
    auto [amplitude, state] = split_amplitude(d[i] * out.aligned.adjoint_basis.col(i * n + i));
    decomp.amplitudes[s] = amplitude;
    decomp.weights[s] = std::norm(amplitude);
    decomp.states[s] = std::move(state);
  }
  const CVector perp = v - family.adjoint_basis * (family.adjoint_basis.adjoint() * v);
  decomp.source_cells[static_cast<std::size_t>(n)] = {n};
  if (perp.squaredNorm() >= decomp.eps_occ) {
    auto [amplitude, state] = split_amplitude(perp);
    decomp.amplitudes[static_cast<std::size_t>(n)] = amplitude;
    decomp.weights[static_cast<std::size_t>(n)] = std::norm(amplitude);
    decomp.states[static_cast<std::size_t>(n)] = std::move(state);
  }

  // Cartan eigenvalue property O'_ii |Psi_j> = delta_ij |Psi_j>, O'_ii |Psi_perp> = 0.
  for (Index i = 0; i < n; ++i) {
    const CMatrix& cartan = out.aligned.generator(i, i);
    for (Index j = 0; j <= n; ++j) {
      const CVector& s = decomp.states[static_cast<std::size_t>(j)];
      if (s.size() == 0) continue;
      const CVector expected = (i == j) ? s : CVector::Zero(dim);
      if ((cartan * s - expected).cwiseAbs().maxCoeff() > std::sqrt(tol)) {
        throw AlgebraError("aligned microstates fail the Cartan eigenvalue check");
      }
    }
  }
  return out;
}

}  // namespace beable
