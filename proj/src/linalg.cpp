#include "beable/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace beable {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Size: return "SizeError";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Numerical: return "NumericalError";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Starvation: return "StarvationError";
    case ErrorKind::NotNormal: return "NotNormalError";
    case ErrorKind::Algebra: return "AlgebraError";
    case ErrorKind::Range: return "RangeError";
    case ErrorKind::Fit: return "FitError";
  }
  return "Error";
}

StateVector::StateVector(CVector amplitudes, double tol) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() == 0) throw ShapeError("state vector must have positive dimension");
  const double norm2 = amplitudes_.squaredNorm();
  if (!(std::abs(norm2 - 1.0) <= tol)) {
    throw DomainError("state vector is not normalized (|psi|^2 = " + std::to_string(norm2) + ")");
  }
}

StateVector StateVector::normalized(const CVector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero or non-finite vector");
  return StateVector(v / n);
}

StateVector StateVector::basis(Index dim, Index k) {
  if (dim <= 0 || k < 0 || k >= dim) throw ShapeError("basis index out of range");
  CVector v = CVector::Zero(dim);
  v[k] = 1.0;
  return StateVector(std::move(v));
}

double hermiticity_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

HermitianOperator::HermitianOperator(CMatrix entries, double tol) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw ShapeError("Hermitian operator must be a nonempty square matrix");
  }
  const double defect = hermiticity_defect(entries_);
  if (!(defect <= tol)) {
    throw ShapeError("matrix is not Hermitian (max defect " + std::to_string(defect) + ")");
  }
}

HermitianOperator HermitianOperator::identity(Index dim) {
  return HermitianOperator(CMatrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::zero(Index dim) {
  return HermitianOperator(CMatrix::Zero(dim, dim));
}

HermitianOperator HermitianOperator::operator+(const HermitianOperator& other) const {
  if (other.dim() != dim()) throw ShapeError("operator dimensions differ");
  return HermitianOperator(entries_ + other.entries_);
}

HermitianOperator HermitianOperator::operator*(double scale) const {
  return HermitianOperator(entries_ * scale);
}

HermitianSpectrum::HermitianSpectrum(const HermitianOperator& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix());
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
  energies_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
}

CVector HermitianSpectrum::evolve(const CVector& v, double t, double hbar) const {
  CVector coeff = vectors_.adjoint() * v;
  for (Index n = 0; n < coeff.size(); ++n) {
    coeff[n] *= std::polar(1.0, -energies_[n] * t / hbar);
  }
  return vectors_ * coeff;
}

CMatrix HermitianSpectrum::unitary(double t, double hbar) const {
  CVector phases(energies_.size());
  for (Index n = 0; n < phases.size(); ++n) phases[n] = std::polar(1.0, -energies_[n] * t / hbar);
  return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

StateVector Propagator::apply(const StateVector& psi) const {
  if (psi.dim() != dim) throw ShapeError("propagator and state dimensions differ");
  return StateVector::normalized(unitary * psi.amplitudes());
}

Propagator propagator_build(const HermitianOperator& h, double dt, double hbar) {
  if (!(dt > 0.0)) throw ConfigError("propagator time step must be positive");
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
  if (h.dim() > kDefaultMaxDim) throw SizeError("Hamiltonian exceeds maximum dimension");
  HermitianSpectrum spectrum(h);
  return Propagator{h.dim(), dt, spectrum.unitary(dt, hbar)};
}

Propagator propagator_build(const CMatrix& h, double dt, double hbar) {
  return propagator_build(HermitianOperator(h), dt, hbar);
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

namespace {

void check_product_dim(Index da, Index db, Index max_dim) {
  if (da > 0 && db > max_dim / da) {
    throw SizeError("tensor product dimension " + std::to_string(da) + "x" + std::to_string(db) +
                    " exceeds maximum " + std::to_string(max_dim));
  }
}

}  // namespace

StateVector tensor_product(const StateVector& a, const StateVector& b, Index max_dim) {
  check_product_dim(a.dim(), b.dim(), max_dim);
  return StateVector(kron(a.amplitudes(), b.amplitudes()), 1e-9);
}

HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b,
                                 Index max_dim) {
  check_product_dim(a.dim(), b.dim(), max_dim);
  return HermitianOperator(kron(a.matrix(), b.matrix()));
}

CMatrix partial_trace(const CMatrix& rho, Index dim_a, Index dim_e, Factor keep) {
  if (dim_a <= 0 || dim_e <= 0 || rho.rows() != dim_a * dim_e || rho.cols() != rho.rows()) {
    throw ShapeError("density matrix does not factorize as " + std::to_string(dim_a) + "x" +
                     std::to_string(dim_e));
  }
  if (keep == Factor::A) {
    CMatrix out = CMatrix::Zero(dim_a, dim_a);
    for (Index a = 0; a < dim_a; ++a)
      for (Index b = 0; b < dim_a; ++b)
        for (Index e = 0; e < dim_e; ++e)
          out(a, b) += rho(composite_index(a, e, dim_e), composite_index(b, e, dim_e));
    return out;
  }
  CMatrix out = CMatrix::Zero(dim_e, dim_e);
  for (Index e = 0; e < dim_e; ++e)
    for (Index f = 0; f < dim_e; ++f)
      for (Index a = 0; a < dim_a; ++a)
        out(e, f) += rho(composite_index(a, e, dim_e), composite_index(a, f, dim_e));
  return out;
}

CMatrix density_matrix(const StateVector& psi) {
  return psi.amplitudes() * psi.amplitudes().adjoint();
}

CVector SchmidtDecomposition::reassemble() const {
  CVector out = CVector::Zero(left_vectors.rows() * right_vectors.rows());
  for (Index k = 0; k < count(); ++k) {
    out += coefficients[k] * kron(CVector(left_vectors.col(k)), CVector(right_vectors.col(k)));
  }
  return out;
}

SchmidtDecomposition schmidt_decompose(const StateVector& psi, Index dim_a, Index dim_e,
                                       double eps_occ) {
  if (dim_a <= 0 || dim_e <= 0 || psi.dim() != dim_a * dim_e) {
    throw ShapeError("state dimension does not factorize as " + std::to_string(dim_a) + "x" +
                     std::to_string(dim_e));
  }
  // psi(a * dim_e + e) = M(a, e); M = U S V^dagger gives psi = sum_k s_k U_k (x) conj(V_k).
  CMatrix m(dim_a, dim_e);
  for (Index a = 0; a < dim_a; ++a)
    for (Index e = 0; e < dim_e; ++e) m(a, e) = psi[composite_index(a, e, dim_e)];
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& s = svd.singularValues();  // already nonincreasing
  Index kept = 0;
  while (kept < s.size() && s[kept] * s[kept] >= eps_occ) ++kept;
  SchmidtDecomposition out;
  out.coefficients = s.head(kept);
  out.left_vectors = svd.matrixU().leftCols(kept);
  out.right_vectors = svd.matrixV().leftCols(kept).conjugate();
  return out;
}

double expectation(const CMatrix& o, const CVector& psi, double tol) {
  if (o.rows() != o.cols() || o.rows() != psi.size()) throw ShapeError("operator and state dimensions differ");
  const Complex value = psi.dot(o * psi);  // conj(psi) . (O psi)
  if (std::abs(value.imag()) > tol) {
    throw NumericalError("expectation value has imaginary part " + std::to_string(value.imag()) +
                         "; operator is not Hermitian");
  }
  return value.real();
}

double expectation(const HermitianOperator& o, const StateVector& psi) {
  return expectation(o.matrix(), psi.amplitudes());
}

double operator_norm(const HermitianOperator& o) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(o.matrix(), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace beable
