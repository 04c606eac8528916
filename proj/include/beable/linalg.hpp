#pragma once

#include <complex>
#include <cstddef>
#include <random>

#include <Eigen/Dense>

#include "beable/errors.hpp"

namespace beable {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest Hilbert-space dimension accepted by tensor products and propagators.
inline constexpr Index kDefaultMaxDim = 4096;

/// Composite-index convention used everywhere in the library.
///
/// A product basis state |i_a> (x) |i_b> of H_A (x) H_B is stored at
/// position i_a * dim_b + i_b (row-major, the left factor varies slowest).
/// Longer products nest the same rule from the left, e.g. for
/// H_1 (x) H_2 (x) H_3: (i_1 * d_2 + i_2) * d_3 + i_3.
constexpr Index composite_index(Index i_a, Index i_b, Index dim_b) noexcept {
  return i_a * dim_b + i_b;
}

/// Unit-norm complex amplitude vector |Psi>.
class StateVector {
 public:
  /// Validates that the amplitudes have unit norm within `tol`.
  explicit StateVector(CVector amplitudes, double tol = 1e-10);

  /// Rescales an arbitrary nonzero vector to unit norm.
  static StateVector normalized(const CVector& v);
  static StateVector basis(Index dim, Index k);

  Index dim() const noexcept { return amplitudes_.size(); }
  const CVector& amplitudes() const noexcept { return amplitudes_; }
  Complex operator[](Index k) const { return amplitudes_[k]; }

 private:
  CVector amplitudes_;
};

/// Square complex matrix equal to its conjugate transpose.
class HermitianOperator {
 public:
  /// Throws ShapeError if the matrix is not square or not Hermitian within `tol`.
  explicit HermitianOperator(CMatrix entries, double tol = 1e-10);

  static HermitianOperator identity(Index dim);
  static HermitianOperator zero(Index dim);

  Index dim() const noexcept { return entries_.rows(); }
  const CMatrix& matrix() const noexcept { return entries_; }

  HermitianOperator operator+(const HermitianOperator& other) const;
  HermitianOperator operator*(double scale) const;

 private:
  CMatrix entries_;
};

/// Full eigendecomposition H = V diag(E) V^dagger of a Hermitian operator.
class HermitianSpectrum {
 public:
  explicit HermitianSpectrum(const HermitianOperator& h);

  const RVector& energies() const noexcept { return energies_; }
  const CMatrix& vectors() const noexcept { return vectors_; }
  Index dim() const noexcept { return energies_.size(); }

  /// exp(-i H t / hbar) applied to `v`.
  CVector evolve(const CVector& v, double t, double hbar) const;
  /// The dense unitary exp(-i H t / hbar).
  CMatrix unitary(double t, double hbar) const;

 private:
  RVector energies_;
  CMatrix vectors_;
};

/// exp(-i H dt / hbar) for a time-independent Hamiltonian.
struct Propagator {
  Index dim = 0;
  double dt = 0.0;
  CMatrix unitary;

  StateVector apply(const StateVector& psi) const;
};

Propagator propagator_build(const HermitianOperator& h, double dt, double hbar = 1.0);
/// Validating overload for raw matrices; non-Hermitian input throws ShapeError.
Propagator propagator_build(const CMatrix& h, double dt, double hbar = 1.0);

CMatrix kron(const CMatrix& a, const CMatrix& b);
CVector kron(const CVector& a, const CVector& b);

StateVector tensor_product(const StateVector& a, const StateVector& b,
                           Index max_dim = kDefaultMaxDim);
HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b,
                                 Index max_dim = kDefaultMaxDim);

enum class Factor { A, E };

/// Reduced density matrix on the kept factor of H_A (x) H_E.
CMatrix partial_trace(const CMatrix& rho, Index dim_a, Index dim_e, Factor keep);

CMatrix density_matrix(const StateVector& psi);

struct SchmidtDecomposition {
  RVector coefficients;   // nonincreasing, only retained terms
  CMatrix left_vectors;   // dim_a x count, orthonormal columns
  CMatrix right_vectors;  // dim_e x count, orthonormal columns

  Index count() const noexcept { return coefficients.size(); }
  /// Sum_k s_k |left_k> (x) |right_k>.
  CVector reassemble() const;
};

/// Terms with weight s_k^2 below `eps_occ` are dropped.
SchmidtDecomposition schmidt_decompose(const StateVector& psi, Index dim_a, Index dim_e,
                                       double eps_occ = 1e-12);

/// <Psi|O|Psi> for Hermitian O.
double expectation(const HermitianOperator& o, const StateVector& psi);
/// As above for a raw matrix; an imaginary part above `tol` throws NumericalError.
double expectation(const CMatrix& o, const CVector& psi, double tol = 1e-10);

/// Largest |m_ij - conj(m_ji)|.
double hermiticity_defect(const CMatrix& m);

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
double operator_norm(const HermitianOperator& o);

// Random instances. Each takes any uniform random bit generator.

template <class Rng>
CVector random_gaussian_vector(Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVector v(dim);
  for (Index k = 0; k < dim; ++k) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[k] = Complex(re, im);
  }
  return v;
}

template <class Rng>
StateVector random_state(Index dim, Rng& rng) {
  return StateVector::normalized(random_gaussian_vector(dim, rng));
}

/// GUE-like random Hermitian matrix with unit-variance entries.
template <class Rng>
HermitianOperator random_hermitian(Index dim, Rng& rng) {
  CMatrix g(dim, dim);
  for (Index c = 0; c < dim; ++c) g.col(c) = random_gaussian_vector(dim, rng);
  CMatrix h = 0.5 * (g + g.adjoint());
  return HermitianOperator(h);
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal moved into Q.
template <class Rng>
CMatrix haar_unitary(Index dim, Rng& rng) {
  CMatrix g(dim, dim);
  for (Index c = 0; c < dim; ++c) g.col(c) = random_gaussian_vector(dim, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < dim; ++k) {
    const Complex d = r(k, k);
    const double mag = std::abs(d);
    if (mag > 0.0) q.col(k) *= d / mag;
  }
  return q;
}

}  // namespace beable
