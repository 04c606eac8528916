#include "doctest.h"

#include <cmath>
#include <numbers>

#include "beable/microstates.hpp"
#include "beable/random.hpp"

using namespace beable;

namespace {

ProjectorFamily pairs_family(Index dim) {
  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  for (Index i = 0; i < dim; i += 2) {
    cells.push_back(ProjectorCell::from_indices(dim, {i, i + 1}));
    labels.push_back(CellLabel{std::to_string(i / 2)});
  }
  return ProjectorFamily(dim, std::move(cells), std::move(labels), 1.0);
}

// Random exhaustive family with `cells` blocks spanned by columns of a random unitary.
template <class Rng>
ProjectorFamily random_basis_family(Index dim, Index cells, Rng& rng) {
  const CMatrix u = haar_unitary(dim, rng);
  std::vector<ProjectorCell> out;
  std::vector<CellLabel> labels;
  Index start = 0;
  for (Index c = 0; c < cells; ++c) {
    const Index rank = (c + 1 == cells) ? dim - start : 1 + static_cast<Index>(rng() % 2);
    out.push_back(ProjectorCell::from_basis(u.middleCols(start, rank)));
    labels.push_back(CellLabel{std::to_string(c)});
    start += rank;
  }
  return ProjectorFamily(dim, std::move(out), std::move(labels), 1.0);
}

double gaussian_cell_mass(double lo, double hi, double center, double sigma) {
  const double s = sigma * std::sqrt(2.0);
  return 0.5 * (std::erf((hi - center) / s) - std::erf((lo - center) / s));
}

}  // namespace

TEST_CASE("position projectors") {
  const auto f = build_position_projectors(8, 2, 0.0, 1.0, Boundary::Periodic);
  CHECK(f.size() == 2);
  CHECK(f.cell(0).rank() == 4);
  CHECK(f.exhaustive());
  CHECK(f.orthogonality_defect() < 1e-12);
  CHECK(f.completeness_defect() < 1e-12);

  const auto g = build_position_projectors(400, 40, 0.0, 40.0, Boundary::HardWall);
  CHECK(g.resolution() == doctest::Approx(1.0));
  CHECK(g.label(0).lo == doctest::Approx(0.0));
  CHECK(g.label(0).hi == doctest::Approx(1.0));
  CHECK(g.label(7).lo == doctest::Approx(7.0));
  CHECK(g.label(7).hi == doctest::Approx(8.0));
  CHECK(g.orthogonality_defect() < 1e-12);
  CHECK_THROWS_AS(build_position_projectors(10, 3, 0.0, 1.0, Boundary::Periodic), ConfigError);
}

TEST_CASE("family validation") {
  std::vector<ProjectorCell> overlap{ProjectorCell::from_indices(3, {0, 1}), ProjectorCell::from_indices(3, {1, 2})};
  CHECK_THROWS_AS(ProjectorFamily(3, overlap, {CellLabel{"a"}, CellLabel{"b"}}, 1.0), ConfigError);
  CHECK_THROWS_AS(ProjectorCell::from_indices(3, {0, 0}), ConfigError);
  CHECK_THROWS_AS(ProjectorCell::from_basis(CMatrix::Ones(3, 2)), ShapeError);
}

TEST_CASE("coarse observable") {
  const auto f = build_position_projectors(4, 2, 0.0, 2.0, Boundary::Periodic);
  const auto obs = build_coarse_observable(f, 0.0, 1.0);
  CHECK(obs.values[0] == doctest::Approx(0.5));
  CHECK(obs.values[1] == doctest::Approx(1.5));
  const auto flat = build_coarse_observable(f, 2.0, 0.0);
  CHECK(flat.values[0] == flat.values[1]);
  CVector in_cell = CVector::Zero(4);
  in_cell[2] = 0.6;
  in_cell[3] = Complex(0.0, 0.8);
  CHECK(expectation(obs.operator_form(), StateVector(in_cell)) == doctest::Approx(1.5));
}

TEST_CASE("pure decomposition examples") {
  const auto f = pairs_family(4);
  const auto d = decompose_pure(StateVector(CVector::Constant(4, 0.5)), f);
  CHECK(d.weights[0] == doctest::Approx(0.5));
  CHECK(d.weights[1] == doctest::Approx(0.5));
  CVector first(4);
  first << 1, 1, 0, 0;
  first /= std::sqrt(2.0);
  CHECK((d.states[0] - first).norm() < 1e-14);

  CVector inside = CVector::Zero(4);
  inside[2] = Complex(0.0, 0.6);
  inside[3] = 0.8;
  const auto one = decompose_pure(StateVector(inside), f);
  CHECK(one.count() == 1);
  CHECK(one.weights[1] == doctest::Approx(1.0));
  CHECK(!one.occupied(0));
  // Phase convention: first component real positive, so |Psi_1> = -i |Psi>.
  CHECK(std::abs(one.states[1][2] - Complex(0.6)) < 1e-14);
  CHECK((one.amplitudes[1] * one.states[1] - inside).norm() < 1e-14);
}

TEST_CASE("gaussian packet weights match interval integrals") {
  const Index points = 200;
  const double sigma = 2.0;  // grid units, density standard deviation
  const double center = 100.0;
  const auto f = build_position_projectors(points, 10, 0.0, static_cast<double>(points), Boundary::HardWall);
  CVector psi(points);
  for (Index n = 0; n < points; ++n) {
    const double x = f.grid()->position(n);
    psi[n] = std::exp(-(x - center) * (x - center) / (4 * sigma * sigma));
  }
  const auto d = decompose_pure(StateVector::normalized(psi), f);
  for (Index i = 0; i < 10; ++i) {
    const double oracle = gaussian_cell_mass(f.label(i).lo, f.label(i).hi, center, sigma);
    CHECK(std::abs(d.weights[static_cast<std::size_t>(i)] - oracle) < 1e-8);
  }
}

TEST_CASE("microstate invariants on random instances") {
  StreamRng rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index dim = 8;
    const auto f = random_basis_family(dim, 4, rng);
    const auto psi = random_state(dim, rng);
    const auto d = decompose_pure(psi, f);
    double total = 0.0;
    for (Index i = 0; i < d.size(); ++i) {
      total += d.weights[static_cast<std::size_t>(i)];
      if (!d.occupied(i)) continue;
      const auto& si = d.states[static_cast<std::size_t>(i)];
      CHECK(std::abs(si.dot(psi.amplitudes()) - d.amplitudes[static_cast<std::size_t>(i)]) < 1e-10);
      for (Index j = 0; j < d.size(); ++j) {
        if (!d.occupied(j)) continue;
        const Complex overlap = si.dot(d.states[static_cast<std::size_t>(j)]);
        CHECK(std::abs(overlap - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((d.reconstruct() - psi.amplitudes()).norm() < 1e-9);
    const auto obs = build_coarse_observable(f, -1.0, 0.7);
    double born = 0.0;
    for (Index i = 0; i < d.size(); ++i) {
      if (d.occupied(i)) born += d.weights[static_cast<std::size_t>(i)] * expectation(obs.operator_form().matrix(), d.states[static_cast<std::size_t>(i)]);
    }
    CHECK(std::abs(expectation(obs.operator_form(), psi) - born) < 1e-9);

    const auto mixed = decompose_mixed(density_matrix(psi), f);
    for (Index i = 0; i < d.size(); ++i) CHECK(std::abs(mixed.weights[static_cast<std::size_t>(i)] - d.weights[static_cast<std::size_t>(i)]) < 1e-10);
  }
}

TEST_CASE("mixed decomposition") {
  StreamRng rng(4, 0);
  const auto f = pairs_family(6);
  const auto mixed = decompose_mixed(CMatrix::Identity(6, 6) / 6.0, f);
  for (Index i = 0; i < 3; ++i) {
    CHECK(mixed.weights[static_cast<std::size_t>(i)] == doctest::Approx(2.0 / 6.0));
    for (Index j = 0; j < 3; ++j) {
      if (i != j) CHECK(mixed.off_diagonal(i, j).norm() < 1e-15);
    }
    const CMatrix rii = mixed.diagonal(i);
    CHECK(std::abs(rii.trace() - Complex(1.0)) < 1e-10);
  }

  const auto h = random_hermitian(6, rng);
  const HermitianSpectrum spec(h);
  RVector boltz = (-spec.energies().array()).exp();
  boltz /= boltz.sum();
  const CMatrix rho = spec.vectors() * boltz.cast<Complex>().asDiagonal() * spec.vectors().adjoint();
  const auto thermal = decompose_mixed(rho, f);
  for (Index i = 0; i < 3; ++i) {
    const double oracle = (rho(2 * i, 2 * i) + rho(2 * i + 1, 2 * i + 1)).real();
    CHECK(std::abs(thermal.weights[static_cast<std::size_t>(i)] - oracle) < 1e-10);
    const CMatrix rii = thermal.diagonal(i);
    CHECK(hermiticity_defect(rii) < 1e-12);
    CHECK(std::abs(rii.trace() - Complex(1.0)) < 1e-10);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rii);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }

  CMatrix bad = CMatrix::Zero(6, 6);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(decompose_mixed(bad, f), DomainError);
  CHECK_THROWS_AS(decompose_mixed(2.0 * rho, f), DomainError);
}

TEST_CASE("nondegeneracy and merging") {
  StreamRng rng(8, 0);
  const auto f = pairs_family(6);
  const auto psi = random_state(6, rng);
  const auto d = decompose_pure(psi, f);
  const auto own = build_coarse_observable(f, 0.0, 1.0);
  CHECK(verify_nondegeneracy(d, {own.operator_form()}).all_distinguished());

  const auto report = verify_nondegeneracy(d, {HermitianOperator::identity(6)});
  CHECK(report.degenerate_pairs.size() == 3);
  const auto merged = merge_degenerate(d, report);
  CHECK(merged.count() == 1);
  CHECK(merged.weights[0] == doctest::Approx(1.0));
  CHECK(std::abs(std::abs(merged.states[0].dot(psi.amplitudes())) - 1.0) < 1e-12);
  CHECK((merged.reconstruct() - psi.amplitudes()).norm() < 1e-12);

  // Observable equal to 3 on cells 0 and 1, 5 on cell 2: only (0, 1) is flagged.
  RMatrix diag = RMatrix::Zero(6, 6);
  for (Index k = 0; k < 4; ++k) diag(k, k) = 3.0;
  diag(4, 4) = diag(5, 5) = 5.0;
  const HermitianOperator o{CMatrix(diag.cast<Complex>())};
  const auto r2 = verify_nondegeneracy(d, {o});
  REQUIRE(r2.degenerate_pairs.size() == 1);
  CHECK(r2.degenerate_pairs[0] == std::pair<Index, Index>{0, 1});
  const auto m2 = merge(d, 0, 1);
  CHECK(m2.size() == 2);
  CVector expected = d.amplitudes[0] * d.states[0] + d.amplitudes[1] * d.states[1];
  expected /= expected.norm();
  CHECK(std::abs(std::abs(m2.states[0].dot(expected)) - 1.0) < 1e-12);
  CHECK(m2.weights[0] == doctest::Approx(d.weights[0] + d.weights[1]));
  CHECK(m2.source_cells[0] == std::vector<Index>{0, 1});
  CHECK_THROWS_AS(merge(d, 1, 1), RangeError);
}

TEST_CASE("ensemble entropy") {
  CHECK(ensemble_entropy(std::vector<double>{1.0}) == 0.0);
  CHECK(ensemble_entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(ensemble_entropy(std::vector<double>{0.3, 0.7}) == doctest::Approx(-0.3 * std::log(0.3) - 0.7 * std::log(0.7)));
  CHECK(ensemble_entropy(std::vector<double>{0.3, 0.7}) == doctest::Approx(0.6108643020548935).epsilon(1e-14));
  CHECK(ensemble_entropy(std::vector<double>{0.0, 1.0}) == 0.0);
}

TEST_CASE("blocking") {
  StreamRng rng(12, 0);
  const auto fine = build_position_projectors(16, 8, 0.0, 8.0, Boundary::Periodic);
  const auto coarse = block_projectors(fine);
  CHECK(coarse.size() == 4);
  CHECK(coarse.cell(0).rank() == 4);
  CHECK(coarse.resolution() == doctest::Approx(2.0));
  CHECK(coarse.label(1).lo == doctest::Approx(2.0));
  CHECK(coarse.label(1).hi == doctest::Approx(4.0));
  CHECK_THROWS_AS(block_projectors(build_position_projectors(6, 3, 0.0, 3.0, Boundary::Periodic)), ConfigError);
  for (int trial = 0; trial < 10; ++trial) {
    const auto psi = random_state(16, rng);
    const auto df = decompose_pure(psi, fine);
    const auto dc = decompose_pure(psi, coarse);
    for (Index i = 0; i < 4; ++i) {
      CHECK(std::abs(dc.weights[static_cast<std::size_t>(i)] - df.weights[static_cast<std::size_t>(2 * i)] -
                     df.weights[static_cast<std::size_t>(2 * i + 1)]) < 1e-10);
    }
    CHECK(ensemble_entropy(dc) <= ensemble_entropy(df) + 1e-12);
  }
}

TEST_CASE("lift and refine") {
  const auto a = build_position_projectors(3, 3, 0.0, 3.0, Boundary::HardWall);
  const auto lifted = lift_family(a, 1, 2);
  CHECK(lifted.dim() == 6);
  CHECK(lifted.cell(1).indices() == std::vector<Index>{2, 3});
  const auto b = lift_family(build_position_projectors(2, 2, 0.0, 2.0, Boundary::HardWall), 3, 1);
  const auto ab = refine_families(lifted, b);
  CHECK(ab.size() == 6);
  CHECK(ab.cell(3).indices() == std::vector<Index>{3});
  CHECK(ab.completeness_defect() < 1e-12);
}

TEST_CASE("u(N) alignment") {
  const auto fam = UNFamily::standard(2, 5);
  SUBCASE("diagonal coefficient matrix") {
    CVector v = CVector::Zero(5);
    v[0] = 0.6;  // |00>
    v[3] = 0.8;  // |11>
    const auto al = align_uN(StateVector(v), fam);
    CHECK((al.rotation.cwiseAbs() - RMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(al.decomposition.weights[0] + al.decomposition.weights[1] == doctest::Approx(1.0));
    const double w0 = al.decomposition.weights[0];
    const double w1 = al.decomposition.weights[1];
    CHECK(std::min(w0, w1) == doctest::Approx(0.36));
    CHECK(std::max(w0, w1) == doctest::Approx(0.64));
    CHECK(!al.decomposition.occupied(2));
  }
  SUBCASE("real symmetric coefficient matrix") {
    CVector v = CVector::Zero(5);
    v[0] = 0.5;
    v[1] = 0.3;
    v[2] = 0.3;
    v[3] = -0.4;
    v[4] = 0.2;
    const auto psi = StateVector::normalized(v);
    const auto al = align_uN(psi, fam);
    Eigen::SelfAdjointEigenSolver<RMatrix> es((RMatrix(2, 2) << 0.5, 0.3, 0.3, -0.4).finished());
    const double norm2 = v.squaredNorm();
    std::vector<double> expected{es.eigenvalues()[0] * es.eigenvalues()[0] / norm2, es.eigenvalues()[1] * es.eigenvalues()[1] / norm2};
    std::vector<double> got{al.decomposition.weights[0], al.decomposition.weights[1]};
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    CHECK(got[0] == doctest::Approx(expected[0]).epsilon(1e-10));
    CHECK(got[1] == doctest::Approx(expected[1]).epsilon(1e-10));
    CHECK(al.decomposition.weights[2] == doctest::Approx(0.04 / norm2));
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) {
        const Complex ev = psi.amplitudes().dot(al.aligned.generator(i, j) * psi.amplitudes());
        const double target = i == j ? al.decomposition.weights[static_cast<std::size_t>(i)] : 0.0;
        CHECK(std::abs(ev - target) < 1e-10);
      }
    CHECK((al.decomposition.reconstruct() - psi.amplitudes()).norm() < 1e-10);
  }
  SUBCASE("empty row leaves the weight in the remainder") {
    CVector v = CVector::Zero(5);
    v[0] = 0.6;
    v[4] = 0.8;
    const auto al = align_uN(StateVector(v), fam);
    CHECK(al.decomposition.weights[0] + al.decomposition.weights[1] == doctest::Approx(0.36));
    CHECK(al.decomposition.weights[2] == doctest::Approx(0.64));
  }
  SUBCASE("non-normal coefficient matrix") {
    CVector v = CVector::Zero(5);
    v[0] = 0.6;
    v[1] = 0.8;
    CHECK_THROWS_AS(align_uN(StateVector(v), fam), NotNormalError);
  }
  SUBCASE("broken algebra") {
    auto broken = fam;
    broken.generators[1] *= 2.0;
    CHECK_THROWS_AS(align_uN(StateVector::basis(5, 0), broken), AlgebraError);
  }
}
