#include "beable/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "beable/random.hpp"

namespace beable {

QuantumSystem ScenarioSpec::system() const { return QuantumSystem(schedule, initial_state, hbar); }

const ProjectorFamily& ScenarioSpec::family(const std::string& key) const {
  for (const auto& [k, f] : families) {
    if (k == key) return f;
  }
  throw ConfigError("scenario '" + name + "' has no family '" + key + "'");
}

double ScenarioSpec::marker(const std::string& key) const {
  const auto it = markers.find(key);
  if (it == markers.end()) throw ConfigError("scenario '" + name + "' has no marker '" + key + "'");
  return it->second;
}

HermitianOperator kinetic_operator(const PositionGrid& grid, double mass, double hbar) {
  if (!(mass > 0.0)) throw ConfigError("mass must be positive");
  const Index n = grid.points;
  const double a = grid.spacing();
  const double t = hbar * hbar / (2.0 * mass * a * a);
  CMatrix h = CMatrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    h(k, k) = 2.0 * t;
    if (k + 1 < n) {
      h(k, k + 1) = -t;
      h(k + 1, k) = -t;
    }
  }
  if (grid.boundary == Boundary::Periodic && n > 2) {
    h(0, n - 1) = -t;
    h(n - 1, 0) = -t;
  }
  return HermitianOperator(h);
}

HermitianOperator spectral_momentum(const PositionGrid& grid, int power, double hbar) {
  const Index n = grid.points;
  if (n < 2) throw ConfigError("spectral momentum needs at least two grid points");
  if (power < 1) throw ConfigError("momentum power must be at least 1");
  const double length = grid.x_hi - grid.x_lo;
  const Index lo = -((n - 1) / 2);
  const Index hi = n / 2;
  // Toeplitz: entry (r, s) depends on r - s only.
  std::vector<Complex> row(static_cast<std::size_t>(2 * n - 1));
  for (Index d = -(n - 1); d <= n - 1; ++d) {
    Complex sum = 0.0;
    for (Index m = lo; m <= hi; ++m) {
      const double k = 2.0 * std::numbers::pi * static_cast<double>(m) / length;
      const bool nyquist = (n % 2 == 0) && m == hi;
      const double value = (nyquist && power % 2 == 1) ? 0.0 : std::pow(hbar * k, power);
      sum += value * std::exp(Complex(0.0, k * static_cast<double>(d) * grid.spacing()));
    }
    row[static_cast<std::size_t>(d + n - 1)] = sum / static_cast<double>(n);
  }
  CMatrix p(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index s = 0; s < n; ++s) p(r, s) = row[static_cast<std::size_t>(r - s + n - 1)];
  p = 0.5 * (p + p.adjoint()).eval();
  return HermitianOperator(p);
}

CVector gaussian_on_grid(const PositionGrid& grid, const WavePacket& packet, double hbar) {
  CVector psi(grid.points);
  const double length = grid.x_hi - grid.x_lo;
  for (Index n = 0; n < grid.points; ++n) {
    const double x = grid.position(n);
    double dx = x - packet.center;
    if (grid.boundary == Boundary::Periodic) dx -= length * std::round(dx / length);
    psi[n] = std::exp(Complex(-dx * dx / (4.0 * packet.width * packet.width), packet.momentum * x / hbar));
  }
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw ConfigError("wave packet vanishes on the grid");
  return psi / norm;
}

ScenarioSpec make_particle1d(const ParticleParams& params) {
  if (params.cells < 1 || params.grid_points % params.cells != 0) {
    throw ConfigError("grid points must be a positive multiple of the cell count");
  }
  auto family = build_position_projectors(params.grid_points, params.cells, params.x_lo, params.x_hi, params.boundary);
  const PositionGrid& grid = *family.grid();
  if (params.packet.width < 2.0 * grid.spacing()) {
    throw ConfigError("packet width " + std::to_string(params.packet.width) + " is below two grid spacings (" +
                      std::to_string(2.0 * grid.spacing()) + ")");
  }
  HermitianOperator h = kinetic_operator(grid, params.mass, params.hbar);
  if (!params.potential.empty()) {
    if (static_cast<Index>(params.potential.size()) != params.grid_points) {
      throw ConfigError("potential needs one value per grid point");
    }
    CMatrix v = CMatrix::Zero(params.grid_points, params.grid_points);
    for (Index n = 0; n < params.grid_points; ++n) v(n, n) = params.potential[static_cast<std::size_t>(n)];
    h = h + HermitianOperator(v);
  }
  StateVector psi(gaussian_on_grid(grid, params.packet, params.hbar));
  ScenarioSpec spec{"particle", {ScheduleSegment{0.0, std::numeric_limits<double>::infinity(), h}}, psi, {}, params.defaults,
                    params.hbar, {}};
  spec.markers = {{"mass", params.mass},
                  {"velocity", params.packet.momentum / params.mass},
                  {"resolution", family.resolution()},
                  {"spacing", grid.spacing()}};
  spec.families.emplace_back("x", std::move(family));
  return spec;
}

ScenarioSpec make_measurement(const MeasurementParams& p) {
  const Index outcomes = static_cast<Index>(p.lambdas.size());
  if (outcomes < 1) throw ConfigError("measurement needs at least one outcome amplitude");
  double total = 0.0;
  for (const auto& l : p.lambdas) total += std::norm(l);
  if (std::abs(total - 1.0) > 1e-10) throw ConfigError("outcome amplitudes must satisfy sum |lambda|^2 = 1");
  if (!(p.pulse > 0.0)) throw ConfigError("pulse duration must be positive");
  if (p.cells < 1 || p.grid_points % p.cells != 0) throw ConfigError("grid points must be a multiple of the cell count");

  auto pointer = build_position_projectors(p.grid_points, p.cells, p.x_lo, p.x_hi, Boundary::Periodic);
  const PositionGrid grid = *pointer.grid();
  const double delta = pointer.resolution();
  if (outcomes > 1 && p.separation < 2.0 * delta) {
    throw ConfigError("pointer separation " + std::to_string(p.separation) + " must be at least twice the cell size " +
                      std::to_string(delta));
  }
  if (delta < 12.0 * p.width) {
    throw ConfigError("cell size " + std::to_string(delta) + " must be at least 12 packet widths (" +
                      std::to_string(12.0 * p.width) + ")");
  }
  if (p.width < 2.0 * grid.spacing()) {
    throw ConfigError("packet width " + std::to_string(p.width) + " is below two grid spacings");
  }
  auto cell_of = [&](double x) {
    const double rel = (x - p.x_lo) / delta;
    const double edge = std::min(rel - std::floor(rel), std::ceil(rel) - rel) * delta;
    if (x < p.x_lo || x > p.x_hi || edge < 6.0 * p.width) {
      throw ConfigError("pointer position " + std::to_string(x) + " lies within 6 packet widths of a cell boundary");
    }
    return static_cast<Index>(std::floor(rel));
  };

  ScenarioSpec spec{"measurement", {}, StateVector::basis(1, 0), {}, p.defaults, p.hbar, {}};
  spec.markers["pulse"] = p.pulse;
  spec.markers["start_cell"] = static_cast<double>(cell_of(p.start));
  std::vector<double> velocity(static_cast<std::size_t>(outcomes));
  for (Index a = 0; a < outcomes; ++a) {
    const double target = p.start + (static_cast<double>(a) - 0.5 * static_cast<double>(outcomes - 1)) * p.separation;
    spec.markers["cell_" + std::to_string(a)] = static_cast<double>(cell_of(target));
    spec.markers["weight_" + std::to_string(a)] = std::norm(p.lambdas[static_cast<std::size_t>(a)]);
    velocity[static_cast<std::size_t>(a)] = (target - p.start) / p.pulse;
  }

  const Index np = p.grid_points;
  const Index dim = outcomes * np;
  const CMatrix mom = spectral_momentum(grid, 1, p.hbar).matrix();
  const CMatrix free = spectral_momentum(grid, 2, p.hbar).matrix() / (2.0 * p.mass);
  CMatrix drive = CMatrix::Zero(dim, dim);
  CMatrix rest = CMatrix::Zero(dim, dim);
  for (Index a = 0; a < outcomes; ++a) {
    drive.block(a * np, a * np, np, np) = velocity[static_cast<std::size_t>(a)] * mom + free;
    rest.block(a * np, a * np, np, np) = free;
  }
  spec.schedule = {ScheduleSegment{0.0, p.pulse, HermitianOperator(drive)},
                   ScheduleSegment{p.pulse, std::numeric_limits<double>::infinity(), HermitianOperator(rest)}};

  const CVector phi = gaussian_on_grid(grid, WavePacket{p.start, p.width, 0.0}, p.hbar);
  CVector psi = CVector::Zero(dim);
  for (Index a = 0; a < outcomes; ++a) psi.segment(a * np, np) = p.lambdas[static_cast<std::size_t>(a)] * phi;
  spec.initial_state = StateVector::normalized(psi);
  ProjectorFamily lifted = lift_family(pointer, outcomes, 1);
  lifted.set_grid(grid);
  spec.families.emplace_back("pointer", std::move(lifted));
  return spec;
}

namespace {

ProjectorFamily labelled_singletons(const std::vector<std::string>& names) {
  const Index n = static_cast<Index>(names.size());
  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  for (Index i = 0; i < n; ++i) {
    cells.push_back(ProjectorCell::from_indices(n, {i}));
    labels.push_back(CellLabel{names[static_cast<std::size_t>(i)]});
  }
  return ProjectorFamily(n, std::move(cells), std::move(labels), 1.0);
}

CMatrix outer(const CVector& a, const CVector& b) { return a * b.adjoint(); }

// g sum_s (|D_s><D_0| + h.c.) (x) |q_s><q_s|, device basis {0, +, -}.
CMatrix device_coupling(double g, const CVector& q_plus, const CVector& q_minus) {
  CMatrix up = CMatrix::Zero(3, 3);
  CMatrix dn = CMatrix::Zero(3, 3);
  up(1, 0) = up(0, 1) = g;
  dn(2, 0) = dn(0, 2) = g;
  return kron(up, outer(q_plus, q_plus)) + kron(dn, outer(q_minus, q_minus));
}

}  // namespace

std::vector<Index> epr_outcome_cells() { return {4, 5, 7, 8}; }

ScenarioSpec make_epr(const EprParams& p) {
  if (p.theta < 0.0 || p.theta > 0.5 * std::numbers::pi + 1e-12) throw ConfigError("theta must lie in [0, pi/2]");
  if (!(p.pulse > 0.0)) throw ConfigError("pulse duration must be positive");
  if (!(p.t_a >= 0.0 && p.t_b >= p.t_a + p.pulse && p.t_final >= p.t_b + p.pulse)) {
    throw ConfigError("EPR windows must satisfy 0 <= t_a, t_a + pulse <= t_b, t_b + pulse <= t_final");
  }
  const double g = std::numbers::pi / (2.0 * p.pulse);
  CVector zp(2), zm(2), np(2), nm(2);
  zp << 1, 0;
  zm << 0, 1;
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  np << c, s;
  nm << -s, c;
  const CMatrix ha_local = device_coupling(g, zp, zm);  // A (x) qubit 1
  const CMatrix hb_local = device_coupling(g, np, nm);  // B (x) qubit 2
  auto idx = [](Index a, Index b, Index s1, Index s2) { return ((a * 3 + b) * 2 + s1) * 2 + s2; };
  CMatrix ha = CMatrix::Zero(36, 36);
  CMatrix hb = CMatrix::Zero(36, 36);
  for (Index d = 0; d < 3; ++d)
    for (Index d2 = 0; d2 < 3; ++d2)
      for (Index q = 0; q < 2; ++q)
        for (Index q2 = 0; q2 < 2; ++q2) {
          const Complex ea = ha_local(d * 2 + q, d2 * 2 + q2);
          const Complex eb = hb_local(d * 2 + q, d2 * 2 + q2);
          for (Index other = 0; other < 3; ++other)
            for (Index r = 0; r < 2; ++r) {
              ha(idx(d, other, q, r), idx(d2, other, q2, r)) = ea;
              hb(idx(other, d, r, q), idx(other, d2, r, q2)) = eb;
            }
        }

  CVector psi = CVector::Zero(36);
  psi[idx(0, 0, 0, 1)] = 1.0 / std::sqrt(2.0);
  psi[idx(0, 0, 1, 0)] = -1.0 / std::sqrt(2.0);

  const auto zero = HermitianOperator::zero(36);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<ScheduleSegment> schedule;
  if (p.t_a > 0.0) schedule.push_back({0.0, p.t_a, zero});
  schedule.push_back({p.t_a, p.t_a + p.pulse, HermitianOperator(ha)});
  if (p.t_b > p.t_a + p.pulse) schedule.push_back({p.t_a + p.pulse, p.t_b, zero});
  schedule.push_back({p.t_b, p.t_b + p.pulse, HermitianOperator(hb)});
  schedule.push_back({p.t_b + p.pulse, inf, zero});

  ScenarioSpec spec{"epr", std::move(schedule), StateVector(psi), {}, p.defaults, 1.0, {}};
  spec.defaults.t1 = p.t_final;
  spec.markers = {{"theta", p.theta},
                  {"t1", p.t_a},
                  {"t2", 0.5 * (p.t_a + p.pulse + p.t_b)},
                  {"t3", p.t_final},
                  {"a_begin", p.t_a},
                  {"a_end", p.t_a + p.pulse},
                  {"b_begin", p.t_b},
                  {"b_end", p.t_b + p.pulse}};
  const auto fa = lift_family(labelled_singletons({"A0", "A+", "A-"}), 1, 12);
  const auto fb = lift_family(labelled_singletons({"B0", "B+", "B-"}), 3, 4);
  auto fab = refine_families(fa, fb);
  spec.families.emplace_back("A", fa);
  spec.families.emplace_back("B", fb);
  spec.families.emplace_back("AB", std::move(fab));
  return spec;
}

ScenarioSpec make_ergodic(const ErgodicParams& p) {
  if (p.dim < 2) throw ConfigError("ergodic model needs dim >= 2");
  if (!(p.delta_e > 0.0)) throw ConfigError("energy width must be positive");
  std::vector<Index> ranks = p.ranks.empty() ? std::vector<Index>(static_cast<std::size_t>(p.dim), 1) : p.ranks;
  Index sum = 0;
  for (Index r : ranks) {
    if (r < 1) throw ConfigError("cell ranks must be positive");
    sum += r;
  }
  if (sum != p.dim) {
    throw ConfigError("cell ranks sum to " + std::to_string(sum) + ", expected " + std::to_string(p.dim));
  }
  StreamRng rng(p.seed, 0);
  RVector energies(p.dim);
  for (Index n = 0; n < p.dim; ++n) energies[n] = p.energy + p.delta_e * rng.uniform();
  const CMatrix u = haar_unitary(p.dim, rng);
  CMatrix h = u * energies.cast<Complex>().asDiagonal() * u.adjoint();
  h = 0.5 * (h + h.adjoint()).eval();
  StreamRng state_rng(p.seed, 1);
  StateVector psi = random_state(p.dim, state_rng);

  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  Index start = 0;
  for (std::size_t c = 0; c < ranks.size(); ++c) {
    std::vector<Index> idx;
    for (Index k = 0; k < ranks[c]; ++k) idx.push_back(start + k);
    start += ranks[c];
    cells.push_back(ProjectorCell::from_indices(p.dim, std::move(idx)));
    labels.push_back(CellLabel{std::to_string(c)});
  }
  ScenarioSpec spec{"ergodic",
                    {ScheduleSegment{0.0, std::numeric_limits<double>::infinity(), HermitianOperator(h)}},
                    psi,
                    {},
                    p.defaults,
                    p.hbar,
                    {}};
  spec.markers = {{"dim", static_cast<double>(p.dim)}, {"delta_e", p.delta_e}, {"energy", p.energy}};
  spec.families.emplace_back("cells", ProjectorFamily(p.dim, std::move(cells), std::move(labels), 1.0));
  return spec;
}

}  // namespace beable
