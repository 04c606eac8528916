#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "beable/microstates.hpp"
#include "beable/system.hpp"

namespace beable {

struct RunDefaults {
  double dt = 0.01;
  double t1 = 1.0;
  std::size_t trajectories = 10000;
};

/// Hamiltonian schedule, initial state and named families of one worked system.
struct ScenarioSpec {
  std::string name;
  std::vector<ScheduleSegment> schedule;
  StateVector initial_state;
  std::vector<std::pair<std::string, ProjectorFamily>> families;
  RunDefaults defaults;
  double hbar = 1.0;
  /// Named times and parameters (pulse windows, velocities, target cells).
  std::map<std::string, double> markers;

  QuantumSystem system() const;
  /// ConfigError if no family has that name.
  const ProjectorFamily& family(const std::string& key) const;
  double marker(const std::string& key) const;
};

/// -(hbar^2 / 2M) d^2/dx^2 with the three-point stencil. Periodic grids wrap;
/// hard walls drop the couplings across the ends.
HermitianOperator kinetic_operator(const PositionGrid& grid, double mass, double hbar = 1.0);

/// Momentum operator diagonal in the discrete Fourier basis of a ring.
/// `power` 1 gives p, 2 gives p^2. On even grids the Nyquist mode carries
/// momentum 0 for odd powers.
HermitianOperator spectral_momentum(const PositionGrid& grid, int power = 1, double hbar = 1.0);

/// Normalized exp(i p x / hbar) exp(-(x - center)^2 / 4 width^2) on the grid.
struct WavePacket {
  double center = 0.0;
  double width = 1.0;
  double momentum = 0.0;
};
CVector gaussian_on_grid(const PositionGrid& grid, const WavePacket& packet, double hbar = 1.0);

struct ParticleParams {
  Index grid_points = 512;
  Index cells = 128;
  double x_lo = 0.0;
  double x_hi = 128.0;
  Boundary boundary = Boundary::Periodic;
  double mass = 1.0;
  double hbar = 1.0;
  WavePacket packet{64.0, 12.0, 0.5};
  /// Potential values on the grid points; empty means free motion.
  std::vector<double> potential;
  RunDefaults defaults{0.01, 10.0, 10000};
};

/// Family "x": position cells. Markers: mass, velocity (p/M), resolution, spacing.
/// ConfigError if the packet width is below two grid spacings.
ScenarioSpec make_particle1d(const ParticleParams& params);

struct MeasurementParams {
  std::vector<Complex> lambdas{Complex(std::sqrt(0.3)), Complex(std::sqrt(0.7))};
  Index grid_points = 360;
  double x_lo = 0.0;
  double x_hi = 24.0;
  Index cells = 12;
  double start = 13.0;
  double separation = 8.0;
  double width = 0.15;
  double pulse = 1.0;
  /// Pointer mass of the free motion on and after the pulse.
  double mass = 1000.0;
  double hbar = 1.0;
  RunDefaults defaults{0.01, 3.0, 10000};
};

/// System (x) pointer ring, system index slowest.
///
/// During [0, pulse] outcome a translates the pointer packet rigidly by
/// x_a - start with H = sum_a |a><a| (x) v_a p + p^2 / 2M, v_a = (x_a - start) / pulse
/// and x_a = start + (a - (K - 1) / 2) separation. Afterwards only p^2 / 2M acts.
/// Family "pointer". Markers: pulse, start_cell, cell_<a> (target cell of outcome a)
/// and weight_<a> = |lambda_a|^2.
///
/// ConfigError if sum |lambda_a|^2 != 1, or the ordering
/// separation >= 2 resolution, resolution >= 12 width, width >= 2 spacing fails,
/// or a packet centre lies within 6 widths of a cell boundary.
ScenarioSpec make_measurement(const MeasurementParams& params);

struct EprParams {
  double theta = 0.0;
  double pulse = 1.0;
  double t_a = 0.5;
  double t_b = 2.0;
  double t_final = 3.5;
  RunDefaults defaults{0.01, 3.5, 10000};
};

/// Devices A, B with states {0, +, -} and two qubits: index ((a * 3 + b) * 2 + s1) * 2 + s2,
/// qubit state 0 = z+, 1 = z-. Singlet start, A reads qubit 1 along z during
/// [t_a, t_a + pulse], B reads qubit 2 along n during [t_b, t_b + pulse].
/// Families "A", "B" and "AB" (cells a * 3 + b). Markers t1, t2, t3.
ScenarioSpec make_epr(const EprParams& params);

/// Joint AB cells for (A, B) = (+,+), (+,-), (-,+), (-,-).
std::vector<Index> epr_outcome_cells();

struct ErgodicParams {
  Index dim = 40;
  double energy = 0.0;
  double delta_e = 1.0;
  /// Cell ranks d_i; empty means all ones.
  std::vector<Index> ranks;
  std::uint64_t seed = 1;
  double hbar = 1.0;
  RunDefaults defaults{0.05, 200.0, 1000};
};

/// H = U diag(E) U^dagger with E uniform in [energy, energy + delta_e] and U Haar.
/// Family "cells": consecutive index blocks. ConfigError if the ranks do not sum to dim.
ScenarioSpec make_ergodic(const ErgodicParams& params);

}  // namespace beable
