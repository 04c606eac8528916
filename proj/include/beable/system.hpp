#pragma once

#include <limits>
#include <vector>

#include "beable/linalg.hpp"

namespace beable {

/// Hamiltonian active on [t_begin, t_end). The last segment may extend to +inf.
struct ScheduleSegment {
  double t_begin = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  HermitianOperator hamiltonian;
};

/// Pure state evolving under a piecewise-constant Hamiltonian schedule.
///
/// Every segment is diagonalized once; states at arbitrary times come from
/// exact exponentials, so no time-stepping error enters here.
class QuantumSystem {
 public:
  /// Segments must be contiguous and non-overlapping; ConfigError otherwise.
  QuantumSystem(std::vector<ScheduleSegment> schedule, StateVector initial, double hbar = 1.0);
  /// Time-independent Hamiltonian starting at t0.
  QuantumSystem(const HermitianOperator& h, StateVector initial, double t0 = 0.0, double hbar = 1.0);

  Index dim() const noexcept { return initial_.dim(); }
  double hbar() const noexcept { return hbar_; }
  double t0() const noexcept { return schedule_.front().t_begin; }
  double t_end() const noexcept { return schedule_.back().t_end; }
  const StateVector& initial_state() const noexcept { return initial_; }
  const std::vector<ScheduleSegment>& schedule() const noexcept { return schedule_; }

  /// Segment containing t (segments are half-open; t_end of the last one is included).
  std::size_t segment_index(double t) const;
  const HermitianOperator& hamiltonian_at(double t) const;
  const HermitianSpectrum& spectrum(std::size_t segment) const { return spectra_.at(segment); }

  /// |Psi(t)>; RangeError outside [t0, t_end].
  CVector state_at(double t) const;
  /// State at t propagated with segment k's Hamiltonian, used for left limits at breakpoints.
  CVector state_in_segment(double t, std::size_t k) const;
  StateVector state_vector_at(double t) const;

  /// Segment boundaries strictly inside (a, b).
  std::vector<double> breakpoints(double a, double b) const;

 private:
  std::vector<ScheduleSegment> schedule_;
  StateVector initial_;
  double hbar_;
  std::vector<HermitianSpectrum> spectra_;
  std::vector<CVector> segment_starts_;
};

}  // namespace beable
