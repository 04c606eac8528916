#pragma once

#include <cstdint>
#include <vector>

#include "beable/rates.hpp"

namespace beable {

struct JumpEvent {
  double time = 0.0;
  Index from = 0;
  Index to = 0;
  bool repair = false;  // index redrawn by starvation repair, not a jump
};

/// Piecewise-constant record of the occupied microstate.
struct JumpTrajectory {
  std::uint64_t seed = 0;
  std::uint64_t trajectory_id = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 0.0;  // requested maximum step
  std::size_t steps = 0;
  Index initial_index = 0;
  std::vector<JumpEvent> events;
  std::size_t repair_events = 0;

  /// Occupied index at time t (right-continuous).
  Index index_at(double t) const;
  Index final_index() const { return events.empty() ? initial_index : events.back().to; }
};

struct SamplingOptions {
  double dt = 0.01;
  /// Cap on the per-step jump probability Sum_i T_ij h.
  double max_jump_probability = 0.05;
  /// Smallest step, as a fraction of dt.
  double min_step_fraction = 1e-6;
  /// Jump probability per step: 1 - exp(-R h) when true, R h when false.
  bool exponential_steps = true;
  /// NumericalError once a window needs more steps than this.
  std::size_t max_steps = 5'000'000;
};

/// Draw from the weights at t0.
inline constexpr Index kDrawInitial = -1;

/// Trajectory-independent step grid with rates evaluated at each step midpoint.
///
/// Each step is shrunk until the largest exit rate of any occupied cell times
/// the step is at most `max_jump_probability`. Steps end on every Hamiltonian
/// breakpoint. Built once and shared by all trajectories of an ensemble.
class RateSchedule {
 public:
  RateSchedule(const RateModel& model, double t0, double t1, const SamplingOptions& options);

  Index count() const noexcept { return count_; }
  double t0() const noexcept { return t0_; }
  double t1() const noexcept { return t1_; }
  double dt() const noexcept { return dt_; }
  bool exponential_steps() const noexcept { return exponential_; }
  std::size_t steps() const noexcept { return start_.size(); }
  double start(std::size_t k) const { return start_[k]; }
  double length(std::size_t k) const { return length_[k]; }
  const std::vector<double>& initial_weights() const noexcept { return initial_weights_; }
  /// Weight of cell i at the midpoint of step k.
  double weight(std::size_t k, Index i) const { return weights_[k * static_cast<std::size_t>(count_) + static_cast<std::size_t>(i)]; }
  double exit_rate(std::size_t k, Index j) const { return exit_[k * static_cast<std::size_t>(count_) + static_cast<std::size_t>(j)]; }

  struct Entry {
    Index target;
    double rate;
  };
  /// Nonzero rates out of source j during step k.
  std::pair<const Entry*, const Entry*> rates_from(std::size_t k, Index j) const {
    const std::size_t slot = k * static_cast<std::size_t>(count_) + static_cast<std::size_t>(j);
    return {entries_.data() + offsets_[slot], entries_.data() + offsets_[slot + 1]};
  }

 private:
  Index count_ = 0;
  double t0_ = 0.0;
  double t1_ = 0.0;
  double dt_ = 0.0;
  bool exponential_ = true;
  std::vector<double> initial_weights_;
  std::vector<double> start_;
  std::vector<double> length_;
  std::vector<double> weights_;
  std::vector<double> exit_;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

/// One trajectory on a shared schedule, driven by StreamRng(seed, trajectory_id).
///
/// Per step, one uniform u decides whether a jump fires (u below the jump
/// probability of R_j h), which target (cumulative rates) and where in the
/// step it happens. If the occupied
/// cell's weight is below eps_occ the index is first redrawn from the current
/// weights and the repair is counted.
JumpTrajectory sample_path(const RateSchedule& schedule, std::uint64_t seed, std::uint64_t trajectory_id,
                           Index initial = kDrawInitial, double eps_occ = kDefaultEpsOcc);

/// Ensemble of paths 0..n-1, run on worker threads. Results are ordered by
/// trajectory id and independent of the worker count.
std::vector<JumpTrajectory> sample_ensemble(const RateSchedule& schedule, std::size_t trajectories,
                                            std::uint64_t seed, Index initial = kDrawInitial,
                                            unsigned threads = 0, double eps_occ = kDefaultEpsOcc);

/// Single trajectory with steps adapted to the currently occupied cell only.
///
/// Evaluates the state on the fly, so memory stays constant over long
/// horizons. Statistically equivalent to sample_path but not draw-for-draw.
JumpTrajectory sample_trajectory(const RateModel& model, double t0, double t1, const SamplingOptions& options,
                                 std::uint64_t seed, Index initial = kDrawInitial, std::uint64_t trajectory_id = 0);

/// Ensemble of sample_trajectory runs 0..n-1 on worker threads; for long
/// horizons where a shared RateSchedule would not fit in memory.
std::vector<JumpTrajectory> sample_ensemble(const RateModel& model, double t0, double t1,
                                            const SamplingOptions& options, std::size_t trajectories,
                                            std::uint64_t seed, Index initial = kDrawInitial,
                                            unsigned threads = 0);

/// `requested` (or the hardware concurrency when 0), capped by BEABLE_THREADS.
unsigned worker_count(unsigned requested = 0);

}  // namespace beable
