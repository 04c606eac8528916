#include "beable/system.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace beable {

QuantumSystem::QuantumSystem(std::vector<ScheduleSegment> schedule, StateVector initial, double hbar)
    : schedule_(std::move(schedule)), initial_(std::move(initial)), hbar_(hbar) {
  if (schedule_.empty()) throw ConfigError("Hamiltonian schedule is empty");
  if (!(hbar_ > 0.0)) throw ConfigError("hbar must be positive");
  for (std::size_t k = 0; k < schedule_.size(); ++k) {
    const auto& seg = schedule_[k];
    if (!(seg.t_end > seg.t_begin)) throw ConfigError("schedule segment " + std::to_string(k) + " has t_end <= t_begin");
    if (seg.hamiltonian.dim() != initial_.dim()) {
      throw ShapeError("schedule Hamiltonian dimension differs from the initial state");
    }
    if (k + 1 < schedule_.size()) {
      if (!std::isfinite(seg.t_end)) throw ConfigError("only the last schedule segment may be unbounded");
      const double gap = schedule_[k + 1].t_begin - seg.t_end;
      if (std::abs(gap) > 1e-12 * std::max(1.0, std::abs(seg.t_end))) {
        throw ConfigError("schedule segments " + std::to_string(k) + " and " + std::to_string(k + 1) +
                          " are not contiguous");
      }
    }
  }
  spectra_.reserve(schedule_.size());
  segment_starts_.reserve(schedule_.size());
  CVector state = initial_.amplitudes();
  for (const auto& seg : schedule_) {
    spectra_.emplace_back(seg.hamiltonian);
    segment_starts_.push_back(state);
    if (std::isfinite(seg.t_end)) state = spectra_.back().evolve(state, seg.t_end - seg.t_begin, hbar_);
  }
}

QuantumSystem::QuantumSystem(const HermitianOperator& h, StateVector initial, double t0, double hbar)
    : QuantumSystem(std::vector<ScheduleSegment>{ScheduleSegment{t0, std::numeric_limits<double>::infinity(), h}},
                    std::move(initial), hbar) {}

std::size_t QuantumSystem::segment_index(double t) const {
  if (t < t0() || t > t_end()) {
    throw RangeError("time " + std::to_string(t) + " outside the schedule [" + std::to_string(t0()) + ", " +
                     std::to_string(t_end()) + "]");
  }
  auto it = std::upper_bound(schedule_.begin(), schedule_.end(), t,
                             [](double value, const ScheduleSegment& s) { return value < s.t_end; });
  if (it == schedule_.end()) return schedule_.size() - 1;
  return static_cast<std::size_t>(it - schedule_.begin());
}

const HermitianOperator& QuantumSystem::hamiltonian_at(double t) const {
  return schedule_[segment_index(t)].hamiltonian;
}

CVector QuantumSystem::state_at(double t) const {
  const std::size_t k = segment_index(t);
  return spectra_[k].evolve(segment_starts_[k], t - schedule_[k].t_begin, hbar_);
}

CVector QuantumSystem::state_in_segment(double t, std::size_t k) const {
  CVector psi = spectra_.at(k).evolve(segment_starts_.at(k), t - schedule_.at(k).t_begin, hbar_);
  if (!psi.allFinite()) throw NumericalError("state propagation gave non-finite amplitudes at t = " + std::to_string(t));
  return psi;
}

StateVector QuantumSystem::state_vector_at(double t) const { return StateVector::normalized(state_at(t)); }

std::vector<double> QuantumSystem::breakpoints(double a, double b) const {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < schedule_.size(); ++k) {
    const double t = schedule_[k].t_end;
    if (t > a && t < b) out.push_back(t);
  }
  return out;
}

}  // namespace beable
