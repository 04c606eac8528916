#include "beable/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "beable/random.hpp"

namespace beable {

Index JumpTrajectory::index_at(double t) const {
  if (t < t0 || t > t1) throw RangeError("time outside the trajectory window");
  Index current = initial_index;
  for (const auto& e : events) {
    if (e.time > t) break;
    current = e.to;
  }
  return current;
}

namespace {

// Index drawn with probability proportional to the weights at or above eps.
template <class Weight>
Index draw_index(Index n, Weight weight, double eps, double u) {
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double w = weight(i);
    if (w >= eps) total += w;
  }
  if (!(total > 0.0)) throw NumericalError("no occupied cell to draw an index from");
  const double target = u * total;
  double cum = 0.0;
  Index last = -1;
  for (Index i = 0; i < n; ++i) {
    const double w = weight(i);
    if (!(w >= eps)) continue;
    cum += w;
    last = i;
    if (target < cum) return i;
  }
  return last;
}

double jump_probability(double rate, double h, bool exponential) {
  return exponential ? -std::expm1(-rate * h) : rate * h;
}

// Target and in-step fraction for a fired jump; `y` is uniform on [0, total).
template <class It>
std::pair<Index, double> pick_target(It begin, It end, double y) {
  double cum = 0.0;
  for (It it = begin; it != end; ++it) {
    if (y < cum + it->second || it + 1 == end) {
      return {it->first, std::clamp((y - cum) / it->second, 0.0, 1.0)};
    }
    cum += it->second;
  }
  return {-1, 0.0};
}

double max_occupied_exit(const RateSnapshot& snap, double eps) {
  double worst = 0.0;
  for (Index j = 0; j < snap.rates.count(); ++j) {
    if (snap.weights[static_cast<std::size_t>(j)] >= eps) worst = std::max(worst, snap.rates.exit_rate(j));
  }
  return worst;
}

std::vector<double> step_stops(const QuantumSystem& system, double t0, double t1) {
  std::vector<double> stops = system.breakpoints(t0, t1);
  stops.push_back(t1);
  return stops;
}

void check_window(const QuantumSystem& system, double t0, double t1, const SamplingOptions& options) {
  if (!(t1 > t0)) throw ConfigError("sampling window needs t1 > t0");
  if (!(options.dt > 0.0)) throw ConfigError("dt must be positive");
  if (t0 < system.t0() || t1 > system.t_end()) throw RangeError("sampling window outside the Hamiltonian schedule");
}

NumericalError step_budget(const SamplingOptions& options, double t) {
  return NumericalError("more than " + std::to_string(options.max_steps) + " sampling steps needed (stuck near t = " +
                        std::to_string(t) + "); rates are too large for the step floor");
}

}  // namespace

RateSchedule::RateSchedule(const RateModel& model, double t0, double t1, const SamplingOptions& options)
    : count_(model.count()), t0_(t0), t1_(t1), dt_(options.dt), exponential_(options.exponential_steps) {
  const QuantumSystem& system = model.system();
  check_window(system, t0, t1, options);
  initial_weights_ = model.at(t0).weights;
  const double h_min = options.dt * options.min_step_fraction;
  const double cap = options.max_jump_probability;
  const double eps = model.eps_occ();
  offsets_.push_back(0);
  double t = t0;
  double h_prev = options.dt;
  for (const double stop : step_stops(system, t0, t1)) {
    const std::size_t seg = system.segment_index(t);
    while (t < stop) {
      const double remaining = stop - t;
      double h = std::min({options.dt, remaining, 2.0 * h_prev});
      RateSnapshot snap = model.at(t + 0.5 * h, seg);
      for (;;) {
        const double r = max_occupied_exit(snap, eps);
        if (r * h <= cap || h <= h_min) break;
        h = std::max(h_min, std::min(0.5 * h, 0.95 * cap / r));
        snap = model.at(t + 0.5 * h, seg);
      }
      if (start_.size() >= options.max_steps) throw step_budget(options, t);
      start_.push_back(t);
      length_.push_back(h);
      for (Index j = 0; j < count_; ++j) {
        weights_.push_back(snap.weights[static_cast<std::size_t>(j)]);
        exit_.push_back(snap.rates.exit_rate(j));
        for (Index i = 0; i < count_; ++i) {
          const double rate = snap.rates(i, j);
          if (rate > 0.0) entries_.push_back({i, rate});
        }
        offsets_.push_back(entries_.size());
      }
      h_prev = h;
      t = (h == remaining) ? stop : t + h;
    }
  }
}

JumpTrajectory sample_path(const RateSchedule& schedule, std::uint64_t seed, std::uint64_t trajectory_id,
                           Index initial, double eps_occ) {
  StreamRng rng(seed, trajectory_id);
  const Index n = schedule.count();
  JumpTrajectory tr;
  tr.seed = seed;
  tr.trajectory_id = trajectory_id;
  tr.t0 = schedule.t0();
  tr.t1 = schedule.t1();
  tr.dt = schedule.dt();
  tr.steps = schedule.steps();
  const auto& w0 = schedule.initial_weights();
  if (initial == kDrawInitial) {
    initial = draw_index(n, [&](Index i) { return w0[static_cast<std::size_t>(i)]; }, eps_occ, rng.uniform());
  } else if (initial < 0 || initial >= n) {
    throw RangeError("initial index " + std::to_string(initial) + " outside the family");
  }
  tr.initial_index = initial;
  Index j = initial;
  for (std::size_t k = 0; k < schedule.steps(); ++k) {
    const double u = rng.uniform();
    if (schedule.weight(k, j) < eps_occ) {
      const Index redrawn = draw_index(n, [&](Index i) { return schedule.weight(k, i); }, eps_occ, u);
      tr.events.push_back({schedule.start(k), j, redrawn, true});
      ++tr.repair_events;
      j = redrawn;
      continue;
    }
    const double h = schedule.length(k);
    const double total = schedule.exit_rate(k, j);
    const double p = jump_probability(total, h, schedule.exponential_steps());
    if (!(u < p)) continue;
    auto [begin, end] = schedule.rates_from(k, j);
    std::vector<std::pair<Index, double>> out;
    for (auto it = begin; it != end; ++it) out.emplace_back(it->target, it->rate);
    const auto [target, frac] = pick_target(out.begin(), out.end(), u / p * total);
    tr.events.push_back({schedule.start(k) + frac * h, j, target, false});
    j = target;
  }
  return tr;
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BEABLE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

namespace {

template <class Draw>
std::vector<JumpTrajectory> run_pool(std::size_t trajectories, unsigned threads, Draw draw) {
  std::vector<JumpTrajectory> out(trajectories);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(trajectories, 1)));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t id = w; id < trajectories; id += workers) out[id] = draw(id);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::vector<JumpTrajectory> sample_ensemble(const RateSchedule& schedule, std::size_t trajectories,
                                            std::uint64_t seed, Index initial, unsigned threads, double eps_occ) {
  return run_pool(trajectories, threads,
                  [&](std::size_t id) { return sample_path(schedule, seed, id, initial, eps_occ); });
}

std::vector<JumpTrajectory> sample_ensemble(const RateModel& model, double t0, double t1,
                                            const SamplingOptions& options, std::size_t trajectories,
                                            std::uint64_t seed, Index initial, unsigned threads) {
  check_window(model.system(), t0, t1, options);
  return run_pool(trajectories, threads,
                  [&](std::size_t id) { return sample_trajectory(model, t0, t1, options, seed, initial, id); });
}

JumpTrajectory sample_trajectory(const RateModel& model, double t0, double t1, const SamplingOptions& options,
                                 std::uint64_t seed, Index initial, std::uint64_t trajectory_id) {
  const QuantumSystem& system = model.system();
  check_window(system, t0, t1, options);
  StreamRng rng(seed, trajectory_id);
  const Index n = model.count();
  const double eps = model.eps_occ();
  JumpTrajectory tr;
  tr.seed = seed;
  tr.trajectory_id = trajectory_id;
  tr.t0 = t0;
  tr.t1 = t1;
  tr.dt = options.dt;
  if (initial == kDrawInitial) {
    const auto w0 = model.at(t0).weights;
    initial = draw_index(n, [&](Index i) { return w0[static_cast<std::size_t>(i)]; }, eps, rng.uniform());
  } else if (initial < 0 || initial >= n) {
    throw RangeError("initial index " + std::to_string(initial) + " outside the family");
  }
  tr.initial_index = initial;
  Index j = initial;
  const double h_min = options.dt * options.min_step_fraction;
  const double cap = options.max_jump_probability;
  double t = t0;
  double h_prev = options.dt;
  for (const double stop : step_stops(system, t0, t1)) {
    const std::size_t seg = system.segment_index(t);
    while (t < stop) {
      const double remaining = stop - t;
      double h = std::min({options.dt, remaining, 2.0 * h_prev});
      std::vector<std::pair<Index, double>> out;
      double total = 0.0;
      for (;;) {
        const CVector psi = system.state_in_segment(t + 0.5 * h, seg);
        double wj = 0.0;
        out = model.source_rates(psi, seg, j, &wj);
        if (!(wj >= eps)) {
          const auto w = model.weights(psi);
          const Index redrawn = draw_index(n, [&](Index i) { return w[static_cast<std::size_t>(i)]; }, eps, rng.uniform());
          tr.events.push_back({t, j, redrawn, true});
          ++tr.repair_events;
          j = redrawn;
          continue;
        }
        total = 0.0;
        for (const auto& [i, r] : out) total += r;
        if (total * h <= cap || h <= h_min) break;
        h = std::max(h_min, std::min(0.5 * h, 0.95 * cap / total));
      }
      if (tr.steps >= options.max_steps) throw step_budget(options, t);
      const double u = rng.uniform();
      const double p = jump_probability(total, h, options.exponential_steps);
      if (u < p) {
        const auto [target, frac] = pick_target(out.begin(), out.end(), u / p * total);
        tr.events.push_back({t + frac * h, j, target, false});
        j = target;
      }
      ++tr.steps;
      h_prev = h;
      t = (h == remaining) ? stop : t + h;
    }
  }
  return tr;
}

}  // namespace beable
