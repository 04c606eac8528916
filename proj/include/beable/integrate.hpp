#pragma once

#include <vector>

#include "beable/rates.hpp"

namespace beable {

struct IntegrationOptions {
  double max_step = 0.01;
  /// Accepted local error per unit time (step-doubling estimate, max norm).
  double tolerance = 1e-9;
  /// Largest accepted renormalization drift per unit time.
  double drift_limit = 1e-6;
  double min_step = 1e-13;
};

/// p(i, j) = p_{i|j}(t_to, t_from), column-stochastic.
struct IntegratedProbabilities {
  double t_from = 0.0;
  double t_to = 0.0;
  RMatrix p;
  double drift = 0.0;
  std::size_t steps = 0;

  double operator()(Index i, Index j) const { return p(i, j); }
  Index count() const noexcept { return p.rows(); }
};

/// Solves dP/dt = Q(t) P with P(t_from) = 1 by classical Runge-Kutta with
/// step doubling and Richardson extrapolation. Rates are refreshed from the exactly propagated state at every
/// stage. Steps never straddle Hamiltonian breakpoints.
///
/// Throws NumericalError if the column renormalization drift exceeds the limit.
IntegratedProbabilities integrated_probabilities(const RateModel& model, double t_from, double t_to,
                                                 const IntegrationOptions& options = {});

/// One result per probe time (sorted, each > t_from), sharing a single integration.
std::vector<IntegratedProbabilities> integrated_probabilities(const RateModel& model, double t_from,
                                                              const std::vector<double>& probe_times,
                                                              const IntegrationOptions& options = {});

IntegratedProbabilities integrated_probabilities(const QuantumSystem& system, const ProjectorFamily& family,
                                                 double t_from, double t_to, double dt);

}  // namespace beable
