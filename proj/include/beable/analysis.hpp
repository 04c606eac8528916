#pragma once

#include <vector>

#include "beable/integrate.hpp"
#include "beable/sampling.hpp"

namespace beable {

/// Empirical occupancy of an ensemble next to the theoretical weights |c_i(t)|^2.
struct OccupancyStats {
  std::vector<double> times;
  std::vector<std::vector<double>> frequencies;  // [time][cell]
  std::vector<std::vector<double>> weights;      // [time][cell]
  std::size_t trajectories = 0;

  /// Largest |frequency - weight| in units of the binomial standard error
  /// sqrt(w (1 - w) / n). Cells with w (1 - w) = 0 count only if they disagree.
  double max_sigma() const;
};

OccupancyStats occupancy_stats(const std::vector<JumpTrajectory>& ensemble, const RateModel& model,
                               const std::vector<double>& times);

/// (1 / (t1 - t0)) integral of values[i(t)] over [t0, t1], exact for the
/// piecewise-constant occupancy. RangeError if the window leaves the trajectory.
double time_average(const JumpTrajectory& trajectory, const CoarseObservable& observable, double t0, double t1);

/// Fraction of [t0, t1] spent in each cell.
std::vector<double> occupation_fractions(const JumpTrajectory& trajectory, Index cells, double t0, double t1);

/// Exact time average of |c_i(t)|^2 over [t0, t0 + horizon] for a
/// time-independent Hamiltonian, from the eigendecomposition.
std::vector<double> averaged_weights(const QuantumSystem& system, const ProjectorFamily& family, double t0,
                                     double horizon);

/// Infinite-time dephasing average sum_n <n|Pi_i|n> |<n|Psi(0)>|^2 (non-degenerate spectrum).
std::vector<double> dephasing_weights(const QuantumSystem& system, const ProjectorFamily& family);

struct EquilibrationReport {
  std::vector<double> averaged;   // time-averaged weights over the horizon
  std::vector<double> dephasing;  // infinite-time oracle
  std::vector<double> target;     // d_i / N
  double max_deviation_target = 0.0;     // max_i |averaged_i - target_i| / target_i
  double max_deviation_dephasing = 0.0;  // max_i |averaged_i - dephasing_i| / dephasing_i
  /// Fraction of sampled (time, cell) pairs more than three temporal standard
  /// deviations away from that cell's sample mean.
  double outlier_fraction = 0.0;
  /// All sampled weights stay within 1e-12 of their initial values.
  bool frozen = false;
};

/// Requires a single time-independent Hamiltonian (ConfigError otherwise).
EquilibrationReport equilibration_check(const QuantumSystem& system, const ProjectorFamily& family, double horizon,
                                        std::size_t samples);

struct DecayFit {
  std::vector<double> times;   // lags T_k
  std::vector<double> metric;  // max_i max_{j,k} |p_{i|j} - p_{i|k}|
  double mu = 0.0;
  double intercept = 0.0;  // log m at T = 0 from the fit
  double residual = 0.0;   // rms of the log-linear residuals
  std::size_t used = 0;    // points above the noise floor
};

/// Integrates p_{i|j}(t_start + T_k, t_start) from every occupied j and fits
/// log m(T) = intercept - mu T on the points above `noise_floor`.
///
/// FitError if fewer than three points clear the floor, if any point exceeds
/// the running minimum by more than 50%, or if mu is not positive.
DecayFit ergodicity_decay(const RateModel& model, double t_start, const std::vector<double>& lags,
                          double noise_floor = 1e-8, const IntegrationOptions& options = {});

/// Fit only, on given data (same rules as ergodicity_decay).
DecayFit fit_decay(std::vector<double> lags, std::vector<double> metric, double noise_floor);

struct DriftVariance {
  std::vector<double> times;
  std::vector<double> mean;      // mean displacement of the occupied cell centre
  std::vector<double> variance;  // its variance
  /// Least-squares slope of mean against time.
  double slope() const;
};

/// Displacement of the occupied cell centre from its start, per time.
/// With ring_length > 0 each jump is unwrapped to the shorter way round.
DriftVariance drift_variance(const std::vector<JumpTrajectory>& ensemble, const std::vector<double>& cell_centers,
                             const std::vector<double>& times, double ring_length = 0.0);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  std::size_t bins = 0;
};

/// Pearson chi-square of integer samples against Binomial(n, p). Bins are
/// pooled from both tails until each expects at least `min_expected` counts.
ChiSquare chi_square_binomial(const std::vector<long>& samples, long n, double p, double min_expected = 5.0);

/// All positive rates T_ij(t) at the given times.
std::vector<double> positive_rates(const RateModel& model, const std::vector<double>& times);

/// q-quantile (0 <= q <= 1) with linear interpolation. RangeError on empty input.
double quantile(std::vector<double> values, double q);

}  // namespace beable
