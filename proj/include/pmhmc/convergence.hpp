#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "pmhmc/dynamics.hpp"
#include "pmhmc/models.hpp"

namespace pmhmc {

struct MarginalPhase {
  double theta = 0.0;
  double rho = 0.0;
};

/// Exact flow of H(theta, rho) = -log N(theta; m, s^2) + rho^2/2 for the
/// conjugate posterior of a Gaussian model:
///   theta(t) = m + (theta0 - m) cos(t/s) + s rho0 sin(t/s).
/// Throws std::invalid_argument for any other model.
MarginalPhase exact_marginal_flow(const LatentVariableModel& model, MarginalPhase start, double t);

struct FlowExperimentConfig {
  std::vector<std::size_t> Ns{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  std::size_t seeds_per_N = 10;
  std::uint64_t first_seed = 1;
  double t_end = 1.0;
  double dt_fine = 1e-4;
  std::size_t grid_points = 1001;
  GaussianParams params;
  std::size_t T = 30;
  std::uint64_t data_seed = 2017;
  std::size_t threads = 0;  ///< 0: hardware concurrency

  void validate() const;
};

struct FlowErrorSample {
  std::size_t N = 0;
  std::uint64_t seed = 0;
  double sup_error = 0.0;
  bool aborted = false;  ///< integrator abort; excluded from fits
};

/// One pseudo-marginal trajectory next to the exact one on the output grid.
struct FlowFan {
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> theta_hat;
  std::vector<double> theta_exact;
};

/// (theta0, rho0) depend on the seed only, so every N starts from the same
/// marginal point; (u0, p0) ~ N(0, I) depend on (N, seed).
FlowFan flow_trajectory(const GaussianHierarchicalModel& model, std::size_t N, std::uint64_t seed,
                        const FlowExperimentConfig& cfg);

double sup_error(const FlowFan& fan);

/// The data is generated once from cfg.data_seed; cells run concurrently.
/// Results are ordered by (N, seed) regardless of scheduling.
std::vector<FlowErrorSample> flow_error_experiment(const FlowExperimentConfig& cfg,
                                                   const std::function<void(const FlowErrorSample&)>& on_sample = {});

GaussianHierarchicalModel flow_experiment_model(const FlowExperimentConfig& cfg);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<FlowErrorSample> samples;
  std::vector<std::size_t> Ns;        ///< distinct N, ascending
  std::vector<double> median_error;   ///< per entry of Ns
};

/// Least squares of log2(sup_error) on log2(N) over all non-aborted samples.
/// Throws std::invalid_argument with fewer than two distinct N.
SlopeFit fit_slope(const std::vector<FlowErrorSample>& samples);

/// Columns N, seed, sup_error (aborted cells are written as nan).
void write_flow_errors_csv(std::ostream& out, const std::vector<FlowErrorSample>& samples);
/// Columns t, theta_hat, theta_exact.
void write_fan_csv(std::ostream& out, const FlowFan& fan);
void write_slope_summary(std::ostream& out, const SlopeFit& fit);

}  // namespace pmhmc
