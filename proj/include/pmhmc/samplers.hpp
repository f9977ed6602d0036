#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pmhmc/dynamics.hpp"
#include "pmhmc/estimator.hpp"
#include "pmhmc/model.hpp"
#include "pmhmc/rng.hpp"

namespace pmhmc {

/// Hard sampler failure: invalid chain state or a degenerate slice bracket.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SamplerKind { pm_hmc, joint_hmc, pm_mh, pm_slice, cis_gibbs };

SamplerKind parse_sampler_kind(std::string_view name);
std::string to_string(SamplerKind kind);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::pm_hmc;
  std::size_t N = 16;  ///< importance samples (joint_hmc always uses 1)
  IntegratorConfig integrator;
  /// Multiply h by U(0.9, 1.1) each iteration. Off by default.
  bool jitter = false;
  /// Pre-run adapting h (L fixed) towards `target_acceptance`; HMC kinds only.
  bool tune_step_size = false;
  double target_acceptance = 0.7;
  /// Random-walk scales (pm_mh: joint proposal; pm_slice, cis_gibbs: per coordinate).
  /// Empty: start from 0.1 and tune by pre-run towards acceptance 0.2-0.3.
  std::vector<double> proposal_scales;
  bool tune_scales = true;
  std::size_t tuning_iterations = 1000;
  /// pm_slice: one ellipse per datum instead of one for the whole u block.
  bool slice_per_datum = false;
  /// cis_gibbs: random-walk sweeps over theta per iteration.
  std::size_t theta_sweeps = 1;
  std::size_t iterations = 1000;  ///< total, burn-in included
  std::size_t burn_in = 0;
  std::uint64_t seed = 1;
  std::size_t progress_every = 0;  ///< 0: no progress lines

  void validate() const;
};

/// One recorded iteration.
///
/// For pseudo-marginal kinds `log_phat` is the estimator value and `hamiltonian`
/// the extended Hamiltonian (HMC kinds) or -log of the extended target without
/// momenta (pm_mh, pm_slice). For cis_gibbs `log_phat` holds log p(y, x | theta)
/// and `hamiltonian` its negative plus the negative log prior.
struct ChainRecord {
  std::size_t iteration = 0;
  Vector theta;
  double log_phat = 0.0;
  double hamiltonian = 0.0;
  bool accepted = false;
  bool burn_in = false;
};

struct Chain {
  SamplerConfig config;
  std::vector<ChainRecord> records;
  std::vector<double> proposal_scales;      ///< scales actually used
  double step_size = 0.0;                   ///< h actually used (HMC kinds)
  std::vector<std::size_t> coordinate_accepts;  ///< per-coordinate MH accepts (pm_slice, cis_gibbs)
  double seconds = 0.0;

  std::size_t dim() const { return records.empty() ? 0 : static_cast<std::size_t>(records.front().theta.size()); }
  /// Post-burn-in values of theta component j.
  std::vector<double> trace(std::size_t j) const;
  double acceptance_rate(bool include_burn_in = false) const;
};

/// State of the pseudo-marginal chains: (theta, u) and the cached estimate.
struct PseudoMarginalState {
  Vector theta;
  AuxiliaryBlock u;
  double log_phat = 0.0;
};

/// State of the Gibbs chain: theta and one latent value per datum.
struct LatentState {
  Vector theta;
  std::vector<double> x;
};

struct StepOutcome {
  bool accepted = false;
  bool aborted = false;
  double acceptance_probability = 0.0;
  double hamiltonian = 0.0;
  std::vector<bool> coordinate_accepted;
};

/// min(1, exp(H - H')), 0 for non-finite H'.
double hmc_acceptance_probability(double h_current, double h_proposed);

/// One PM-HMC iteration: refresh rho and p, integrate with the Strang
/// splitting, accept with probability min(1, exp(H - H')). An aborted
/// trajectory is a rejection. Throws SamplerError if p_hat = 0 at `current`.
StepOutcome pm_hmc_step(const LatentVariableModel& model, PseudoMarginalState& current, const IntegratorConfig& cfg,
                        Rng& rng, bool jitter = false);

/// Standard HMC over the joint non-centred (theta, u) space (N = 1), leapfrog integrator.
StepOutcome joint_hmc_step(const LatentVariableModel& model, PseudoMarginalState& current, const IntegratorConfig& cfg,
                           Rng& rng, bool jitter = false);

/// log of [p(theta') p_hat'] / [p(theta) p_hat] for a symmetric proposal; -inf when p_hat' = 0.
double pm_mh_log_ratio(const LatentVariableModel& model, const PseudoMarginalState& current, const Vector& theta_prop,
                       double log_phat_prop);

/// Gaussian random-walk proposal with per-coordinate `scales` and fresh u ~ N(0, I).
StepOutcome pm_mh_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& scales, Rng& rng);

/// Same with an explicit proposal (test hook).
StepOutcome pm_mh_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& theta_prop,
                       const AuxiliaryBlock& u_prop, Rng& rng);

/// Elliptical slice update of u targeting p_hat(y | theta, u) N(u; 0, I).
/// Throws SamplerError after 1000 shrinkage steps. Returns the number of
/// likelihood evaluations.
std::size_t elliptical_slice_u(const LatentVariableModel& model, PseudoMarginalState& current, Rng& rng,
                               bool per_datum = false);

/// Elliptical slice update of u followed by one random-walk MH update per theta coordinate.
StepOutcome pm_slice_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& scales,
                          Rng& rng, bool per_datum = false);

/// Selection probabilities of one conditional importance sampling update for
/// datum k: entry 0 is the retained value, entries 1..N the fresh draws.
std::vector<double> cis_selection_probabilities(const LatentVariableModel& model, const Vector& theta, std::size_t k,
                                                const std::vector<double>& candidates);

/// Conditional importance sampling of each x_k (N fresh draws from f_theta
/// competing with the retained value), then random-walk MH over theta given x.
StepOutcome cis_gibbs_step(const LatentVariableModel& model, LatentState& current, std::size_t N,
                           const Vector& scales, Rng& rng, std::size_t theta_sweeps = 1);

/// log p(theta) + sum_k [log f_theta(x_k) + log g_theta(y_k | x_k)].
double latent_log_joint(const LatentVariableModel& model, const Vector& theta, const std::vector<double>& x);

/// Draws u ~ N(0, I) until p_hat > 0 (at most 100 tries).
PseudoMarginalState initial_pm_state(const LatentVariableModel& model, const Vector& theta, std::size_t N, Rng& rng);

/// Random-walk scale pre-run (fresh chain from `theta0`); returns the tuned scales.
std::vector<double> tune_proposal_scales(const LatentVariableModel& model, const SamplerConfig& cfg,
                                         const Vector& theta0);

/// Step-size pre-run for the HMC kinds; returns the tuned h.
double tune_step_size(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0);

/// Runs one chain from `theta0`. Deterministic given cfg.seed. Writes progress
/// lines to `progress` every cfg.progress_every iterations when non-null.
Chain run_chain(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0,
                std::ostream* progress = nullptr);

/// Independent chains with seeds cfg.seed + c, run concurrently.
std::vector<Chain> run_chains(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0,
                              std::size_t count);

/// Columns: iter, theta_0..theta_{d-1}, log_phat, hamiltonian, accepted.
void write_chain_csv(std::ostream& out, const Chain& chain);
/// Reads a chain CSV; records with iteration < burn_in are flagged as burn-in.
Chain read_chain_csv(std::istream& in, std::size_t burn_in = 0);

/// Acceptance rate, tuned scales or step size, per-parameter mean and sd (post burn-in).
/// Contains no timing, so it is reproducible.
void write_summary(std::ostream& out, const Chain& chain, const std::vector<std::string>& names = {});

}  // namespace pmhmc
