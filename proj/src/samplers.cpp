#include "pmhmc/samplers.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace pmhmc {

namespace {

constexpr std::uint64_t kTuneScalesStream = 0x7e5;
constexpr std::uint64_t kTuneStepStream = 0x7e6;
constexpr std::size_t kMaxSliceShrinks = 1000;

bool uses_scales(SamplerKind k) {
  return k == SamplerKind::pm_mh || k == SamplerKind::pm_slice || k == SamplerKind::cis_gibbs;
}
bool is_hmc(SamplerKind k) { return k == SamplerKind::pm_hmc || k == SamplerKind::joint_hmc; }

std::size_t effective_N(const SamplerConfig& cfg) { return cfg.kind == SamplerKind::joint_hmc ? 1 : cfg.N; }

Vector standard_normal(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

Vector scales_vector(const std::vector<double>& scales, std::size_t d) {
  if (scales.empty()) return Vector::Constant(static_cast<Eigen::Index>(d), 0.1);
  if (scales.size() == 1) return Vector::Constant(static_cast<Eigen::Index>(d), scales[0]);
  if (scales.size() != d) throw std::invalid_argument("proposal_scales must have one entry or one per theta coordinate");
  return Eigen::Map<const Vector>(scales.data(), static_cast<Eigen::Index>(d));
}

double extended_potential(const LatentVariableModel& model, const PseudoMarginalState& s) {
  return -model.prior_logpdf(s.theta) - s.log_phat + 0.5 * s.u.squared_norm();
}

StepOutcome mh_accept(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& theta_prop,
                      const AuxiliaryBlock& u_prop, double log_phat_prop, Rng& rng) {
  StepOutcome out;
  const double log_ratio = pm_mh_log_ratio(model, current, theta_prop, log_phat_prop);
  out.acceptance_probability = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  if (std::log(rng.uniform_pos()) < log_ratio) {
    current.theta = theta_prop;
    current.u = u_prop;
    current.log_phat = log_phat_prop;
    out.accepted = true;
  }
  out.hamiltonian = -model.prior_logpdf(current.theta) - current.log_phat;
  return out;
}

LatentState initial_latent_state(const LatentVariableModel& model, const Vector& theta, Rng& rng) {
  LatentState s{theta, std::vector<double>(model.data_count())};
  for (std::size_t k = 0; k < s.x.size(); ++k) s.x[k] = model.draw_latent(theta, k, rng);
  return s;
}

}  // namespace

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "pm_hmc") return SamplerKind::pm_hmc;
  if (name == "joint_hmc") return SamplerKind::joint_hmc;
  if (name == "pm_mh") return SamplerKind::pm_mh;
  if (name == "pm_slice") return SamplerKind::pm_slice;
  if (name == "cis_gibbs") return SamplerKind::cis_gibbs;
  throw std::invalid_argument("unknown sampler kind '" + std::string(name) + "'");
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::pm_hmc: return "pm_hmc";
    case SamplerKind::joint_hmc: return "joint_hmc";
    case SamplerKind::pm_mh: return "pm_mh";
    case SamplerKind::pm_slice: return "pm_slice";
    case SamplerKind::cis_gibbs: return "cis_gibbs";
  }
  return "unknown";
}

void SamplerConfig::validate() const {
  if (N < 1) throw std::invalid_argument("sampler: N must be at least 1");
  if (iterations > 0 && !(iterations > burn_in))
    throw std::invalid_argument("sampler: iterations must exceed burn_in");
  if (is_hmc(kind)) integrator.validate();
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw std::invalid_argument("sampler: target acceptance must lie in (0, 1)");
  for (double s : proposal_scales)
    if (!(s > 0.0)) throw std::invalid_argument("sampler: proposal scales must be positive");
  if (theta_sweeps < 1) throw std::invalid_argument("sampler: theta_sweeps must be at least 1");
}

std::vector<double> Chain::trace(std::size_t j) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (!r.burn_in) out.push_back(r.theta[static_cast<Eigen::Index>(j)]);
  return out;
}

double Chain::acceptance_rate(bool include_burn_in) const {
  std::size_t n = 0, a = 0;
  for (const auto& r : records) {
    if (r.burn_in && !include_burn_in) continue;
    ++n;
    a += r.accepted ? 1 : 0;
  }
  return n ? static_cast<double>(a) / static_cast<double>(n) : 0.0;
}

double hmc_acceptance_probability(double h_current, double h_proposed) {
  if (!std::isfinite(h_proposed)) return 0.0;
  const double delta = h_current - h_proposed;
  return delta >= 0.0 ? 1.0 : std::exp(delta);
}

StepOutcome pm_hmc_step(const LatentVariableModel& model, PseudoMarginalState& current, const IntegratorConfig& cfg,
                        Rng& rng, bool jitter) {
  if (!std::isfinite(current.log_phat)) throw SamplerError("pm_hmc_step: likelihood estimate is zero at the current state");
  const auto d = current.theta.size();
  ExtendedState s{current.theta, standard_normal(d, rng), current.u, AuxiliaryBlock(current.u.shape())};
  for (Eigen::Index i = 0; i < s.p.flat().size(); ++i) s.p.flat()[i] = rng.normal();

  const double h0 = hamiltonian_from_log_phat(model, s, current.log_phat).total;
  IntegratorConfig run = cfg;
  if (jitter) run.h *= 0.9 + 0.2 * rng.uniform();
  TrajectoryResult traj = strang_trajectory(model, std::move(s), run);

  StepOutcome out;
  out.hamiltonian = h0;
  const double log_u = std::log(rng.uniform_pos());
  if (traj.aborted) {
    out.aborted = true;
    return out;
  }
  const EstimatorEvaluation e = evaluate(model, traj.state.theta, traj.state.u, false);
  if (e.zero_estimate) return out;
  const double h1 = hamiltonian_from_log_phat(model, traj.state, e.log_phat).total;
  out.acceptance_probability = hmc_acceptance_probability(h0, h1);
  if (log_u < h0 - h1) {
    current.theta = std::move(traj.state.theta);
    current.u = std::move(traj.state.u);
    current.log_phat = e.log_phat;
    out.accepted = true;
    out.hamiltonian = h1;
  }
  return out;
}

StepOutcome joint_hmc_step(const LatentVariableModel& model, PseudoMarginalState& current, const IntegratorConfig& cfg,
                           Rng& rng, bool jitter) {
  if (current.u.shape().samples != 1) throw std::invalid_argument("joint_hmc_step: requires N = 1");
  if (!std::isfinite(current.log_phat)) throw SamplerError("joint_hmc_step: zero density at the current state");
  const JointSpaceTarget target(model);
  const auto d = current.theta.size();
  PhasePoint start;
  start.q.resize(static_cast<Eigen::Index>(target.dim()));
  start.q.head(d) = current.theta;
  start.q.tail(start.q.size() - d) = current.u.flat();
  start.momentum = standard_normal(start.q.size(), rng);

  const double lp0 = model.prior_logpdf(current.theta) + current.log_phat - 0.5 * current.u.squared_norm();
  const double h0 = -lp0 + 0.5 * start.momentum.squaredNorm();
  double h = cfg.h;
  if (jitter) h *= 0.9 + 0.2 * rng.uniform();
  LeapfrogResult traj = leapfrog_trajectory(target, std::move(start), h, cfg.L);

  StepOutcome out;
  out.hamiltonian = h0;
  const double log_u = std::log(rng.uniform_pos());
  if (traj.aborted) {
    out.aborted = true;
    return out;
  }
  const double lp1 = target.log_density(traj.point.q, nullptr);
  const double h1 = -lp1 + 0.5 * traj.point.momentum.squaredNorm();
  out.acceptance_probability = hmc_acceptance_probability(h0, h1);
  if (log_u < h0 - h1) {
    current.theta = traj.point.q.head(d);
    current.u.flat() = traj.point.q.tail(traj.point.q.size() - d);
    current.log_phat = evaluate(model, current.theta, current.u, false).log_phat;
    out.accepted = true;
    out.hamiltonian = h1;
  }
  return out;
}

double pm_mh_log_ratio(const LatentVariableModel& model, const PseudoMarginalState& current, const Vector& theta_prop,
                       double log_phat_prop) {
  if (log_phat_prop == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  return model.prior_logpdf(theta_prop) + log_phat_prop - model.prior_logpdf(current.theta) - current.log_phat;
}

StepOutcome pm_mh_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& scales, Rng& rng) {
  const Vector theta_prop = current.theta + scales.cwiseProduct(standard_normal(current.theta.size(), rng));
  const AuxiliaryBlock u_prop = AuxiliaryBlock::standard_normal(current.u.shape(), rng);
  const double lp = evaluate(model, theta_prop, u_prop, false).log_phat;
  return mh_accept(model, current, theta_prop, u_prop, lp, rng);
}

StepOutcome pm_mh_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& theta_prop,
                       const AuxiliaryBlock& u_prop, Rng& rng) {
  const double lp = evaluate(model, theta_prop, u_prop, false).log_phat;
  return mh_accept(model, current, theta_prop, u_prop, lp, rng);
}

std::size_t elliptical_slice_u(const LatentVariableModel& model, PseudoMarginalState& current, Rng& rng,
                               bool per_datum) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::size_t evals = 0;
  if (!per_datum) {
    const AuxiliaryBlock nu = AuxiliaryBlock::standard_normal(current.u.shape(), rng);
    const double log_y = current.log_phat + std::log(rng.uniform_pos());
    double phi = kTwoPi * rng.uniform();
    double lo = phi - kTwoPi;
    double hi = phi;
    AuxiliaryBlock prop(current.u.shape());
    for (std::size_t it = 0; it < kMaxSliceShrinks; ++it) {
      prop.flat() = std::cos(phi) * current.u.flat() + std::sin(phi) * nu.flat();
      const double lp = evaluate(model, current.theta, prop, false).log_phat;
      ++evals;
      if (lp > log_y) {
        current.u = std::move(prop);
        current.log_phat = lp;
        return evals;
      }
      (phi < 0.0 ? lo : hi) = phi;
      phi = lo + (hi - lo) * rng.uniform();
    }
    throw SamplerError("elliptical slice sampling: bracket shrank 1000 times without acceptance");
  }

  const AuxShape& shape = current.u.shape();
  const auto block = static_cast<Eigen::Index>(shape.datum_size());
  Vector per = evaluate(model, current.theta, current.u, false).per_datum_log;
  for (std::size_t k = 0; k < shape.data_count; ++k) {
    const Vector u0 = current.u.datum(k).reshaped();
    const Vector nu = standard_normal(block, rng);
    const double log_y = per[static_cast<Eigen::Index>(k)] + std::log(rng.uniform_pos());
    double phi = kTwoPi * rng.uniform();
    double lo = phi - kTwoPi;
    double hi = phi;
    bool done = false;
    for (std::size_t it = 0; it < kMaxSliceShrinks && !done; ++it) {
      current.u.datum(k).reshaped() = std::cos(phi) * u0 + std::sin(phi) * nu;
      const double lp = evaluate_datum(model, current.theta, current.u, k);
      ++evals;
      if (lp > log_y) {
        per[static_cast<Eigen::Index>(k)] = lp;
        done = true;
        break;
      }
      (phi < 0.0 ? lo : hi) = phi;
      phi = lo + (hi - lo) * rng.uniform();
    }
    if (!done) throw SamplerError("elliptical slice sampling: bracket shrank 1000 times without acceptance");
  }
  current.log_phat = per.sum();
  return evals;
}

StepOutcome pm_slice_step(const LatentVariableModel& model, PseudoMarginalState& current, const Vector& scales,
                          Rng& rng, bool per_datum) {
  if (!std::isfinite(current.log_phat)) throw SamplerError("pm_slice_step: likelihood estimate is zero at the current state");
  elliptical_slice_u(model, current, rng, per_datum);
  StepOutcome out;
  const auto d = current.theta.size();
  out.coordinate_accepted.assign(static_cast<std::size_t>(d), false);
  double prob_sum = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector theta_prop = current.theta;
    theta_prop[j] += scales[j] * rng.normal();
    const double lp = evaluate(model, theta_prop, current.u, false).log_phat;
    const double log_ratio = pm_mh_log_ratio(model, current, theta_prop, lp);
    prob_sum += log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (std::log(rng.uniform_pos()) < log_ratio) {
      current.theta = std::move(theta_prop);
      current.log_phat = lp;
      out.coordinate_accepted[static_cast<std::size_t>(j)] = true;
      out.accepted = true;
    }
  }
  out.acceptance_probability = d ? prob_sum / static_cast<double>(d) : 1.0;
  out.hamiltonian = extended_potential(model, current);
  return out;
}

std::vector<double> cis_selection_probabilities(const LatentVariableModel& model, const Vector& theta, std::size_t k,
                                                const std::vector<double>& candidates) {
  std::vector<double> w(candidates.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w[i] = model.observation_logpdf(theta, k, candidates[i]);
    m = std::max(m, w[i]);
  }
  if (m == -std::numeric_limits<double>::infinity()) {
    // Only possible if the retained value itself has zero density; keep it.
    std::fill(w.begin(), w.end(), 0.0);
    w[0] = 1.0;
    return w;
  }
  double s = 0.0;
  for (double& v : w) s += (v = std::exp(v - m));
  for (double& v : w) v /= s;
  return w;
}

double latent_log_joint(const LatentVariableModel& model, const Vector& theta, const std::vector<double>& x) {
  double total = model.prior_logpdf(theta);
  for (std::size_t k = 0; k < x.size(); ++k)
    total += model.latent_logpdf(theta, x[k]) + model.observation_logpdf(theta, k, x[k]);
  return total;
}

StepOutcome cis_gibbs_step(const LatentVariableModel& model, LatentState& current, std::size_t N, const Vector& scales,
                           Rng& rng, std::size_t theta_sweeps) {
  std::vector<double> candidates(N + 1);
  for (std::size_t k = 0; k < current.x.size(); ++k) {
    candidates[0] = current.x[k];
    for (std::size_t i = 1; i <= N; ++i) candidates[i] = model.draw_latent(current.theta, k, rng);
    const std::vector<double> probs = cis_selection_probabilities(model, current.theta, k, candidates);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = probs.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
    current.x[k] = candidates[pick];
  }

  StepOutcome out;
  const auto d = current.theta.size();
  out.coordinate_accepted.assign(static_cast<std::size_t>(d), false);
  double lj = latent_log_joint(model, current.theta, current.x);
  double prob_sum = 0.0;
  for (std::size_t sweep = 0; sweep < theta_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector theta_prop = current.theta;
      theta_prop[j] += scales[j] * rng.normal();
      const double lj_prop = latent_log_joint(model, theta_prop, current.x);
      const double log_ratio = std::isnan(lj_prop) ? -std::numeric_limits<double>::infinity() : lj_prop - lj;
      prob_sum += log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      if (std::log(rng.uniform_pos()) < log_ratio) {
        current.theta = std::move(theta_prop);
        lj = lj_prop;
        out.coordinate_accepted[static_cast<std::size_t>(j)] = true;
        out.accepted = true;
      }
    }
  }
  out.acceptance_probability = d ? prob_sum / static_cast<double>(d * theta_sweeps) : 1.0;
  out.hamiltonian = -lj;
  return out;
}

PseudoMarginalState initial_pm_state(const LatentVariableModel& model, const Vector& theta, std::size_t N, Rng& rng) {
  if (static_cast<std::size_t>(theta.size()) != model.dim_theta())
    throw std::invalid_argument("initial theta has the wrong dimension");
  const AuxShape shape{model.data_count(), N, model.latent_dim()};
  for (int attempt = 0; attempt < 100; ++attempt) {
    PseudoMarginalState s{theta, AuxiliaryBlock::standard_normal(shape, rng), 0.0};
    s.log_phat = evaluate(model, s.theta, s.u, false).log_phat;
    if (std::isfinite(s.log_phat)) return s;
  }
  throw SamplerError("could not find auxiliary variables with a positive likelihood estimate at the initial theta");
}

std::vector<double> tune_proposal_scales(const LatentVariableModel& model, const SamplerConfig& cfg,
                                         const Vector& theta0) {
  const std::size_t d = model.dim_theta();
  Vector scales = scales_vector(cfg.proposal_scales, d);
  if (!uses_scales(cfg.kind)) return {scales.data(), scales.data() + scales.size()};
  Rng rng(cfg.seed, kTuneScalesStream);
  constexpr std::size_t kBatch = 50;
  constexpr double kTarget = 0.25;
  const std::size_t rounds = std::max<std::size_t>(1, cfg.tuning_iterations / kBatch);

  PseudoMarginalState pm;
  LatentState ls;
  if (cfg.kind == SamplerKind::cis_gibbs)
    ls = initial_latent_state(model, theta0, rng);
  else
    pm = initial_pm_state(model, theta0, cfg.N, rng);

  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> accepts(d, 0.0);
    for (std::size_t it = 0; it < kBatch; ++it) {
      StepOutcome o;
      switch (cfg.kind) {
        case SamplerKind::pm_mh:
          o = pm_mh_step(model, pm, scales, rng);
          for (auto& a : accepts) a += o.accepted ? 1.0 : 0.0;
          break;
        case SamplerKind::pm_slice:
          o = pm_slice_step(model, pm, scales, rng, cfg.slice_per_datum);
          for (std::size_t j = 0; j < d; ++j) accepts[j] += o.coordinate_accepted[j] ? 1.0 : 0.0;
          break;
        default:
          o = cis_gibbs_step(model, ls, cfg.N, scales, rng, cfg.theta_sweeps);
          for (std::size_t j = 0; j < d; ++j) accepts[j] += o.coordinate_accepted[j] ? 1.0 : 0.0;
          break;
      }
    }
    const double gain = 3.0 / std::sqrt(static_cast<double>(r) + 1.0);
    const double sweeps = cfg.kind == SamplerKind::cis_gibbs ? static_cast<double>(cfg.theta_sweeps) : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      // pm_slice/cis_gibbs count at most one accept per coordinate per iteration
      const double rate = accepts[j] / static_cast<double>(kBatch);
      const double per_update = cfg.kind == SamplerKind::cis_gibbs ? 1.0 - std::pow(1.0 - rate, 1.0 / sweeps) : rate;
      scales[static_cast<Eigen::Index>(j)] *= std::exp(gain * (per_update - kTarget));
    }
  }
  return {scales.data(), scales.data() + scales.size()};
}

double tune_step_size(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0) {
  if (!is_hmc(cfg.kind)) return cfg.integrator.h;
  Rng rng(cfg.seed, kTuneStepStream);
  PseudoMarginalState pm = initial_pm_state(model, theta0, effective_N(cfg), rng);
  IntegratorConfig ic = cfg.integrator;
  constexpr std::size_t kBatch = 20;
  const std::size_t rounds = std::max<std::size_t>(1, cfg.tuning_iterations / kBatch);
  double log_h = std::log(ic.h);
  for (std::size_t r = 0; r < rounds; ++r) {
    double mean_prob = 0.0;
    ic.h = std::exp(log_h);
    for (std::size_t it = 0; it < kBatch; ++it) {
      const StepOutcome o = cfg.kind == SamplerKind::pm_hmc ? pm_hmc_step(model, pm, ic, rng, cfg.jitter)
                                                            : joint_hmc_step(model, pm, ic, rng, cfg.jitter);
      mean_prob += o.acceptance_probability / static_cast<double>(kBatch);
    }
    log_h += 2.0 / std::sqrt(static_cast<double>(r) + 1.0) * (mean_prob - cfg.target_acceptance);
  }
  return std::exp(log_h);
}

Chain run_chain(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0,
                std::ostream* progress) {
  cfg.validate();
  Chain chain;
  chain.config = cfg;
  if (cfg.iterations == 0) return chain;
  const std::size_t d = model.dim_theta();
  if (static_cast<std::size_t>(theta0.size()) != d) throw std::invalid_argument("run_chain: initial theta has the wrong dimension");

  const auto t0 = std::chrono::steady_clock::now();
  Vector scales = scales_vector(cfg.proposal_scales, d);
  if (uses_scales(cfg.kind) && cfg.tune_scales) {
    const auto tuned = tune_proposal_scales(model, cfg, theta0);
    scales = Eigen::Map<const Vector>(tuned.data(), static_cast<Eigen::Index>(tuned.size()));
  }
  chain.proposal_scales.assign(scales.data(), scales.data() + scales.size());
  IntegratorConfig ic = cfg.integrator;
  if (is_hmc(cfg.kind) && cfg.tune_step_size) ic.h = tune_step_size(model, cfg, theta0);
  chain.step_size = ic.h;
  chain.coordinate_accepts.assign(d, 0);

  Rng rng(cfg.seed, 0);
  PseudoMarginalState pm;
  LatentState ls;
  if (cfg.kind == SamplerKind::cis_gibbs)
    ls = initial_latent_state(model, theta0, rng);
  else
    pm = initial_pm_state(model, theta0, effective_N(cfg), rng);

  chain.records.reserve(cfg.iterations);
  std::size_t accepted = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    StepOutcome o;
    switch (cfg.kind) {
      case SamplerKind::pm_hmc: o = pm_hmc_step(model, pm, ic, rng, cfg.jitter); break;
      case SamplerKind::joint_hmc: o = joint_hmc_step(model, pm, ic, rng, cfg.jitter); break;
      case SamplerKind::pm_mh: o = pm_mh_step(model, pm, scales, rng); break;
      case SamplerKind::pm_slice: o = pm_slice_step(model, pm, scales, rng, cfg.slice_per_datum); break;
      case SamplerKind::cis_gibbs: o = cis_gibbs_step(model, ls, cfg.N, scales, rng, cfg.theta_sweeps); break;
    }
    for (std::size_t j = 0; j < o.coordinate_accepted.size(); ++j) chain.coordinate_accepts[j] += o.coordinate_accepted[j];
    accepted += o.accepted ? 1 : 0;
    ChainRecord rec;
    rec.iteration = it;
    rec.accepted = o.accepted;
    rec.hamiltonian = o.hamiltonian;
    rec.burn_in = it < cfg.burn_in;
    if (cfg.kind == SamplerKind::cis_gibbs) {
      rec.theta = ls.theta;
      rec.log_phat = -o.hamiltonian - model.prior_logpdf(ls.theta);
    } else {
      rec.theta = pm.theta;
      rec.log_phat = pm.log_phat;
    }
    chain.records.push_back(std::move(rec));
    if (progress && cfg.progress_every && (it + 1) % cfg.progress_every == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *progress << "[" << to_string(cfg.kind) << "] iteration " << (it + 1) << "/" << cfg.iterations
                << "  acceptance " << std::fixed << std::setprecision(3)
                << static_cast<double>(accepted) / static_cast<double>(it + 1) << "  elapsed " << std::setprecision(1)
                << secs << "s" << std::defaultfloat << '\n';
    }
  }
  chain.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return chain;
}

std::vector<Chain> run_chains(const LatentVariableModel& model, const SamplerConfig& cfg, const Vector& theta0,
                              std::size_t count) {
  std::vector<std::future<Chain>> futures;
  futures.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    SamplerConfig local = cfg;
    local.seed = cfg.seed + c;
    futures.push_back(std::async(std::launch::async, [&model, local, &theta0] { return run_chain(model, local, theta0); }));
  }
  std::vector<Chain> out;
  out.reserve(count);
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

void write_chain_csv(std::ostream& out, const Chain& chain) {
  const std::size_t d = chain.dim();
  out << std::setprecision(17) << "iter";
  for (std::size_t j = 0; j < d; ++j) out << ",theta_" << j;
  out << ",log_phat,hamiltonian,accepted\n";
  for (const auto& r : chain.records) {
    out << r.iteration;
    for (Eigen::Index j = 0; j < r.theta.size(); ++j) out << ',' << r.theta[j];
    out << ',' << r.log_phat << ',' << r.hamiltonian << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

Chain read_chain_csv(std::istream& in, std::size_t burn_in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("chain CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 4 || header.front() != "iter" || header[header.size() - 3] != "log_phat" ||
      header[header.size() - 2] != "hamiltonian" || header.back() != "accepted")
    throw std::invalid_argument("chain CSV: unexpected header");
  const std::size_t d = header.size() - 4;
  Chain chain;
  chain.config.burn_in = burn_in;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::invalid_argument("chain CSV: ragged row");
    ChainRecord r;
    try {
      r.iteration = static_cast<std::size_t>(std::stoull(cells[0]));
      r.theta.resize(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) r.theta[static_cast<Eigen::Index>(j)] = std::stod(cells[1 + j]);
      r.log_phat = std::stod(cells[d + 1]);
      r.hamiltonian = std::stod(cells[d + 2]);
      r.accepted = std::stoi(cells[d + 3]) != 0;
    } catch (const std::logic_error&) {
      throw std::invalid_argument("chain CSV: malformed value in row '" + line + "'");
    }
    r.burn_in = r.iteration < burn_in;
    chain.records.push_back(std::move(r));
  }
  chain.config.iterations = chain.records.size();
  return chain;
}

void write_summary(std::ostream& out, const Chain& chain, const std::vector<std::string>& names) {
  const std::size_t d = chain.dim();
  std::size_t kept = 0;
  for (const auto& r : chain.records) kept += r.burn_in ? 0 : 1;
  out << "sampler            " << to_string(chain.config.kind) << '\n';
  out << "iterations         " << chain.records.size() << " (" << kept << " after burn-in)\n";
  out << "acceptance rate    " << std::fixed << std::setprecision(4) << chain.acceptance_rate() << '\n';
  if (!chain.proposal_scales.empty() && chain.config.kind != SamplerKind::pm_hmc &&
      chain.config.kind != SamplerKind::joint_hmc) {
    out << "proposal scales   ";
    for (double v : chain.proposal_scales) out << ' ' << std::setprecision(4) << v;
    out << '\n';
  }
  if (chain.config.kind == SamplerKind::pm_hmc || chain.config.kind == SamplerKind::joint_hmc)
    out << "step size          " << std::setprecision(6) << chain.step_size << '\n';
  out << std::defaultfloat;
  out << std::left << std::setw(12) << "parameter" << std::right << std::setw(16) << "mean" << std::setw(16) << "sd"
      << '\n';
  for (std::size_t j = 0; j < d; ++j) {
    const auto tr = chain.trace(j);
    double mean = 0.0, var = 0.0;
    for (double v : tr) mean += v;
    mean /= std::max<std::size_t>(tr.size(), 1);
    for (double v : tr) var += (v - mean) * (v - mean);
    var /= std::max<std::size_t>(tr.size(), 2) - 1;
    const std::string name = j < names.size() ? names[j] : "theta_" + std::to_string(j);
    out << std::left << std::setw(12) << name << std::right << std::setprecision(6) << std::setw(16) << mean
        << std::setw(16) << std::sqrt(var) << '\n';
  }
}

}  // namespace pmhmc
