#include "pmhmc/dynamics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pmhmc {

void IntegratorConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("integrator: step size h must be positive");
  if (L < 1) throw std::invalid_argument("integrator: L must be at least 1");
}

double kinetic_part(const ExtendedState& state) {
  return 0.5 * (state.rho.squaredNorm() + state.u.squared_norm() + state.p.squared_norm());
}

HamiltonianValue hamiltonian_from_log_phat(const LatentVariableModel& model, const ExtendedState& state,
                                           double log_phat) {
  HamiltonianValue h;
  h.kinetic = kinetic_part(state);
  h.potential = -model.prior_logpdf(state.theta) - log_phat;
  h.total = h.potential + h.kinetic;
  return h;
}

HamiltonianValue extended_hamiltonian(const LatentVariableModel& model, const ExtendedState& state) {
  state.check_consistent();
  if (static_cast<std::size_t>(state.theta.size()) != model.dim_theta())
    throw std::invalid_argument("extended_hamiltonian: theta dimension does not match the model");
  const EstimatorEvaluation e = evaluate(model, state.theta, state.u, false);
  return hamiltonian_from_log_phat(model, state, e.log_phat);
}

void apply_flow_A(ExtendedState& state, double t) {
  state.theta += t * state.rho;
  const double c = std::cos(t);
  const double s = std::sin(t);
  Vector& u = state.u.flat();
  Vector& p = state.p.flat();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double u0 = u[i];
    const double p0 = p[i];
    u[i] = p0 * s + u0 * c;
    p[i] = p0 * c - u0 * s;
  }
}

ExtendedState flow_A(const ExtendedState& state, double t) {
  ExtendedState out = state;
  apply_flow_A(out, t);
  return out;
}

void apply_flow_B(const LatentVariableModel& model, ExtendedState& state, double t, const EstimatorEvaluation& eval) {
  state.rho += t * (model.prior_grad(state.theta) + eval.grad_theta);
  state.p.flat() += t * eval.grad_u.flat();
}

FlowBResult flow_B(const LatentVariableModel& model, const ExtendedState& state, double t) {
  FlowBResult r{state, false};
  const EstimatorEvaluation e = evaluate(model, state.theta, state.u, true);
  if (e.zero_estimate) {
    r.refused = true;
    return r;
  }
  apply_flow_B(model, r.state, t, e);
  return r;
}

bool strang_step(const LatentVariableModel& model, ExtendedState& state, double h) {
  apply_flow_A(state, 0.5 * h);
  const EstimatorEvaluation e = evaluate(model, state.theta, state.u, true);
  if (e.zero_estimate || !e.grad_theta.allFinite() || !e.grad_u.all_finite()) return false;
  apply_flow_B(model, state, h, e);
  apply_flow_A(state, 0.5 * h);
  return true;
}

TrajectoryResult strang_trajectory(const LatentVariableModel& model, ExtendedState state, const IntegratorConfig& cfg,
                                   const TrajectoryObserver& observer) {
  cfg.validate();
  state.check_consistent();
  TrajectoryResult r;
  for (std::size_t step = 1; step <= cfg.L; ++step) {
    ++r.gradient_evaluations;
    if (!strang_step(model, state, cfg.h)) {
      r.aborted = true;
      break;
    }
    if (observer) observer(step, state);
  }
  r.state = std::move(state);
  return r;
}

double JointSpaceTarget::log_density(const Vector& q, Vector* grad) const {
  const auto d = static_cast<Eigen::Index>(model_.dim_theta());
  const std::size_t T = model_.data_count();
  const std::size_t p = model_.latent_dim();
  if (static_cast<std::size_t>(q.size()) != dim()) throw std::invalid_argument("JointSpaceTarget: wrong dimension");
  const Vector theta = q.head(d);
  const AuxiliaryBlock u(AuxShape{T, 1, p}, q.tail(q.size() - d));
  const EstimatorEvaluation e = evaluate(model_, theta, u, grad != nullptr);
  if (e.zero_estimate) return -std::numeric_limits<double>::infinity();
  const double value = model_.prior_logpdf(theta) + e.log_phat - 0.5 * u.squared_norm();
  if (grad) {
    grad->resize(q.size());
    grad->head(d) = model_.prior_grad(theta) + e.grad_theta;
    grad->tail(q.size() - d) = e.grad_u.flat() - u.flat();
  }
  return value;
}

LeapfrogResult leapfrog_trajectory(const DifferentiableTarget& target, PhasePoint start, double h, std::size_t L) {
  LeapfrogResult r{std::move(start), false};
  Vector& q = r.point.q;
  Vector& m = r.point.momentum;
  Vector grad;
  for (std::size_t step = 0; step < L; ++step) {
    q += 0.5 * h * m;
    const double lp = target.log_density(q, &grad);
    if (!std::isfinite(lp) || !grad.allFinite()) {
      r.aborted = true;
      return r;
    }
    m += h * grad;
    q += 0.5 * h * m;
  }
  return r;
}

LeapfrogResult leapfrog_trajectory(const DifferentiableTarget& target, PhasePoint start, const IntegratorConfig& cfg) {
  cfg.validate();
  return leapfrog_trajectory(target, std::move(start), cfg.h, cfg.L);
}

FlatField extended_field(const LatentVariableModel& model, const ExtendedState& layout, ThetaScore score) {
  ExtendedState scratch = layout;
  return [&model, scratch, score = std::move(score)](const Vector& y, Vector& dydt) mutable {
    scratch.unpack(y);
    const Eigen::Index d = scratch.theta.size();
    const auto D = static_cast<Eigen::Index>(scratch.u.size());
    dydt.resize(y.size());
    const EstimatorEvaluation e = evaluate(model, scratch.theta, scratch.u, true);
    if (e.zero_estimate) return false;
    dydt.segment(0, d) = scratch.rho;
    if (score)
      dydt.segment(d, d) = score(scratch.theta);
    else
      dydt.segment(d, d) = model.prior_grad(scratch.theta) + e.grad_theta;
    dydt.segment(2 * d, D) = scratch.p.flat();
    dydt.segment(2 * d + D, D) = e.grad_u.flat() - scratch.u.flat();
    return dydt.allFinite();
  };
}

bool rk4_integrate(const FlatField& field, Vector& y, double t_end, double dt, std::size_t min_grid_points,
                   const std::function<void(double, const Vector&)>& record) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_integrate: dt must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("rk4_integrate: t_end must be non-negative");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  if (record) record(0.0, y);
  if (steps == 0) return true;
  const double h = t_end / static_cast<double>(steps);
  const std::size_t stride = min_grid_points > 1 ? std::max<std::size_t>(1, steps / (min_grid_points - 1)) : steps;
  Vector k1, k2, k3, k4, tmp;
  for (std::size_t s = 1; s <= steps; ++s) {
    if (!field(y, k1)) return false;
    tmp = y + 0.5 * h * k1;
    if (!field(tmp, k2)) return false;
    tmp = y + 0.5 * h * k2;
    if (!field(tmp, k3)) return false;
    tmp = y + h * k3;
    if (!field(tmp, k4)) return false;
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) return false;
    if (record && (s % stride == 0 || s == steps)) record(h * static_cast<double>(s), y);
  }
  return true;
}

DenseTrajectory reference_ode_solve(const LatentVariableModel& model, const ExtendedState& start, double t_end,
                                    double dt_fine, std::size_t min_grid_points, ThetaScore score) {
  start.check_consistent();
  DenseTrajectory out;
  out.final_state = start;
  const Eigen::Index d = start.theta.size();
  Vector y = start.pack();
  const FlatField field = extended_field(model, start, std::move(score));
  const bool ok = rk4_integrate(field, y, t_end, dt_fine, min_grid_points, [&](double t, const Vector& yt) {
    out.times.push_back(t);
    out.theta.emplace_back(yt.segment(0, d));
    out.rho.emplace_back(yt.segment(d, d));
  });
  out.aborted = !ok;
  if (ok) out.final_state.unpack(y);
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<double>& times, const std::vector<ExtendedState>& states,
                          const std::vector<double>& hamiltonians) {
  if (states.empty()) return;
  const Eigen::Index d = states.front().theta.size();
  out << std::setprecision(17) << "t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",theta_" << i;
  for (Eigen::Index i = 0; i < d; ++i) out << ",rho_" << i;
  out << ",H\n";
  for (std::size_t s = 0; s < states.size(); ++s) {
    out << times[s];
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << states[s].theta[i];
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << states[s].rho[i];
    out << ',' << hamiltonians[s] << '\n';
  }
}

}  // namespace pmhmc
