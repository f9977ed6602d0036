#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "pmhmc/estimator.hpp"
#include "pmhmc/model.hpp"
#include "pmhmc/state.hpp"

namespace pmhmc {

struct IntegratorConfig {
  double h = 0.02;
  std::size_t L = 50;

  void validate() const;
};

/// H = B + A with B = -log p(theta) - log p_hat(y | theta, u) and
/// A = (rho'rho + u'u + p'p) / 2. `total` is +inf when p_hat = 0.
struct HamiltonianValue {
  double total = 0.0;
  double potential = 0.0;
  double kinetic = 0.0;
};

HamiltonianValue extended_hamiltonian(const LatentVariableModel& model, const ExtendedState& state);

/// Same as extended_hamiltonian but reuses an estimator value already computed at (theta, u).
HamiltonianValue hamiltonian_from_log_phat(const LatentVariableModel& model, const ExtendedState& state,
                                           double log_phat);

double kinetic_part(const ExtendedState& state);

/// Exact flow of A for time t: theta drifts, (u, p) rotate.
ExtendedState flow_A(const ExtendedState& state, double t);
void apply_flow_A(ExtendedState& state, double t);

struct FlowBResult {
  ExtendedState state;
  bool refused = false;  ///< p_hat = 0 at the input state
};

/// Exact flow of B for time t: momentum kicks with theta and u frozen.
FlowBResult flow_B(const LatentVariableModel& model, const ExtendedState& state, double t);

/// Kick with a precomputed evaluation at the current (theta, u).
void apply_flow_B(const LatentVariableModel& model, ExtendedState& state, double t, const EstimatorEvaluation& eval);

struct TrajectoryResult {
  ExtendedState state;
  bool aborted = false;
  std::size_t gradient_evaluations = 0;
};

/// Called after every step with (step index starting at 1, state).
using TrajectoryObserver = std::function<void(std::size_t, const ExtendedState&)>;

/// One symmetric Strang step: A(h/2), then B(h), then A(h/2). Any real h is
/// accepted, so strang_step(., -h) inverts strang_step(., h).
/// Returns false (leaving `state` partially advanced) if B is refused.
bool strang_step(const LatentVariableModel& model, ExtendedState& state, double h);

/// L Strang steps of size h; one estimator gradient evaluation per step.
TrajectoryResult strang_trajectory(const LatentVariableModel& model, ExtendedState state, const IntegratorConfig& cfg,
                                   const TrajectoryObserver& observer = {});

/// Log density with gradient over a flat parameter vector.
class DifferentiableTarget {
 public:
  virtual ~DifferentiableTarget() = default;
  virtual std::size_t dim() const = 0;
  /// Returns log pi(q); fills `grad` when non-null.
  virtual double log_density(const Vector& q, Vector* grad) const = 0;
};

/// Joint (theta, u) target of the non-centred model with one draw per datum:
/// log p(theta) + sum_k log w_theta(y_k, u_k) - u'u / 2. Layout q = (theta, u).
class JointSpaceTarget final : public DifferentiableTarget {
 public:
  explicit JointSpaceTarget(const LatentVariableModel& model) : model_(model) {}
  std::size_t dim() const override { return model_.dim_theta() + model_.data_count() * model_.latent_dim(); }
  double log_density(const Vector& q, Vector* grad) const override;

  const LatentVariableModel& model() const { return model_; }

 private:
  const LatentVariableModel& model_;
};

struct PhasePoint {
  Vector q;
  Vector momentum;
};

struct LeapfrogResult {
  PhasePoint point;
  bool aborted = false;
};

/// Position Verlet: q += h/2 m; m += h grad; q += h/2 m, repeated L times.
/// Any real h is accepted. Aborts on a non-finite log density or gradient.
LeapfrogResult leapfrog_trajectory(const DifferentiableTarget& target, PhasePoint start, double h, std::size_t L);
LeapfrogResult leapfrog_trajectory(const DifferentiableTarget& target, PhasePoint start, const IntegratorConfig& cfg);

/// Right-hand side dy/dt = f(y) for a flat state. Returns false to abort.
using FlatField = std::function<bool(const Vector& y, Vector& dydt)>;

/// Replacement for grad_theta {log p(theta) + log p(y | theta)}.
using ThetaScore = std::function<Vector(const Vector& theta)>;

/// Vector field of the extended dynamics over pack()-ed states:
/// (rho, grad log p + grad_theta log p_hat, p, -u + grad_u log p_hat).
/// When `score` is given it replaces the theta-force, everything else unchanged.
FlatField extended_field(const LatentVariableModel& model, const ExtendedState& layout, ThetaScore score = {});

/// Reference solution on a uniform output grid; theta and rho are kept at every
/// grid time, the full state only at the end.
struct DenseTrajectory {
  std::vector<double> times;
  std::vector<Vector> theta;
  std::vector<Vector> rho;
  ExtendedState final_state;
  bool aborted = false;
};

/// Classical fixed-step RK4 with step t_end / round(t_end / dt_fine), output
/// every few steps so that the grid has at least `min_grid_points` points
/// (or every step if there are fewer steps).
DenseTrajectory reference_ode_solve(const LatentVariableModel& model, const ExtendedState& start, double t_end,
                                    double dt_fine = 1e-4, std::size_t min_grid_points = 1001, ThetaScore score = {});

/// Generic RK4 driver used by reference_ode_solve. `record` receives (t, y)
/// at every output time, including t = 0 and t_end.
bool rk4_integrate(const FlatField& field, Vector& y, double t_end, double dt, std::size_t min_grid_points,
                   const std::function<void(double, const Vector&)>& record);

/// Trajectory CSV: t, theta_0.., rho_0.., H.
void write_trajectory_csv(std::ostream& out, const std::vector<double>& times, const std::vector<ExtendedState>& states,
                          const std::vector<double>& hamiltonians);

}  // namespace pmhmc
