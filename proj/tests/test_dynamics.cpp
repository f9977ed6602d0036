#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "pmhmc/dynamics.hpp"

using namespace pmhmc;
using namespace pmhmc::testing;

namespace {

ExtendedState random_state(const LatentVariableModel& model, std::size_t N, Rng& rng, double theta_scale = 1.0) {
  const AuxShape shape{model.data_count(), N, model.latent_dim()};
  ExtendedState s;
  s.theta.resize(static_cast<Eigen::Index>(model.dim_theta()));
  s.rho.resize(s.theta.size());
  for (Eigen::Index i = 0; i < s.theta.size(); ++i) {
    s.theta[i] = theta_scale * rng.normal();
    s.rho[i] = rng.normal();
  }
  s.u = AuxiliaryBlock::standard_normal(shape, rng);
  s.p = AuxiliaryBlock::standard_normal(shape, rng);
  return s;
}

ExtendedState negate_momenta(ExtendedState s) {
  s.rho = -s.rho;
  s.p.flat() = -s.p.flat();
  return s;
}

// 2x2 harmonic target: log pi(q) = -|q|^2 / 2.
class StandardNormal final : public DifferentiableTarget {
 public:
  std::size_t dim() const override { return 2; }
  double log_density(const Vector& q, Vector* grad) const override {
    if (grad) *grad = -q;
    return -0.5 * q.squaredNorm();
  }
};

}  // namespace

TEST_CASE("extended hamiltonian equals its definition") {
  const auto model = small_gaussian(4);
  Rng rng(1, 0);
  const ExtendedState s = random_state(model, 3, rng);
  const double expected = -model.prior_logpdf(s.theta) - evaluate(model, s.theta, s.u, false).log_phat +
                          0.5 * (s.rho.squaredNorm() + s.u.squared_norm() + s.p.squared_norm());
  CHECK(extended_hamiltonian(model, s).total == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("flow A is an exact drift and rotation") {
  Rng rng(2, 0);
  const auto model = small_gaussian(3);
  const ExtendedState s = random_state(model, 2, rng);
  const ExtendedState zero = flow_A(s, 0.0);
  CHECK(zero.pack() == s.pack());

  const double t = 0.37;
  const ExtendedState a = flow_A(s, t);
  CHECK((a.theta - (s.theta + t * s.rho)).norm() < 1e-15);
  CHECK(a.rho == s.rho);
  for (Eigen::Index i = 0; i < s.u.flat().size(); ++i) {
    const double u0 = s.u.flat()[i], p0 = s.p.flat()[i];
    CHECK(a.u.flat()[i] == doctest::Approx(p0 * std::sin(t) + u0 * std::cos(t)));
    CHECK(a.p.flat()[i] == doctest::Approx(p0 * std::cos(t) - u0 * std::sin(t)));
  }
  CHECK(a.u.squared_norm() + a.p.squared_norm() ==
        doctest::Approx(s.u.squared_norm() + s.p.squared_norm()).epsilon(1e-14));
  const ExtendedState ab = flow_A(flow_A(s, 0.2), 0.17);
  CHECK((ab.pack() - a.pack()).norm() < 1e-14);
}

TEST_CASE("flow B kicks the momenta only") {
  Rng rng(3, 0);
  const FlatModel flat(2, 3);
  const ExtendedState s = random_state(flat, 2, rng);
  const FlowBResult r = flow_B(flat, s, 0.5);
  REQUIRE_FALSE(r.refused);
  CHECK((r.state.rho - (s.rho - 0.5 * s.theta)).norm() < 1e-15);
  CHECK(r.state.p.flat() == s.p.flat());
  CHECK(r.state.theta == s.theta);
  CHECK(r.state.u.flat() == s.u.flat());

  const auto model = small_gaussian(3);
  const ExtendedState g = random_state(model, 2, rng);
  const EstimatorEvaluation e = evaluate(model, g.theta, g.u);
  const FlowBResult rg = flow_B(model, g, -0.3);
  CHECK((rg.state.p.flat() - (g.p.flat() - 0.3 * e.grad_u.flat())).norm() < 1e-14);

  const CliffModel cliff(2, 0.0);
  ExtendedState c = random_state(cliff, 1, rng);
  c.theta[0] = 1.0;
  CHECK(flow_B(cliff, c, 0.1).refused);
}

TEST_CASE("the A + B vector field is the sum of the split fields") {
  Rng rng(4, 0);
  const auto model = small_gaussian(3);
  const ExtendedState s = random_state(model, 2, rng);
  const FlatField f = extended_field(model, s);
  Vector dy;
  REQUIRE(f(s.pack(), dy));
  const double eps = 1e-6;
  // derivative of (flow_B o flow_A)(eps) at eps = 0, by central differences
  auto combined = [&](double t) {
    return flow_B(model, flow_A(s, t), t).state.pack();
  };
  const Vector numeric = (combined(eps) - combined(-eps)) / (2.0 * eps);
  CHECK(relative_error(dy, numeric) < 1e-7);
}

TEST_CASE("Strang integration is reversible") {
  Rng rng(5, 0);
  ModelSpec spec;
  spec.kind = ModelKind::diffraction;
  spec.T = 10;
  const auto model = model_from(spec, 2);
  ExtendedState s = random_state(*model, 4, rng, 0.1);
  s.theta[2] = std::log(0.1);
  IntegratorConfig cfg;
  cfg.h = 0.005;
  cfg.L = 40;
  const TrajectoryResult fwd = strang_trajectory(*model, s, cfg);
  REQUIRE_FALSE(fwd.aborted);
  CHECK(fwd.gradient_evaluations == 40);
  const TrajectoryResult back = strang_trajectory(*model, negate_momenta(fwd.state), cfg);
  REQUIRE_FALSE(back.aborted);
  CHECK((negate_momenta(back.state).pack() - s.pack()).cwiseAbs().maxCoeff() < 1e-10);

  ExtendedState step = s;
  REQUIRE(strang_step(*model, step, 0.01));
  REQUIRE(strang_step(*model, step, -0.01));
  CHECK((step.pack() - s.pack()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one Strang step preserves volume") {
  Rng rng(6, 0);
  const auto model = small_gaussian(1);
  const ExtendedState s = random_state(model, 1, rng);
  REQUIRE(s.packed_size() == 4);
  const double h = 0.2;
  auto step = [&](const Vector& y) {
    ExtendedState x = s;
    x.unpack(y);
    REQUIRE(strang_step(model, x, h));
    return x.pack();
  };
  Matrix J(4, 4);
  const Vector y0 = s.pack();
  for (Eigen::Index j = 0; j < 4; ++j) {
    Vector a = y0, b = y0;
    a[j] += 1e-5;
    b[j] -= 1e-5;
    J.col(j) = (step(a) - step(b)) / 2e-5;
  }
  CHECK(std::abs(J.determinant()) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("energy error is second order in h") {
  const auto model = small_gaussian(30);
  Rng rng(7, 0);
  double e1 = 0.0, e2 = 0.0;
  for (int r = 0; r < 10; ++r) {
    ExtendedState s = random_state(model, 4, rng);
    s.theta[0] = model.posterior().mean + model.posterior().sd * rng.normal();
    const double h0 = extended_hamiltonian(model, s).total;
    const auto a = strang_trajectory(model, s, {0.04, 25});
    const auto b = strang_trajectory(model, s, {0.02, 50});
    e1 += std::abs(extended_hamiltonian(model, a.state).total - h0);
    e2 += std::abs(extended_hamiltonian(model, b.state).total - h0);
  }
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.125));
}

TEST_CASE("trajectory aborts when the estimate vanishes") {
  const CliffModel cliff(2, 0.5);
  ExtendedState s;
  s.theta = Vector::Zero(1);
  s.rho = Vector::Constant(1, 5.0);
  s.u = AuxiliaryBlock({2, 1, 1});
  s.p = AuxiliaryBlock({2, 1, 1});
  const auto r = strang_trajectory(cliff, s, {0.1, 50});
  CHECK(r.aborted);
  CHECK(r.gradient_evaluations < 50);
}

TEST_CASE("flat model: the extended dynamics are two decoupled oscillators") {
  const FlatModel flat(1, 2);
  Rng rng(8, 0);
  const ExtendedState s = random_state(flat, 3, rng);
  const DenseTrajectory d = reference_ode_solve(flat, s, 1.0, 1e-3, 11);
  REQUIRE_FALSE(d.aborted);
  REQUIRE(d.times.size() == 11);
  for (std::size_t i = 0; i < d.times.size(); ++i) {
    const double t = d.times[i];
    CHECK(d.theta[i][0] == doctest::Approx(s.theta[0] * std::cos(t) + s.rho[0] * std::sin(t)).epsilon(1e-11));
  }
  const ExtendedState rotated = flow_A(s, 1.0);
  CHECK((d.final_state.u.flat() - rotated.u.flat()).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("RK4 is fourth order") {
  // y' = (y2, -y1)
  const FlatField osc = [](const Vector& y, Vector& dy) {
    dy.resize(2);
    dy << y[1], -y[0];
    return true;
  };
  auto error = [&](double dt) {
    Vector y(2);
    y << 1.0, 0.0;
    REQUIRE(rk4_integrate(osc, y, 2.0, dt, 2, {}));
    return std::hypot(y[0] - std::cos(2.0), y[1] + std::sin(2.0));
  };
  const double ratio = error(0.1) / error(0.05);
  CHECK(ratio == doctest::Approx(16.0).epsilon(0.05));
  std::size_t calls = 0;
  Vector y(2);
  y << 1.0, 0.0;
  rk4_integrate(osc, y, 1.0, 1e-3, 1001, [&](double, const Vector&) { ++calls; });
  CHECK(calls == 1001);
}

TEST_CASE("leapfrog matches the harmonic flow to second order and is reversible") {
  const StandardNormal target;
  PhasePoint start{(Vector(2) << 1.0, -0.5).finished(), (Vector(2) << 0.3, 0.8).finished()};
  auto err = [&](double h) {
    const auto r = leapfrog_trajectory(target, start, h, static_cast<std::size_t>(std::llround(1.0 / h)));
    const Vector exact = start.q * std::cos(1.0) + start.momentum * std::sin(1.0);
    return (r.point.q - exact).norm();
  };
  CHECK(err(0.02) / err(0.01) == doctest::Approx(4.0).epsilon(0.05));
  const auto fwd = leapfrog_trajectory(target, start, 0.1, 17);
  const auto back = leapfrog_trajectory(target, {fwd.point.q, -fwd.point.momentum}, 0.1, 17);
  CHECK((back.point.q - start.q).norm() < 1e-13);
  CHECK((back.point.momentum + start.momentum).norm() < 1e-13);
}

TEST_CASE("joint-space target gradient matches finite differences") {
  const auto model = small_gaussian(5);
  const JointSpaceTarget target(model);
  REQUIRE(target.dim() == 6);
  Rng rng(9, 0);
  Vector q(6);
  for (Eigen::Index i = 0; i < 6; ++i) q[i] = rng.normal();
  Vector g;
  target.log_density(q, &g);
  const Vector fd = fd_gradient([&](const Vector& x) { return target.log_density(x, nullptr); }, q);
  CHECK(relative_error(g, fd) < 1e-8);
}

TEST_CASE("invalid integrator settings are rejected") {
  CHECK_THROWS_AS(IntegratorConfig({0.0, 10}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(IntegratorConfig({0.1, 0}).validate(), std::invalid_argument);
  ExtendedState bad;
  bad.theta = Vector::Zero(1);
  bad.rho = Vector::Zero(2);
  CHECK_THROWS_AS(bad.check_consistent(), std::invalid_argument);
}

TEST_CASE("trajectory CSV has one row per recorded state") {
  const auto model = small_gaussian(2);
  Rng rng(1, 1);
  const ExtendedState s = random_state(model, 2, rng);
  std::stringstream out;
  write_trajectory_csv(out, {0.0, 0.1}, {s, s}, {1.0, 1.0});
  std::string header;
  std::getline(out, header);
  CHECK(header == "t,theta_0,rho_0,H");
}
