#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"

using namespace pmhmc;
using namespace pmhmc::testing;

namespace {

// log p_hat computed naively in linear space, as an independent reference.
double naive_log_phat(const LatentVariableModel& m, const Vector& theta, const AuxiliaryBlock& u) {
  double total = 0.0;
  for (std::size_t k = 0; k < m.data_count(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.shape().samples; ++i)
      s += std::exp(m.log_weight(theta, k, u.datum(k).col(static_cast<Eigen::Index>(i))).value);
    total += std::log(s / static_cast<double>(u.shape().samples));
  }
  return total;
}

}  // namespace

TEST_CASE("estimator value matches a naive linear-space evaluation") {
  const auto model = small_gaussian(6);
  Rng rng(1, 1);
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({6, 5, 1}, rng);
  const Vector theta = Vector::Constant(1, 0.4);
  const EstimatorEvaluation e = evaluate(model, theta, u);
  CHECK(e.log_phat == doctest::Approx(naive_log_phat(model, theta, u)).epsilon(1e-12));
  CHECK(e.per_datum_log.sum() == doctest::Approx(e.log_phat).epsilon(1e-14));
  CHECK_FALSE(e.zero_estimate);
}

TEST_CASE("estimator gradients match finite differences of log p_hat") {
  Rng rng(8, 0);
  ModelSpec spec;
  spec.kind = ModelKind::diffraction;
  spec.T = 5;
  const auto model = model_from(spec, 3);
  const Vector theta = (Vector(3) << 1.0, 0.1, std::log(0.12)).finished();
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({5, 4, 1}, rng);
  const EstimatorEvaluation e = evaluate(*model, theta, u);
  const Vector gt = fd_gradient([&](const Vector& t) { return evaluate(*model, t, u, false).log_phat; }, theta);
  const Vector gu = fd_gradient(
      [&](const Vector& v) { return evaluate(*model, theta, AuxiliaryBlock(u.shape(), v), false).log_phat; }, u.flat());
  CHECK(relative_error(e.grad_theta, gt) < 1e-6);
  CHECK(relative_error(e.grad_u.flat(), gu) < 1e-6);
}

TEST_CASE("constant weights give the exact likelihood and zero u-gradients") {
  const FlatModel model(2, 4, -1.3);
  Rng rng(2, 2);
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({4, 7, 1}, rng);
  const EstimatorEvaluation e = evaluate(model, Vector::Zero(2), u);
  CHECK(e.log_phat == doctest::Approx(4 * -1.3).epsilon(1e-14));
  CHECK(e.grad_u.flat().norm() == 0.0);
  CHECK(e.grad_theta.norm() == 0.0);
  const WeightMatrix w = weight_matrix(model, Vector::Zero(2), u);
  CHECK((w.softmax.array() - 1.0 / 7.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("with N = 1 the estimator is the single weight") {
  const auto model = small_gaussian(4);
  Rng rng(4, 4);
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({4, 1, 1}, rng);
  const Vector theta = Vector::Constant(1, -0.2);
  const EstimatorEvaluation e = evaluate(model, theta, u);
  double s = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const LogWeight w = model.log_weight(theta, k, u.datum(k).col(0));
    s += w.value;
    CHECK(e.grad_u.at(k, 0, 0) == doctest::Approx(w.grad_u[0]).epsilon(1e-14));
  }
  CHECK(e.log_phat == doctest::Approx(s).epsilon(1e-14));
}

TEST_CASE("shifting all log-weights by c moves log p_hat by T c and leaves gradients unchanged") {
  const auto base = small_gaussian(5);
  const ShiftedModel shifted(base, -800.0);
  Rng rng(6, 6);
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({5, 9, 1}, rng);
  const Vector theta = Vector::Constant(1, 0.9);
  const EstimatorEvaluation a = evaluate(base, theta, u);
  const EstimatorEvaluation b = evaluate(shifted, theta, u);
  REQUIRE_FALSE(b.zero_estimate);
  CHECK(b.log_phat == doctest::Approx(a.log_phat - 5 * 800.0).epsilon(1e-13));
  CHECK((a.grad_theta - b.grad_theta).norm() < 1e-12);
  CHECK((a.grad_u.flat() - b.grad_u.flat()).norm() < 1e-12);
}

namespace {
// Gaussian weights except that datum 0 has zero weight wherever u > 0.
class HalfZeroModel final : public LatentVariableModel {
 public:
  explicit HalfZeroModel(const LatentVariableModel& base) : base_(base) {}
  std::string name() const override { return "half-zero"; }
  std::size_t dim_theta() const override { return base_.dim_theta(); }
  std::size_t data_count() const override { return base_.data_count(); }
  double prior_logpdf(const Vector& t) const override { return base_.prior_logpdf(t); }
  Vector prior_grad(const Vector& t) const override { return base_.prior_grad(t); }
  void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* gt, Matrix* gu) const override {
    base_.log_weights(theta, k, u, log_w, gt, gu);
    if (k != 0) return;
    for (Eigen::Index i = 0; i < u.cols(); ++i)
      if (u(0, i) > 0.0) {
        log_w[i] = -std::numeric_limits<double>::infinity();
        if (gt) gt->col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
        if (gu) gu->col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      }
  }
  double draw_latent(const Vector& t, std::size_t k, Rng& r) const override { return base_.draw_latent(t, k, r); }
  double latent_logpdf(const Vector& t, double x) const override { return base_.latent_logpdf(t, x); }
  double observation_logpdf(const Vector& t, std::size_t k, double x) const override {
    return base_.observation_logpdf(t, k, x);
  }

 private:
  const LatentVariableModel& base_;
};
}  // namespace

TEST_CASE("zero weights: partial zeros are skipped, all zeros give a zero estimate") {
  const auto base = small_gaussian(3);
  const HalfZeroModel model(base);
  const Vector theta = Vector::Constant(1, 0.2);
  AuxiliaryBlock u({3, 2, 1});
  u.at(0, 0, 0) = -0.5;
  u.at(0, 1, 0) = 0.5;
  const EstimatorEvaluation partial = evaluate(model, theta, u);
  REQUIRE_FALSE(partial.zero_estimate);
  CHECK(partial.grad_theta.allFinite());
  CHECK(partial.grad_u.all_finite());
  CHECK(partial.grad_u.at(0, 1, 0) == 0.0);
  const double w0 = base.log_weight(theta, 0, Vector::Constant(1, -0.5)).value;
  CHECK(partial.per_datum_log[0] == doctest::Approx(w0 - std::log(2.0)).epsilon(1e-13));

  u.at(0, 0, 0) = 0.1;
  const EstimatorEvaluation zero = evaluate(model, theta, u);
  CHECK(zero.zero_estimate);
  CHECK(zero.log_phat == -std::numeric_limits<double>::infinity());
}

TEST_CASE("estimator is deterministic") {
  const auto model = small_gaussian(5);
  Rng r1(3, 0), r2(3, 0);
  const AuxiliaryBlock u1 = AuxiliaryBlock::standard_normal({5, 3, 1}, r1);
  const AuxiliaryBlock u2 = AuxiliaryBlock::standard_normal({5, 3, 1}, r2);
  const Vector theta = Vector::Constant(1, 0.1);
  const auto a = evaluate(model, theta, u1);
  const auto b = evaluate(model, theta, u2);
  CHECK(a.log_phat == b.log_phat);
  CHECK(a.grad_u.flat() == b.grad_u.flat());
}

TEST_CASE("estimator is unbiased for the gaussian model") {
  const auto model = small_gaussian(3);
  const UnbiasednessResult r = unbiasedness_check(model, Vector::Constant(1, 0.5), 4, 200000, 17);
  for (double z : r.z_score) CHECK(std::abs(z) < 4.0);
  CHECK_THROWS_AS(unbiasedness_check(model, Vector::Constant(1, 0.5), 4, 0, 1), std::invalid_argument);
  ModelSpec spec;
  spec.kind = ModelKind::diffraction;
  spec.T = 2;
  CHECK_THROWS_AS(unbiasedness_check(*model_from(spec, 1), Vector::Zero(3), 4, 10, 1), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
  const auto model = small_gaussian(4);
  CHECK_THROWS_AS(evaluate(model, Vector::Zero(1), AuxiliaryBlock({3, 2, 1})), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(model, Vector::Zero(1), AuxiliaryBlock({4, 0, 1})), std::invalid_argument);
}

TEST_CASE("weight matrix CSV has one row per (k, i)") {
  const auto model = small_gaussian(2);
  Rng rng(1, 1);
  const AuxiliaryBlock u = AuxiliaryBlock::standard_normal({2, 3, 1}, rng);
  std::stringstream s;
  write_weight_matrix_csv(s, weight_matrix(model, Vector::Zero(1), u));
  std::string line;
  int rows = 0;
  std::getline(s, line);
  CHECK(line == "k,i,log_w,softmax");
  while (std::getline(s, line)) ++rows;
  CHECK(rows == 6);
}
