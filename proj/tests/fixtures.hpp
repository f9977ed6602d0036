#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "pmhmc/datasets.hpp"
#include "pmhmc/estimator.hpp"
#include "pmhmc/models.hpp"
#include "pmhmc/rng.hpp"

namespace pmhmc::testing {

/// Every weight equals exp(c): the estimator is exact and carries no u-dependence.
class FlatModel final : public LatentVariableModel {
 public:
  FlatModel(std::size_t d, std::size_t T, double c = 0.0) : d_(d), T_(T), c_(c) {}
  std::string name() const override { return "flat"; }
  std::size_t dim_theta() const override { return d_; }
  std::size_t data_count() const override { return T_; }
  double prior_logpdf(const Vector& theta) const override { return iid_normal_logpdf(theta, 1.0); }
  Vector prior_grad(const Vector& theta) const override { return -theta; }
  void log_weights(const Vector&, std::size_t, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* gt, Matrix* gu) const override {
    log_w.setConstant(c_);
    if (gt) *gt = Matrix::Zero(static_cast<Eigen::Index>(d_), u.cols());
    if (gu) *gu = Matrix::Zero(u.rows(), u.cols());
  }
  double draw_latent(const Vector&, std::size_t, Rng& rng) const override { return rng.normal(); }
  double latent_logpdf(const Vector&, double x) const override { return -0.5 * x * x - 0.9189385332046727; }
  double observation_logpdf(const Vector&, std::size_t, double) const override { return c_; }
  std::optional<double> analytic_log_likelihood(const Vector&, std::size_t) const override { return c_; }

 private:
  std::size_t d_, T_;
  double c_;
};

/// Unit weights for theta_0 < cliff and zero weights beyond it.
class CliffModel final : public LatentVariableModel {
 public:
  CliffModel(std::size_t T, double cliff) : T_(T), cliff_(cliff) {}
  std::string name() const override { return "cliff"; }
  std::size_t dim_theta() const override { return 1; }
  std::size_t data_count() const override { return T_; }
  double prior_logpdf(const Vector& theta) const override { return iid_normal_logpdf(theta, 1.0); }
  Vector prior_grad(const Vector& theta) const override { return -theta; }
  void log_weights(const Vector& theta, std::size_t, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* gt, Matrix* gu) const override {
    log_w.setConstant(theta[0] < cliff_ ? 0.0 : -std::numeric_limits<double>::infinity());
    if (gt) *gt = Matrix::Zero(1, u.cols());
    if (gu) *gu = Matrix::Zero(u.rows(), u.cols());
  }
  double draw_latent(const Vector&, std::size_t, Rng& rng) const override { return rng.normal(); }
  double latent_logpdf(const Vector&, double x) const override { return -0.5 * x * x - 0.9189385332046727; }
  double observation_logpdf(const Vector& theta, std::size_t, double) const override {
    return theta[0] < cliff_ ? 0.0 : -std::numeric_limits<double>::infinity();
  }

 private:
  std::size_t T_;
  double cliff_;
};

/// Adds a constant to every log-weight of another model.
class ShiftedModel final : public LatentVariableModel {
 public:
  ShiftedModel(const LatentVariableModel& base, double shift) : base_(base), shift_(shift) {}
  std::string name() const override { return "shifted-" + base_.name(); }
  std::size_t dim_theta() const override { return base_.dim_theta(); }
  std::size_t data_count() const override { return base_.data_count(); }
  std::size_t latent_dim() const override { return base_.latent_dim(); }
  double prior_logpdf(const Vector& theta) const override { return base_.prior_logpdf(theta); }
  Vector prior_grad(const Vector& theta) const override { return base_.prior_grad(theta); }
  void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* gt, Matrix* gu) const override {
    base_.log_weights(theta, k, u, log_w, gt, gu);
    log_w.array() += shift_;
  }
  double draw_latent(const Vector& theta, std::size_t k, Rng& rng) const override {
    return base_.draw_latent(theta, k, rng);
  }
  double latent_logpdf(const Vector& theta, double x) const override { return base_.latent_logpdf(theta, x); }
  double observation_logpdf(const Vector& theta, std::size_t k, double x) const override {
    return base_.observation_logpdf(theta, k, x) + shift_;
  }

 private:
  const LatentVariableModel& base_;
  double shift_;
};

inline GaussianHierarchicalModel small_gaussian(std::size_t T = 30, std::uint64_t seed = 7) {
  ModelSpec spec;
  spec.kind = ModelKind::gaussian;
  spec.T = T;
  Dataset d = generate_synthetic_data(spec, seed);
  return GaussianHierarchicalModel(spec.gaussian, d.y);
}

inline std::unique_ptr<LatentVariableModel> model_from(const ModelSpec& spec, std::uint64_t seed) {
  return make_model(spec, generate_synthetic_data(spec, seed));
}

/// Richardson-extrapolated central difference of f along coordinate i.
inline double fd_partial(const std::function<double(const Vector&)>& f, const Vector& x, Eigen::Index i,
                         double h = 1e-4) {
  auto central = [&](double step) {
    Vector a = x, b = x;
    a[i] += step;
    b[i] -= step;
    return (f(a) - f(b)) / (2.0 * step);
  };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-4) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = fd_partial(f, x, i, h);
  return g;
}

/// ||a - b|| / max(||b||, floor).
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace pmhmc::testing
