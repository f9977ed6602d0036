#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "pmhmc/rng.hpp"
#include "pmhmc/state.hpp"

namespace pmhmc {

/// Single-draw log-weight log w_theta(y_k, u) with both gradients.
struct LogWeight {
  double value = 0.0;
  Vector grad_theta;
  Vector grad_u;
};

/// Contract a latent variable model fulfils for the importance-sampling
/// likelihood estimator. Latent draws use the non-centred map X = gamma_k(theta, u)
/// with u standard normal, so the weight is a smooth function of (theta, u).
///
/// All methods are const and free of shared mutable state; concurrent calls are safe.
class LatentVariableModel {
 public:
  virtual ~LatentVariableModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim_theta() const = 0;
  virtual std::size_t data_count() const = 0;
  virtual std::size_t latent_dim() const { return 1; }

  virtual double prior_logpdf(const Vector& theta) const = 0;
  virtual Vector prior_grad(const Vector& theta) const = 0;

  /// Evaluates the log-weights of datum k for every column of `u` (p x N).
  /// `log_w` receives N values. If non-null, `grad_theta` is resized to d x N
  /// and `grad_u` to p x N, column i holding the gradients of draw i.
  /// A log-weight of -inf is allowed (zero weight); its gradient columns are
  /// then unspecified.
  virtual void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u,
                           Eigen::Ref<Vector> log_w, Matrix* grad_theta, Matrix* grad_u) const = 0;

  LogWeight log_weight(const Vector& theta, std::size_t k, const Vector& u) const;

  // Latent-space view used by the conditional importance sampling Gibbs sampler.
  // All bundled models have a scalar latent per datum.

  /// Draws x_k ~ f_theta.
  virtual double draw_latent(const Vector& theta, std::size_t k, Rng& rng) const = 0;
  /// log f_theta(x)
  virtual double latent_logpdf(const Vector& theta, double x) const = 0;
  /// log g_theta(y_k | x)
  virtual double observation_logpdf(const Vector& theta, std::size_t k, double x) const = 0;

  /// log p(y_k | theta) when available in closed form.
  virtual std::optional<double> analytic_log_likelihood(const Vector& /*theta*/, std::size_t /*k*/) const {
    return std::nullopt;
  }
};

inline LogWeight LatentVariableModel::log_weight(const Vector& theta, std::size_t k, const Vector& u) const {
  Vector lw(1);
  Matrix gt, gu;
  log_weights(theta, k, u, lw, &gt, &gu);
  return {lw[0], gt.col(0), gu.col(0)};
}

/// Sum of independent N(0, variance) log-densities.
inline double iid_normal_logpdf(const Vector& x, double variance) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * (static_cast<double>(x.size()) * (kLog2Pi + std::log(variance)) + x.squaredNorm() / variance);
}

}  // namespace pmhmc
