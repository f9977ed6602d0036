#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "pmhmc/models.hpp"

namespace pmhmc {

double log_sinc_sq(double z, double* derivative) {
  // Removable singularity at 0: log sinc^2(z) = -z^2/3 - z^4/90 + O(z^6).
  if (std::abs(z) < 1e-4) {
    const double z2 = z * z;
    if (derivative) *derivative = -2.0 * z / 3.0 - 4.0 * z * z2 / 90.0;
    return -z2 / 3.0 - z2 * z2 / 90.0;
  }
  const double s = std::sin(z);
  if (s == 0.0) {
    if (derivative) *derivative = std::numeric_limits<double>::quiet_NaN();
    return -std::numeric_limits<double>::infinity();
  }
  if (derivative) *derivative = 2.0 * std::cos(z) / s - 2.0 / z;
  return 2.0 * (std::log(std::abs(s)) - std::log(std::abs(z)));
}

double diffraction_density(double y, double x, double lambda) {
  const double z = (y - x) / lambda;
  const double sinc = (z == 0.0) ? 1.0 : std::sin(z) / z;
  return sinc * sinc / (lambda * std::numbers::pi);
}

DiffractionModel::DiffractionModel(std::vector<double> y, double prior_variance)
    : y_(std::move(y)), prior_variance_(prior_variance) {
  if (!(prior_variance_ > 0.0)) throw std::invalid_argument("DiffractionModel: prior variance must be positive");
}

double DiffractionModel::prior_logpdf(const Vector& theta) const { return iid_normal_logpdf(theta, prior_variance_); }

Vector DiffractionModel::prior_grad(const Vector& theta) const { return -theta / prior_variance_; }

void DiffractionModel::log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u,
                                   Eigen::Ref<Vector> log_w, Matrix* grad_theta, Matrix* grad_u) const {
  const double mu = theta[0];
  const double sigma = std::exp(theta[1]);
  const double lambda = std::exp(theta[2]);
  const double inv_lambda = 1.0 / lambda;
  const double log_norm = -(theta[2] + std::log(std::numbers::pi));
  const Eigen::Index n = u.cols();
  if (grad_theta) grad_theta->resize(3, n);
  if (grad_u) grad_u->resize(1, n);
  const bool want_grad = grad_theta || grad_u;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ui = u(0, i);
    const double z = (y_[k] - mu - sigma * ui) * inv_lambda;
    double dz = 0.0;
    log_w[i] = log_norm + log_sinc_sq(z, want_grad ? &dz : nullptr);
    if (grad_theta) {
      (*grad_theta)(0, i) = -dz * inv_lambda;
      (*grad_theta)(1, i) = -dz * sigma * ui * inv_lambda;
      (*grad_theta)(2, i) = -dz * z - 1.0;
    }
    if (grad_u) (*grad_u)(0, i) = -dz * sigma * inv_lambda;
  }
}

double DiffractionModel::draw_latent(const Vector& theta, std::size_t, Rng& rng) const {
  return theta[0] + std::exp(theta[1]) * rng.normal();
}

double DiffractionModel::latent_logpdf(const Vector& theta, double x) const {
  const double r = (x - theta[0]) * std::exp(-theta[1]);
  return -0.5 * std::log(2.0 * std::numbers::pi) - theta[1] - 0.5 * r * r;
}

double DiffractionModel::observation_logpdf(const Vector& theta, std::size_t k, double x) const {
  return -(theta[2] + std::log(std::numbers::pi)) + log_sinc_sq((y_[k] - x) * std::exp(-theta[2]));
}

}  // namespace pmhmc
