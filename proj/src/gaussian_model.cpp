#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pmhmc/models.hpp"

namespace pmhmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}
}  // namespace

GaussianHierarchicalModel::GaussianHierarchicalModel(GaussianParams params, std::vector<double> y)
    : params_(params), y_(std::move(y)) {
  if (!(params_.sigma0_sq > 0.0) || !(params_.sigma1_sq > 0.0) || !(params_.sigma2_sq > 0.0))
    throw std::invalid_argument("GaussianHierarchicalModel: variances must be positive");
  for (double v : y_)
    if (!std::isfinite(v)) throw std::invalid_argument("GaussianHierarchicalModel: non-finite observation");
  sigma1_ = std::sqrt(params_.sigma1_sq);
}

double GaussianHierarchicalModel::prior_logpdf(const Vector& theta) const {
  return normal_logpdf(theta[0], 0.0, params_.sigma0_sq);
}

Vector GaussianHierarchicalModel::prior_grad(const Vector& theta) const {
  return Vector::Constant(1, -theta[0] / params_.sigma0_sq);
}

void GaussianHierarchicalModel::log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u,
                                            Eigen::Ref<Vector> log_w, Matrix* grad_theta, Matrix* grad_u) const {
  const double s2 = params_.sigma2_sq;
  const double c = -0.5 * (kLog2Pi + std::log(s2));
  const Eigen::ArrayXd resid = (y_[k] - theta[0]) - sigma1_ * u.row(0).transpose().array();
  log_w = (c - 0.5 * resid.square() / s2).matrix();
  if (grad_theta) *grad_theta = (resid / s2).matrix().transpose();
  if (grad_u) *grad_u = (sigma1_ * resid / s2).matrix().transpose();
}

double GaussianHierarchicalModel::draw_latent(const Vector& theta, std::size_t, Rng& rng) const {
  return theta[0] + sigma1_ * rng.normal();
}

double GaussianHierarchicalModel::latent_logpdf(const Vector& theta, double x) const {
  return normal_logpdf(x, theta[0], params_.sigma1_sq);
}

double GaussianHierarchicalModel::observation_logpdf(const Vector&, std::size_t k, double x) const {
  return normal_logpdf(y_[k], x, params_.sigma2_sq);
}

std::optional<double> GaussianHierarchicalModel::analytic_log_likelihood(const Vector& theta, std::size_t k) const {
  return normal_logpdf(y_[k], theta[0], params_.sigma1_sq + params_.sigma2_sq);
}

NormalSummary GaussianHierarchicalModel::posterior() const {
  const double v = params_.sigma1_sq + params_.sigma2_sq;
  const double precision = 1.0 / params_.sigma0_sq + static_cast<double>(y_.size()) / v;
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
  return {sum / v / precision, std::sqrt(1.0 / precision)};
}

double GaussianHierarchicalModel::marginal_score(double theta) const {
  const double v = params_.sigma1_sq + params_.sigma2_sq;
  double s = -theta / params_.sigma0_sq;
  for (double yk : y_) s += (yk - theta) / v;
  return s;
}

}  // namespace pmhmc
