#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "pmhmc/models.hpp"

namespace pmhmc {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log N(x; mu, 1/lambda) given log lambda
double precision_normal_logpdf(double x, double mu, double lambda, double log_lambda) {
  const double r = x - mu;
  return 0.5 * log_lambda - kHalfLog2Pi - 0.5 * lambda * r * r;
}
}  // namespace

double mixture_logpdf(double x, double w1, double mu1, double lambda1, double mu2, double lambda2) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const double a1 = w1 > 0.0 ? std::log(w1) + precision_normal_logpdf(x, mu1, lambda1, std::log(lambda1)) : ninf;
  const double a2 = w1 < 1.0 ? std::log1p(-w1) + precision_normal_logpdf(x, mu2, lambda2, std::log(lambda2)) : ninf;
  return log_add(a1, a2);
}

GlmmModel::GlmmModel(GlmmData data, double prior_variance, double proposal_sd)
    : data_(std::move(data)), prior_variance_(prior_variance), proposal_sd_(proposal_sd) {
  if (data_.subjects == 0 || data_.obs_per_subject == 0) throw std::invalid_argument("GlmmModel: empty data");
  if (static_cast<std::size_t>(data_.covariates.rows()) != data_.subjects * data_.obs_per_subject ||
      data_.responses.size() != data_.subjects * data_.obs_per_subject)
    throw std::invalid_argument("GlmmModel: covariate/response sizes do not match T * n_i");
  for (int r : data_.responses)
    if (r != 0 && r != 1) throw std::invalid_argument("GlmmModel: responses must be 0 or 1");
  if (!(prior_variance_ > 0.0) || !(proposal_sd_ > 0.0))
    throw std::invalid_argument("GlmmModel: prior variance and proposal sd must be positive");
}

double GlmmModel::prior_logpdf(const Vector& theta) const { return iid_normal_logpdf(theta, prior_variance_); }

Vector GlmmModel::prior_grad(const Vector& theta) const { return -theta / prior_variance_; }

void GlmmModel::log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u,
                            Eigen::Ref<Vector> log_w, Matrix* grad_theta, Matrix* grad_u) const {
  const std::size_t pc = data_.covariate_dim();
  const std::size_t ni = data_.obs_per_subject;
  const auto beta = theta.head(static_cast<Eigen::Index>(pc));
  const double mu1 = theta[mu1_index()];
  const double mu2 = theta[mu2_index()];
  const double log_l1 = theta[log_lambda1_index()];
  const double log_l2 = theta[log_lambda2_index()];
  const double a = theta[logit_w1_index()];
  const double l1 = std::exp(log_l1);
  const double l2 = std::exp(log_l2);
  const double w1 = sigmoid(a);
  const double log_w1 = -softplus(-a);
  const double log_w2 = -softplus(a);
  const double s = proposal_sd_;
  const double log_q_const = -kHalfLog2Pi - std::log(s);

  const auto rows = data_.covariates.middleRows(static_cast<Eigen::Index>(k * ni), static_cast<Eigen::Index>(ni));
  const Vector linear = rows * beta;
  const int* y = data_.responses.data() + k * ni;

  const Eigen::Index n = u.cols();
  const bool want_grad = grad_theta || grad_u;
  if (grad_theta) grad_theta->resize(static_cast<Eigen::Index>(dim_theta()), n);
  if (grad_u) grad_u->resize(1, n);
  Vector resid(static_cast<Eigen::Index>(ni));

  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = s * u(0, i);
    const double c1 = log_w1 + precision_normal_logpdf(x, mu1, l1, log_l1);
    const double c2 = log_w2 + precision_normal_logpdf(x, mu2, l2, log_l2);
    const double lf = log_add(c1, c2);

    double bern = 0.0;
    double dx_bern = 0.0;
    for (std::size_t j = 0; j < ni; ++j) {
      const double eta = x + linear[static_cast<Eigen::Index>(j)];
      bern += y[j] * eta - softplus(eta);
      if (want_grad) {
        resid[static_cast<Eigen::Index>(j)] = y[j] - sigmoid(eta);
        dx_bern += resid[static_cast<Eigen::Index>(j)];
      }
    }
    const double log_q = log_q_const - 0.5 * x * x / (s * s);
    log_w[i] = lf + bern - log_q;
    if (!want_grad) continue;

    const double r1 = std::exp(c1 - lf);
    const double r2 = std::exp(c2 - lf);
    const double d1 = x - mu1;
    const double d2 = x - mu2;
    if (grad_theta) {
      auto g = grad_theta->col(i);
      g.head(static_cast<Eigen::Index>(pc)) = rows.transpose() * resid;
      g[mu1_index()] = r1 * l1 * d1;
      g[mu2_index()] = r2 * l2 * d2;
      g[log_lambda1_index()] = r1 * (0.5 - 0.5 * l1 * d1 * d1);
      g[log_lambda2_index()] = r2 * (0.5 - 0.5 * l2 * d2 * d2);
      g[logit_w1_index()] = r1 * (1.0 - w1) - r2 * w1;
    }
    if (grad_u) {
      const double dx = -r1 * l1 * d1 - r2 * l2 * d2 + dx_bern + x / (s * s);
      (*grad_u)(0, i) = s * dx;
    }
  }
}

double GlmmModel::draw_latent(const Vector& theta, std::size_t, Rng& rng) const {
  const double w1 = sigmoid(theta[logit_w1_index()]);
  const bool first = rng.uniform() < w1;
  const double mu = first ? theta[mu1_index()] : theta[mu2_index()];
  const double log_l = first ? theta[log_lambda1_index()] : theta[log_lambda2_index()];
  return mu + std::exp(-0.5 * log_l) * rng.normal();
}

double GlmmModel::latent_logpdf(const Vector& theta, double x) const {
  const double a = theta[logit_w1_index()];
  const double c1 = -softplus(-a) + precision_normal_logpdf(x, theta[mu1_index()], std::exp(theta[log_lambda1_index()]),
                                                            theta[log_lambda1_index()]);
  const double c2 = -softplus(a) + precision_normal_logpdf(x, theta[mu2_index()], std::exp(theta[log_lambda2_index()]),
                                                           theta[log_lambda2_index()]);
  return log_add(c1, c2);
}

double GlmmModel::observation_logpdf(const Vector& theta, std::size_t k, double x) const {
  const std::size_t ni = data_.obs_per_subject;
  const auto beta = theta.head(static_cast<Eigen::Index>(data_.covariate_dim()));
  double total = 0.0;
  for (std::size_t j = 0; j < ni; ++j) {
    const double eta = x + data_.covariates.row(static_cast<Eigen::Index>(k * ni + j)).dot(beta);
    total += data_.responses[k * ni + j] * eta - softplus(eta);
  }
  return total;
}

}  // namespace pmhmc
