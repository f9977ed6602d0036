#pragma once

#include <vector>

#include "pmhmc/model.hpp"

namespace pmhmc {

struct NormalSummary {
  double mean = 0.0;
  double sd = 1.0;
};

struct GaussianParams {
  double sigma0_sq = 10.0;  ///< prior variance of theta
  double sigma1_sq = 0.1;   ///< latent variance around theta
  double sigma2_sq = 1.0;   ///< observation noise variance
};

/// theta ~ N(0, s0^2), X_k ~ N(theta, s1^2), Y_k | X_k ~ N(X_k, s2^2).
/// The importance density is the latent prior, so the weight is g(y_k | theta + s1 u).
class GaussianHierarchicalModel final : public LatentVariableModel {
 public:
  GaussianHierarchicalModel(GaussianParams params, std::vector<double> y);

  std::string name() const override { return "gaussian"; }
  std::size_t dim_theta() const override { return 1; }
  std::size_t data_count() const override { return y_.size(); }

  double prior_logpdf(const Vector& theta) const override;
  Vector prior_grad(const Vector& theta) const override;
  void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* grad_theta, Matrix* grad_u) const override;

  double draw_latent(const Vector& theta, std::size_t k, Rng& rng) const override;
  double latent_logpdf(const Vector& theta, double x) const override;
  double observation_logpdf(const Vector& theta, std::size_t k, double x) const override;
  std::optional<double> analytic_log_likelihood(const Vector& theta, std::size_t k) const override;

  /// Conjugate posterior of theta.
  NormalSummary posterior() const;
  /// d/dtheta [log p(theta) + log p(y | theta)].
  double marginal_score(double theta) const;

  const GaussianParams& params() const { return params_; }
  const std::vector<double>& y() const { return y_; }

 private:
  GaussianParams params_;
  std::vector<double> y_;
  double sigma1_;
};

/// log sinc^2(z) with sinc(z) = sin(z)/z. Writes d/dz into `derivative` when non-null.
/// Returns -inf at the nodes z = m*pi, m != 0.
double log_sinc_sq(double z, double* derivative = nullptr);

/// g(y | x, lambda) = (lambda*pi)^-1 sinc^2((y - x)/lambda).
double diffraction_density(double y, double x, double lambda);

/// X_k ~ N(mu, sigma^2), Y_k | X_k ~ g(. | X_k, lambda), theta = (mu, log sigma, log lambda).
/// Non-centred with the latent prior as importance density: x = mu + sigma u.
class DiffractionModel final : public LatentVariableModel {
 public:
  explicit DiffractionModel(std::vector<double> y, double prior_variance = 100.0);

  std::string name() const override { return "diffraction"; }
  std::size_t dim_theta() const override { return 3; }
  std::size_t data_count() const override { return y_.size(); }

  double prior_logpdf(const Vector& theta) const override;
  Vector prior_grad(const Vector& theta) const override;
  void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* grad_theta, Matrix* grad_u) const override;

  double draw_latent(const Vector& theta, std::size_t k, Rng& rng) const override;
  double latent_logpdf(const Vector& theta, double x) const override;
  double observation_logpdf(const Vector& theta, std::size_t k, double x) const override;

  const std::vector<double>& y() const { return y_; }

 private:
  std::vector<double> y_;
  double prior_variance_;
};

/// Two-component normal mixture density w1 N(mu1, 1/l1) + (1 - w1) N(mu2, 1/l2), in log space.
/// w1 may be exactly 0 or 1.
double mixture_logpdf(double x, double w1, double mu1, double lambda1, double mu2, double lambda2);

/// Subjects i = 1..T each with n_i binary responses and p-dim covariates.
struct GlmmData {
  std::size_t subjects = 0;
  std::size_t obs_per_subject = 0;
  Matrix covariates;            ///< (T * n_i) x p, row i * n_i + j
  std::vector<int> responses;   ///< T * n_i entries in {0, 1}

  std::size_t covariate_dim() const { return static_cast<std::size_t>(covariates.cols()); }
};

/// Logistic GLMM with two-component Gaussian-mixture random effects.
/// theta = (beta, mu1, mu2, log lambda1, log lambda2, logit w1); importance
/// density for each random effect is N(0, proposal_sd^2), x = proposal_sd * u.
class GlmmModel final : public LatentVariableModel {
 public:
  explicit GlmmModel(GlmmData data, double prior_variance = 100.0, double proposal_sd = 3.0);

  std::string name() const override { return "glmm"; }
  std::size_t dim_theta() const override { return data_.covariate_dim() + 5; }
  std::size_t data_count() const override { return data_.subjects; }

  double prior_logpdf(const Vector& theta) const override;
  Vector prior_grad(const Vector& theta) const override;
  void log_weights(const Vector& theta, std::size_t k, const Eigen::Ref<const Matrix>& u, Eigen::Ref<Vector> log_w,
                   Matrix* grad_theta, Matrix* grad_u) const override;

  double draw_latent(const Vector& theta, std::size_t k, Rng& rng) const override;
  double latent_logpdf(const Vector& theta, double x) const override;
  double observation_logpdf(const Vector& theta, std::size_t k, double x) const override;

  const GlmmData& data() const { return data_; }

  // Parameter slots within theta.
  std::size_t mu1_index() const { return data_.covariate_dim(); }
  std::size_t mu2_index() const { return data_.covariate_dim() + 1; }
  std::size_t log_lambda1_index() const { return data_.covariate_dim() + 2; }
  std::size_t log_lambda2_index() const { return data_.covariate_dim() + 3; }
  std::size_t logit_w1_index() const { return data_.covariate_dim() + 4; }

 private:
  GlmmData data_;
  double prior_variance_;
  double proposal_sd_;
};

}  // namespace pmhmc
