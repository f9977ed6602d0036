#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmhmc/config.hpp"
#include "pmhmc/models.hpp"

namespace pmhmc {

enum class ModelKind { gaussian, diffraction, glmm };

ModelKind parse_model_kind(std::string_view name);
std::string to_string(ModelKind kind);

/// Generative configuration of one of the bundled models.
struct ModelSpec {
  ModelKind kind = ModelKind::gaussian;
  std::size_t T = 30;

  // gaussian
  GaussianParams gaussian;
  std::optional<double> theta_true;  ///< drawn from the prior when unset

  // diffraction
  double mu = 1.0;
  double sigma = 1.0;
  double lambda = 0.1;

  // glmm
  std::size_t obs_per_subject = 6;
  std::size_t covariate_dim = 8;
  std::vector<double> beta;  ///< empty: defaults (see default_glmm_beta)
  double mu1 = 0.0;
  double mu2 = 3.0;
  double lambda1 = 10.0;
  double lambda2 = 3.0;
  double w1 = 0.8;

  double prior_variance = 100.0;  ///< diffraction and glmm theta prior
  double proposal_sd = 3.0;       ///< glmm importance density sd

  /// Throws std::invalid_argument on non-positive variances, T = 0, etc.
  void validate() const;
};

/// Reads `model.*` keys. Throws ConfigError for unknown models or malformed values.
ModelSpec model_spec_from_config(const Config& cfg);

/// Fixed effects used for data generation: the reference vector truncated to
/// p entries when p <= 8, otherwise standard normal draws from `seed`.
std::vector<double> default_glmm_beta(std::size_t covariate_dim, std::uint64_t seed);

struct Dataset {
  ModelKind kind = ModelKind::gaussian;
  std::vector<double> y;  ///< gaussian / diffraction observations
  GlmmData glmm;          ///< glmm only

  std::size_t size() const { return kind == ModelKind::glmm ? glmm.subjects : y.size(); }
};

/// Deterministic given (spec, seed).
Dataset generate_synthetic_data(const ModelSpec& spec, std::uint64_t seed);

std::unique_ptr<LatentVariableModel> make_model(const ModelSpec& spec, Dataset data);

/// CSV with header. Scalar models: `k,y`. GLMM: `subject,obs,y,z_0,...,z_{p-1}`.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, ModelKind kind);

/// Initial theta on the unconstrained scale. GLMM follows the reference
/// initialisation (beta_init truncated, mu = 0, lambda = (1, 0.1), w1 = 0.5).
Vector default_initial_theta(const ModelSpec& spec, std::uint64_t seed);

/// Generating parameter on the unconstrained scale (gaussian: theta_true when set).
std::optional<Vector> true_theta(const ModelSpec& spec, std::uint64_t seed);

}  // namespace pmhmc
