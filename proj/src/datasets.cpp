#include "pmhmc/datasets.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pmhmc/rng.hpp"

namespace pmhmc {

namespace {

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kInitStream = 0x1417;

const std::vector<double> kReferenceBeta = {-1.1671, 2.4665, -0.1918, -1.0080, 0.6212, 0.6524, 1.5410, 0.2653};
const std::vector<double> kReferenceBetaInit = {0.5838, 0.3805, -1.5062, -0.0442, 0.4717, -0.1435, 0.6371, -0.0522};

// Draws W with density sinc^2(w) / pi by rejection from a standard Cauchy:
// sinc^2(w) (1 + w^2) <= 2, so the envelope constant is 2.
double draw_sinc_sq(Rng& rng) {
  for (;;) {
    const double w = std::tan(std::numbers::pi * (rng.uniform_pos() - 0.5));
    const double s = (w == 0.0) ? 1.0 : std::sin(w) / w;
    if (rng.uniform() * 2.0 <= s * s * (1.0 + w * w)) return w;
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_cell(const std::string& cell) {
  std::size_t used = 0;
  const double v = std::stod(cell, &used);
  if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
    throw std::invalid_argument("dataset CSV: malformed number '" + cell + "'");
  return v;
}

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gaussian") return ModelKind::gaussian;
  if (name == "diffraction") return ModelKind::diffraction;
  if (name == "glmm") return ModelKind::glmm;
  throw ConfigError("unknown model name '" + std::string(name) + "' (expected gaussian, diffraction or glmm)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gaussian: return "gaussian";
    case ModelKind::diffraction: return "diffraction";
    case ModelKind::glmm: return "glmm";
  }
  return "unknown";
}

void ModelSpec::validate() const {
  if (T == 0) throw std::invalid_argument("model spec: T must be positive");
  if (!(gaussian.sigma0_sq > 0.0) || !(gaussian.sigma1_sq > 0.0) || !(gaussian.sigma2_sq > 0.0))
    throw std::invalid_argument("model spec: variances must be positive");
  if (!(sigma > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("model spec: sigma and lambda must be positive");
  if (!(prior_variance > 0.0) || !(proposal_sd > 0.0))
    throw std::invalid_argument("model spec: prior variance and proposal sd must be positive");
  if (kind == ModelKind::glmm) {
    if (obs_per_subject == 0) throw std::invalid_argument("model spec: n_i must be positive");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw std::invalid_argument("model spec: mixture precisions must be positive");
    if (!(w1 >= 0.0 && w1 <= 1.0)) throw std::invalid_argument("model spec: w1 must lie in [0, 1]");
    if (!beta.empty() && beta.size() != covariate_dim)
      throw std::invalid_argument("model spec: beta length must equal p_cov");
  }
}

ModelSpec model_spec_from_config(const Config& cfg) {
  ModelSpec s;
  s.kind = parse_model_kind(cfg.get_string("model.name"));
  switch (s.kind) {
    case ModelKind::gaussian: s.T = 30; break;
    case ModelKind::diffraction: s.T = 100; break;
    case ModelKind::glmm: s.T = 500; break;
  }
  s.T = cfg.get_size("model.T", s.T);
  s.gaussian.sigma0_sq = cfg.get_double("model.sigma0_sq", s.gaussian.sigma0_sq);
  s.gaussian.sigma1_sq = cfg.get_double("model.sigma1_sq", s.gaussian.sigma1_sq);
  s.gaussian.sigma2_sq = cfg.get_double("model.sigma2_sq", s.gaussian.sigma2_sq);
  if (cfg.has("model.theta")) s.theta_true = cfg.get_double("model.theta");
  s.mu = cfg.get_double("model.mu", s.mu);
  s.sigma = cfg.get_double("model.sigma", s.sigma);
  s.lambda = cfg.get_double("model.lambda", s.lambda);
  s.obs_per_subject = cfg.get_size("model.n_i", s.obs_per_subject);
  s.covariate_dim = cfg.get_size("model.p_cov", s.covariate_dim);
  if (cfg.has("model.beta")) s.beta = cfg.get_list("model.beta");
  s.mu1 = cfg.get_double("model.mu1", s.mu1);
  s.mu2 = cfg.get_double("model.mu2", s.mu2);
  s.lambda1 = cfg.get_double("model.lambda1", s.lambda1);
  s.lambda2 = cfg.get_double("model.lambda2", s.lambda2);
  s.w1 = cfg.get_double("model.w1", s.w1);
  s.prior_variance = cfg.get_double("model.prior_variance", s.prior_variance);
  s.proposal_sd = cfg.get_double("model.proposal_sd", s.proposal_sd);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::vector<double> default_glmm_beta(std::size_t covariate_dim, std::uint64_t seed) {
  if (covariate_dim <= kReferenceBeta.size())
    return {kReferenceBeta.begin(), kReferenceBeta.begin() + static_cast<std::ptrdiff_t>(covariate_dim)};
  Rng rng(seed, kDataStream + 1);
  std::vector<double> beta(covariate_dim);
  for (double& b : beta) b = rng.normal();
  return beta;
}

Dataset generate_synthetic_data(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, kDataStream);
  Dataset data;
  data.kind = spec.kind;
  switch (spec.kind) {
    case ModelKind::gaussian: {
      const double theta = spec.theta_true ? *spec.theta_true : std::sqrt(spec.gaussian.sigma0_sq) * rng.normal();
      const double s1 = std::sqrt(spec.gaussian.sigma1_sq);
      const double s2 = std::sqrt(spec.gaussian.sigma2_sq);
      data.y.resize(spec.T);
      for (double& y : data.y) {
        const double x = theta + s1 * rng.normal();
        y = x + s2 * rng.normal();
      }
      break;
    }
    case ModelKind::diffraction: {
      data.y.resize(spec.T);
      for (double& y : data.y) {
        const double x = spec.mu + spec.sigma * rng.normal();
        y = x + spec.lambda * draw_sinc_sq(rng);
      }
      break;
    }
    case ModelKind::glmm: {
      const std::size_t p = spec.covariate_dim;
      const std::size_t ni = spec.obs_per_subject;
      const std::vector<double> beta = spec.beta.empty() ? default_glmm_beta(p, seed) : spec.beta;
      GlmmData& g = data.glmm;
      g.subjects = spec.T;
      g.obs_per_subject = ni;
      g.covariates.resize(static_cast<Eigen::Index>(spec.T * ni), static_cast<Eigen::Index>(p));
      g.responses.resize(spec.T * ni);
      for (std::size_t k = 0; k < spec.T; ++k) {
        const bool first = rng.uniform() < spec.w1;
        const double x = first ? spec.mu1 + rng.normal() / std::sqrt(spec.lambda1)
                               : spec.mu2 + rng.normal() / std::sqrt(spec.lambda2);
        for (std::size_t j = 0; j < ni; ++j) {
          const auto row = static_cast<Eigen::Index>(k * ni + j);
          double eta = x;
          for (std::size_t c = 0; c < p; ++c) {
            const double z = rng.normal();
            g.covariates(row, static_cast<Eigen::Index>(c)) = z;
            eta += z * beta[c];
          }
          const double prob = 1.0 / (1.0 + std::exp(-eta));
          g.responses[k * ni + j] = rng.uniform() < prob ? 1 : 0;
        }
      }
      break;
    }
  }
  return data;
}

std::unique_ptr<LatentVariableModel> make_model(const ModelSpec& spec, Dataset data) {
  if (data.kind != spec.kind) throw std::invalid_argument("make_model: dataset kind does not match model spec");
  switch (spec.kind) {
    case ModelKind::gaussian: return std::make_unique<GaussianHierarchicalModel>(spec.gaussian, std::move(data.y));
    case ModelKind::diffraction: return std::make_unique<DiffractionModel>(std::move(data.y), spec.prior_variance);
    case ModelKind::glmm:
      return std::make_unique<GlmmModel>(std::move(data.glmm), spec.prior_variance, spec.proposal_sd);
  }
  throw std::invalid_argument("make_model: unknown model kind");
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << std::setprecision(17);
  if (data.kind != ModelKind::glmm) {
    out << "k,y\n";
    for (std::size_t k = 0; k < data.y.size(); ++k) out << k << ',' << data.y[k] << '\n';
    return;
  }
  const GlmmData& g = data.glmm;
  out << "subject,obs,y";
  for (std::size_t c = 0; c < g.covariate_dim(); ++c) out << ",z_" << c;
  out << '\n';
  for (std::size_t k = 0; k < g.subjects; ++k) {
    for (std::size_t j = 0; j < g.obs_per_subject; ++j) {
      const std::size_t row = k * g.obs_per_subject + j;
      out << k << ',' << j << ',' << g.responses[row];
      for (std::size_t c = 0; c < g.covariate_dim(); ++c)
        out << ',' << g.covariates(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c));
      out << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in, ModelKind kind) {
  Dataset data;
  data.kind = kind;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset CSV: missing header");
  const auto header = split_csv(line);
  if (kind != ModelKind::glmm) {
    if (header.size() != 2 || header[1].rfind('y', 0) != 0) throw std::invalid_argument("dataset CSV: expected header k,y");
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv(line);
      if (cells.size() != 2) throw std::invalid_argument("dataset CSV: expected 2 columns");
      data.y.push_back(parse_cell(cells[1]));
    }
    return data;
  }
  if (header.size() < 3) throw std::invalid_argument("dataset CSV: expected header subject,obs,y,z_...");
  const std::size_t p = header.size() - 3;
  std::vector<std::vector<double>> rows;
  std::size_t max_subject = 0;
  std::size_t max_obs = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != p + 3) throw std::invalid_argument("dataset CSV: ragged row");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_cell(c));
    max_subject = std::max(max_subject, static_cast<std::size_t>(r[0]));
    max_obs = std::max(max_obs, static_cast<std::size_t>(r[1]));
    rows.push_back(std::move(r));
  }
  GlmmData& g = data.glmm;
  g.subjects = rows.empty() ? 0 : max_subject + 1;
  g.obs_per_subject = rows.empty() ? 0 : max_obs + 1;
  if (rows.size() != g.subjects * g.obs_per_subject) throw std::invalid_argument("dataset CSV: incomplete GLMM grid");
  g.covariates.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  g.responses.assign(rows.size(), 0);
  for (const auto& r : rows) {
    const auto row = static_cast<std::size_t>(r[0]) * g.obs_per_subject + static_cast<std::size_t>(r[1]);
    g.responses[row] = static_cast<int>(r[2]);
    for (std::size_t c = 0; c < p; ++c)
      g.covariates(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = r[3 + c];
  }
  return data;
}

Vector default_initial_theta(const ModelSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::gaussian: return Vector::Zero(1);
    case ModelKind::diffraction: return Vector::Zero(3);
    case ModelKind::glmm: {
      const std::size_t p = spec.covariate_dim;
      Vector theta(static_cast<Eigen::Index>(p + 5));
      if (p <= kReferenceBetaInit.size()) {
        for (std::size_t c = 0; c < p; ++c) theta[static_cast<Eigen::Index>(c)] = kReferenceBetaInit[c];
      } else {
        Rng rng(seed, kInitStream);
        for (std::size_t c = 0; c < p; ++c) theta[static_cast<Eigen::Index>(c)] = rng.normal();
      }
      const auto base = static_cast<Eigen::Index>(p);
      theta[base] = 0.0;
      theta[base + 1] = 0.0;
      theta[base + 2] = std::log(1.0);
      theta[base + 3] = std::log(0.1);
      theta[base + 4] = 0.0;
      return theta;
    }
  }
  return {};
}

std::optional<Vector> true_theta(const ModelSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::gaussian:
      if (spec.theta_true) return Vector::Constant(1, *spec.theta_true);
      return std::nullopt;
    case ModelKind::diffraction: {
      Vector t(3);
      t << spec.mu, std::log(spec.sigma), std::log(spec.lambda);
      return t;
    }
    case ModelKind::glmm: {
      const std::vector<double> beta = spec.beta.empty() ? default_glmm_beta(spec.covariate_dim, seed) : spec.beta;
      Vector t(static_cast<Eigen::Index>(beta.size() + 5));
      for (std::size_t c = 0; c < beta.size(); ++c) t[static_cast<Eigen::Index>(c)] = beta[c];
      const auto b = static_cast<Eigen::Index>(beta.size());
      t[b] = spec.mu1;
      t[b + 1] = spec.mu2;
      t[b + 2] = std::log(spec.lambda1);
      t[b + 3] = std::log(spec.lambda2);
      t[b + 4] = std::log(spec.w1 / (1.0 - spec.w1));
      return t;
    }
  }
  return std::nullopt;
}

}  // namespace pmhmc
