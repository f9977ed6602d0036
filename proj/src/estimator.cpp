#include "pmhmc/estimator.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pmhmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Returns log mean exp(log_w); -inf when every entry is -inf.
double log_mean_exp(const Eigen::Ref<const Vector>& log_w, double& max_out, double& sum_out) {
  const double m = log_w.maxCoeff();
  max_out = m;
  if (m == kNegInf) {
    sum_out = 0.0;
    return kNegInf;
  }
  const double s = (log_w.array() - m).exp().sum();
  sum_out = s;
  return m + std::log(s) - std::log(static_cast<double>(log_w.size()));
}
}  // namespace

void check_aux_shape(const LatentVariableModel& model, const AuxiliaryBlock& u) {
  const AuxShape& s = u.shape();
  if (s.data_count != model.data_count() || s.latent_dim != model.latent_dim())
    throw std::invalid_argument("auxiliary block shape does not match the model (T, p)");
  if (s.samples == 0 && s.data_count != 0) throw std::invalid_argument("auxiliary block needs N >= 1");
}

EstimatorEvaluation evaluate(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u,
                             bool with_gradients) {
  check_aux_shape(model, u);
  const std::size_t T = model.data_count();
  const auto N = static_cast<Eigen::Index>(u.shape().samples);
  const auto d = static_cast<Eigen::Index>(model.dim_theta());

  EstimatorEvaluation out;
  out.per_datum_log = Vector::Zero(static_cast<Eigen::Index>(T));
  out.has_gradients = with_gradients;
  if (with_gradients) {
    out.grad_theta = Vector::Zero(d);
    out.grad_u = AuxiliaryBlock(u.shape());
  }

  Vector log_w(N);
  Matrix gt, gu;
  double total = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    model.log_weights(theta, k, u.datum(k), log_w, with_gradients ? &gt : nullptr, with_gradients ? &gu : nullptr);
    double m = 0.0, s = 0.0;
    const double lk = log_mean_exp(log_w, m, s);
    out.per_datum_log[static_cast<Eigen::Index>(k)] = lk;
    if (lk == kNegInf) {
      out.zero_estimate = true;
      out.log_phat = kNegInf;
      return out;
    }
    total += lk;
    if (!with_gradients) continue;
    auto gu_out = out.grad_u.datum(k);
    for (Eigen::Index i = 0; i < N; ++i) {
      if (log_w[i] == kNegInf) continue;  // zero responsibility; its gradient is unspecified
      const double w = std::exp(log_w[i] - m) / s;
      out.grad_theta.noalias() += w * gt.col(i);
      gu_out.col(i) = w * gu.col(i);
    }
  }
  out.log_phat = total;
  return out;
}

double evaluate_datum(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u, std::size_t k) {
  const auto N = static_cast<Eigen::Index>(u.shape().samples);
  Vector log_w(N);
  model.log_weights(theta, k, u.datum(k), log_w, nullptr, nullptr);
  double m = 0.0, s = 0.0;
  return log_mean_exp(log_w, m, s);
}

WeightMatrix weight_matrix(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u) {
  check_aux_shape(model, u);
  const auto T = static_cast<Eigen::Index>(model.data_count());
  const auto N = static_cast<Eigen::Index>(u.shape().samples);
  WeightMatrix w{Matrix(T, N), Matrix(T, N)};
  Vector log_w(N);
  for (Eigen::Index k = 0; k < T; ++k) {
    model.log_weights(theta, static_cast<std::size_t>(k), u.datum(static_cast<std::size_t>(k)), log_w, nullptr,
                      nullptr);
    w.log_w.row(k) = log_w.transpose();
    const double m = log_w.maxCoeff();
    if (m == kNegInf) {
      w.softmax.row(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const Eigen::ArrayXd e = (log_w.array() - m).exp();
    w.softmax.row(k) = (e / e.sum()).matrix().transpose();
  }
  return w;
}

void write_weight_matrix_csv(std::ostream& out, const WeightMatrix& w) {
  out << std::setprecision(17) << "k,i,log_w,softmax\n";
  for (Eigen::Index k = 0; k < w.log_w.rows(); ++k)
    for (Eigen::Index i = 0; i < w.log_w.cols(); ++i)
      out << k << ',' << i << ',' << w.log_w(k, i) << ',' << w.softmax(k, i) << '\n';
}

UnbiasednessResult unbiasedness_check(const LatentVariableModel& model, const Vector& theta, std::size_t N,
                                      std::size_t M, std::uint64_t seed) {
  if (M == 0) throw std::invalid_argument("unbiasedness_check: M must be positive");
  if (N == 0) throw std::invalid_argument("unbiasedness_check: N must be positive");
  const std::size_t T = model.data_count();
  UnbiasednessResult r;
  r.exact_likelihood.resize(T);
  for (std::size_t k = 0; k < T; ++k) {
    auto exact = model.analytic_log_likelihood(theta, k);
    if (!exact) throw std::invalid_argument("unbiasedness_check: model '" + model.name() + "' has no analytic likelihood");
    r.exact_likelihood[k] = std::exp(*exact);
  }

  Rng rng(seed, 0x0b1a5);
  const AuxShape shape{T, N, model.latent_dim()};
  std::vector<double> sum(T, 0.0), sum_sq(T, 0.0);
  const auto n = static_cast<Eigen::Index>(N);
  Vector log_w(n);
  Matrix u(static_cast<Eigen::Index>(shape.latent_dim), n);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < T; ++k) {
      for (Eigen::Index c = 0; c < u.size(); ++c) u.data()[c] = rng.normal();
      model.log_weights(theta, k, u, log_w, nullptr, nullptr);
      const double est = log_w.array().exp().mean();
      sum[k] += est;
      sum_sq[k] += est * est;
    }
  }
  const auto Md = static_cast<double>(M);
  r.monte_carlo_mean.resize(T);
  r.z_score.resize(T);
  for (std::size_t k = 0; k < T; ++k) {
    const double mean = sum[k] / Md;
    const double var = std::max(sum_sq[k] / Md - mean * mean, 0.0) * Md / std::max(Md - 1.0, 1.0);
    const double se = std::sqrt(var / Md);
    r.monte_carlo_mean[k] = mean;
    r.z_score[k] = se > 0.0 ? (mean - r.exact_likelihood[k]) / se : 0.0;
  }
  return r;
}

}  // namespace pmhmc
