#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pmhmc/model.hpp"
#include "pmhmc/state.hpp"

namespace pmhmc {

/// log p_hat(y | theta, u) with its gradients, from one pass over the weights.
///
/// When some datum has all N weights equal to zero the estimate is zero:
/// `zero_estimate` is set, `log_phat` is -inf and the gradients must not be used.
struct EstimatorEvaluation {
  double log_phat = 0.0;
  Vector grad_theta;
  AuxiliaryBlock grad_u;
  Vector per_datum_log;
  bool zero_estimate = false;
  bool has_gradients = false;
};

/// Per-sample log-weights and their per-datum normalised weights (T x N).
struct WeightMatrix {
  Matrix log_w;
  Matrix softmax;
};

/// Importance-sampling estimate
///   p_hat(y_k | theta, u_k) = (1/N) sum_i w_theta(y_k, u_{k,i}),
/// with every per-datum sum done by log-sum-exp. The gradients are
///   grad_theta = sum_k sum_i s_{k,i} grad_theta log w_{k,i},
///   grad_u[k][i] = s_{k,i} grad_u log w_{k,i},
/// where s_{k,i} is the softmax of the log-weights of datum k.
EstimatorEvaluation evaluate(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u,
                             bool with_gradients = true);

/// log p_hat(y_k | theta, u_k) for a single datum (value only).
double evaluate_datum(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u, std::size_t k);

WeightMatrix weight_matrix(const LatentVariableModel& model, const Vector& theta, const AuxiliaryBlock& u);

/// CSV with columns k, i, log_w, softmax.
void write_weight_matrix_csv(std::ostream& out, const WeightMatrix& w);

/// Per-datum Monte Carlo check of E[p_hat(y_k | theta, U_k)] = p(y_k | theta).
struct UnbiasednessResult {
  std::vector<double> monte_carlo_mean;
  std::vector<double> exact_likelihood;
  std::vector<double> z_score;
};

/// Averages exp(per-datum log estimate) over M fresh standard-normal u blocks
/// of N samples each. Requires a model with an analytic likelihood; throws
/// std::invalid_argument otherwise or when M == 0.
UnbiasednessResult unbiasedness_check(const LatentVariableModel& model, const Vector& theta, std::size_t N,
                                      std::size_t M, std::uint64_t seed);

/// Throws std::invalid_argument unless u matches the model's (T, ., p) and has N >= 1.
void check_aux_shape(const LatentVariableModel& model, const AuxiliaryBlock& u);

}  // namespace pmhmc
