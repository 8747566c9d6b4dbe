#pragma once

// Schedule-free Adam. Three sequences are tracked: the base iterate z (plain
// Adam steps), the averaged iterate x (used for evaluation) and the
// interpolation y = (1 - beta1) z + beta1 x, where gradients are taken.
//
//   v  <- beta2 v + (1 - beta2) g^2
//   z  <- z - lr_t g / (sqrt(v / (1 - beta2^t)) + eps)
//   c  <- w_t / sum_{i<=t} w_i,    w_t = lr_max^2 (warmup-aware)
//   x  <- (1 - c) x + c z

#include "riskbo/core.hpp"

#include <Eigen/Dense>

namespace riskbo {

struct OptimizerState
{
  Eigen::VectorXd z;
  Eigen::VectorXd x;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t warmup_steps = 0;
  double lr_max = 0.0;
  double weight_sum = 0.0;

  static OptimizerState init(Eigen::VectorXd params, double learning_rate,
                             double beta1 = 0.9, double beta2 = 0.999)
  {
    OptimizerState s;
    s.z = params;
    s.x = std::move(params);
    s.v = Eigen::VectorXd::Zero(s.z.size());
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    return s;
  }

  // Point at which the next gradient must be evaluated.
  Eigen::VectorXd gradient_point() const { return (1.0 - beta1) * z + beta1 * x; }
  const Eigen::VectorXd& averaged() const noexcept { return x; }
};

inline void schedule_free_step_inplace(OptimizerState& s, const Eigen::VectorXd& grad)
{
  if (grad.size() != s.z.size())
    throw ShapeError("gradient has " + std::to_string(grad.size()) + " entries, optimizer has " +
                     std::to_string(s.z.size()));
  if (!grad.allFinite()) throw OptimizerError("non-finite gradient at step " + std::to_string(s.step));

  const double t = static_cast<double>(s.step + 1);
  const double sched =
    s.warmup_steps > 0 && s.step < s.warmup_steps ? t / static_cast<double>(s.warmup_steps) : 1.0;
  const double lr = s.learning_rate * sched;
  s.lr_max = std::max(s.lr_max, lr);
  const double weight = s.lr_max * s.lr_max;
  s.weight_sum += weight;
  const double c = s.weight_sum > 0.0 ? weight / s.weight_sum : 0.0;

  const double bias2 = 1.0 - std::pow(s.beta2, t);
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const Eigen::ArrayXd denom = (s.v.array() / bias2).sqrt() + s.eps;
  s.z.array() -= lr * grad.array() / denom;
  s.x = (1.0 - c) * s.x + c * s.z;
  ++s.step;
}

inline OptimizerState schedule_free_step(OptimizerState state, const Eigen::VectorXd& grad)
{
  schedule_free_step_inplace(state, grad);
  return state;
}

} // namespace riskbo
