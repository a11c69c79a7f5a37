#pragma once

#include <cmath>
#include <utility>

#include "flowinv/flow.hpp"
#include "flowinv/forward_op.hpp"
#include "flowinv/noise.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

struct LossEval {
  double loss = 0.0;
  Tensor grad;  // with respect to the optimization variable
};

/// Smoothed MAP loss in latent space:
///   L(z) = -log p_noise(x~ - f(G(z))) - beta * log p_model(G(z)).
/// The gradient is assembled from the public pieces: the noise score pulled
/// back through the operator VJP and G's VJP, plus beta times the model score
/// pulled back through G's VJP.
inline LossEval map_loss(const FlowModel& model, const NoiseModel& nm,
                         const ForwardOperator& op, const Tensor& z,
                         const Tensor& x_tilde, double beta) {
  Tensor x = flow_forward(model, z);
  Tensor residual = sub(x_tilde, apply_forward(op, x));
  double loss = -noise_log_prob(nm, residual);
  Tensor x_bar = forward_vjp(op, x, noise_grad_log_prob(nm, residual));
  if (beta != 0.0) {
    loss -= beta * flow_log_prob(model, x);
    add_scaled(x_bar, flow_grad_logprob_x(model, x), -beta);
  }
  return {loss, flow_grad_z(model, z, x_bar)};
}

/// MLE loss: noise likelihood only; identical to map_loss with beta = 0.
inline LossEval mle_loss(const FlowModel& model, const NoiseModel& nm,
                         const ForwardOperator& op, const Tensor& z,
                         const Tensor& x_tilde) {
  return map_loss(model, nm, op, z, x_tilde, 0.0);
}

/// x-space variant of the smoothed MAP loss (optimization in image space).
inline LossEval map_loss_x(const FlowModel& model, const NoiseModel& nm,
                           const ForwardOperator& op, const Tensor& x,
                           const Tensor& x_tilde, double beta) {
  Tensor residual = sub(x_tilde, apply_forward(op, x));
  double loss = -noise_log_prob(nm, residual);
  Tensor x_bar = forward_vjp(op, x, noise_grad_log_prob(nm, residual));
  if (beta != 0.0) {
    loss -= beta * flow_log_prob(model, x);
    add_scaled(x_bar, flow_grad_logprob_x(model, x), -beta);
  }
  return {loss, std::move(x_bar)};
}

/// Range projection with l2 latent regularization:
///   L(z) = ||x~ - f(G(z))||^2 + lambda ||z||^2.
inline LossEval bora_loss(const FlowModel& generator, const ForwardOperator& op,
                          const Tensor& z, const Tensor& x_tilde, double lambda) {
  Tensor x = flow_forward(generator, z);
  Tensor residual = sub(x_tilde, apply_forward(op, x));
  double loss = dot(residual, residual) + lambda * dot(z, z);
  Tensor x_bar = forward_vjp(op, x, scaled(residual, -2.0));
  Tensor grad = flow_grad_z(generator, z, x_bar);
  add_scaled(grad, z, 2.0 * lambda);
  return {loss, std::move(grad)};
}

/// Proxy loss with unsquared latent norm:
///   L(z) = ||x~ - f(G(z))||^2 + gamma ||z||.
/// The regularizer subgradient at z = 0 is taken as 0.
inline LossEval hand_loss(const FlowModel& generator, const ForwardOperator& op,
                          const Tensor& z, const Tensor& x_tilde, double gamma) {
  Tensor x = flow_forward(generator, z);
  Tensor residual = sub(x_tilde, apply_forward(op, x));
  double znorm = norm2(z);
  double loss = dot(residual, residual) + gamma * znorm;
  Tensor x_bar = forward_vjp(op, x, scaled(residual, -2.0));
  Tensor grad = flow_grad_z(generator, z, x_bar);
  if (gamma != 0.0 && znorm > 0.0) add_scaled(grad, z, gamma / znorm);
  return {loss, std::move(grad)};
}

}  // namespace flowinv
