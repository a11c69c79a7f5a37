#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "flowinv/tensor.hpp"

namespace flowinv {

/// State of one Adam optimization run over a single parameter tensor.
/// Single-owner per run.
struct AdamState {
  std::size_t step = 0;
  Tensor m;  // first moment
  Tensor v;  // second moment
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(const std::vector<std::size_t>& param_shape, double lr) {
    AdamState s;
    s.m = Tensor::zeros(param_shape);
    s.v = Tensor::zeros(param_shape);
    s.lr = lr;
    return s;
  }
};

/// Standard bias-corrected Adam update, applied to params in place.
inline void adam_step(AdamState& state, Tensor& params, const Tensor& grad) {
  if (!params.same_shape(grad) || !params.same_shape(state.m) ||
      !params.same_shape(state.v))
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace flowinv
