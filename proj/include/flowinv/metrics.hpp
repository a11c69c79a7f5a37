#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowinv/tensor.hpp"

namespace flowinv {

/// Peak signal-to-noise ratio in dB: 10 log10(max_value^2 / MSE).
/// Identical tensors (MSE == 0) return +infinity as the documented sentinel.
inline double psnr(const Tensor& reference, const Tensor& candidate,
                   double max_value = 1.0) {
  if (max_value <= 0.0) throw std::invalid_argument("psnr: max_value must be > 0");
  double mse = mean_squared_error(reference, candidate);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

}  // namespace flowinv
