#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "flowinv/errors.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// Central-difference gradient (f(x+h e_i) - f(x-h e_i)) / (2h) per coordinate.
/// Gradient-check oracle; not used by any production gradient path.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                               const Tensor& x, double h = 1e-5) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Tensor grad = Tensor::zeros(x.shape);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    double fp = f(probe);
    probe[i] = x[i] - h;
    double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite value at coordinate " +
                         std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

/// Max relative coordinate error between two gradients, ignoring coordinates
/// where both are below `floor` in magnitude.
inline double max_relative_error(const Tensor& a, const Tensor& b,
                                 double floor = 1e-6) {
  check_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max(std::abs(a[i]), std::abs(b[i]));
    if (denom <= floor) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace flowinv
