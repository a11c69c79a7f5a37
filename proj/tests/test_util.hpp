#pragma once

// Shared helpers for the test suites: model randomization and the
// brute-force Jacobian/determinant oracles. Oracles are independent of the
// library's analytic log-det and gradient paths.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flowinv/flow.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace testutil {

/// Flow with randomly perturbed conditioner parameters (non-identity map).
inline flowinv::FlowModel randomized_flow(std::size_t d, std::size_t layers,
                                          std::size_t hidden, std::uint64_t seed,
                                          double amplitude = 0.4) {
  flowinv::RngStream rng(seed);
  flowinv::FlowModel model = flowinv::make_flow(d, layers, hidden, rng);
  model.for_each_param([&](flowinv::Tensor& p) {
    for (double& v : p.data) v += rng.uniform(-amplitude, amplitude);
  });
  return model;
}

/// Coupling layer whose conditioner ignores its input: zero weights with
/// head biases fixed, so s_raw and t are constants.
inline flowinv::CouplingLayer constant_layer(std::vector<double> mask, double s_raw,
                                             double t, double s_clamp = 3.0) {
  std::size_t d = mask.size();
  flowinv::CouplingLayer layer;
  layer.mask = flowinv::Tensor::vector(std::move(mask));
  layer.conditioner = flowinv::Mlp::zeros(d, 4, 2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    layer.conditioner.b3[i] = s_raw;
    layer.conditioner.b3[d + i] = t;
  }
  layer.s_clamp = s_clamp;
  return layer;
}

/// log|det M| by LU decomposition with partial pivoting (test-only oracle).
inline double lu_slogdet(std::vector<std::vector<double>> m) {
  std::size_t n = m.size();
  double logdet = 0.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (m[pivot][col] == 0.0) throw std::runtime_error("lu_slogdet: singular matrix");
    std::swap(m[col], m[pivot]);
    logdet += std::log(std::abs(m[col][col]));
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return logdet;
}

/// Central finite-difference Jacobian of G^{-1} at x.
inline std::vector<std::vector<double>> fd_jacobian_inverse(
    const flowinv::FlowModel& model, const flowinv::Tensor& x, double h = 1e-5) {
  std::size_t d = x.size();
  std::vector<std::vector<double>> jac(d, std::vector<double>(d, 0.0));
  flowinv::Tensor probe = x;
  for (std::size_t j = 0; j < d; ++j) {
    probe[j] = x[j] + h;
    flowinv::Tensor zp = flowinv::flow_inverse(model, probe);
    probe[j] = x[j] - h;
    flowinv::Tensor zm = flowinv::flow_inverse(model, probe);
    probe[j] = x[j];
    for (std::size_t i = 0; i < d; ++i) jac[i][j] = (zp[i] - zm[i]) / (2.0 * h);
  }
  return jac;
}

/// Brute-force log|det J_{G^{-1}}(x)|: finite-difference Jacobian + slogdet.
inline double brute_force_inverse_logdet(const flowinv::FlowModel& model,
                                         const flowinv::Tensor& x) {
  return lu_slogdet(fd_jacobian_inverse(model, x));
}

}  // namespace testutil
