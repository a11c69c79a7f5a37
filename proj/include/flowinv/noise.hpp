#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>

#include "flowinv/flow.hpp"
#include "flowinv/forward_op.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

inline constexpr double kSigmaFloor = 0.001;

/// Standard deviation of the k-th pixel/row for the sinusoidal noise pattern:
/// amplitude * (exp(sin(2 pi k / 16)) - 1) / (e - 1), clamped to [0.001, 1].
inline double sinusoidal_sigma(std::size_t k, double amplitude = 0.1) {
  double raw = amplitude * (std::exp(std::sin(2.0 * M_PI * static_cast<double>(k) / 16.0)) - 1.0) /
               (std::exp(1.0) - 1.0);
  return std::clamp(raw, 0.001, 1.0);
}

/// Standard deviation at pixel (row, col) for the radial noise pattern:
/// amplitude * exp(-0.005 * dist^2) with dist the euclidean distance to the
/// center pixel, clamped to [0.001, 1000].
inline double radial_sigma(double row, double col, double center_row,
                           double center_col, double amplitude = 0.1) {
  double dr = row - center_row, dc = col - center_col;
  double raw = amplitude * std::exp(-0.005 * (dr * dr + dc * dc));
  return std::clamp(raw, 0.001, 1000.0);
}

/// Per-coordinate sigma for an h x w x c image with row-wise sinusoidal noise
/// (every pixel in row k shares sigma_k).
inline Tensor sinusoidal_sigma_image(std::size_t h, std::size_t w, std::size_t c,
                                     double amplitude = 0.1) {
  Tensor s = Tensor::zeros({h * w * c});
  for (std::size_t i = 0; i < h; ++i) {
    double sk = sinusoidal_sigma(i, amplitude);
    for (std::size_t j = 0; j < w * c; ++j) s[i * w * c + j] = sk;
  }
  return s;
}

/// Per-coordinate sigma for an m-dimensional measurement vector.
inline Tensor sinusoidal_sigma_vector(std::size_t m, double amplitude = 0.1) {
  Tensor s = Tensor::zeros({m});
  for (std::size_t k = 0; k < m; ++k) s[k] = sinusoidal_sigma(k, amplitude);
  return s;
}

/// Per-pixel sigma for an h x w x c image with radially decaying noise
/// centered at pixel (floor((h-1)/2), floor((w-1)/2)).
inline Tensor radial_sigma_image(std::size_t h, std::size_t w, std::size_t c,
                                 double amplitude = 0.1) {
  double cr = std::floor(static_cast<double>(h - 1) / 2.0);
  double cc = std::floor(static_cast<double>(w - 1) / 2.0);
  Tensor s = Tensor::zeros({h * w * c});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double sk = radial_sigma(static_cast<double>(i), static_cast<double>(j), cr, cc,
                               amplitude);
      for (std::size_t ch = 0; ch < c; ++ch) s[(i * w + j) * c + ch] = sk;
    }
  return s;
}

/// Additive noise density with log-prob, score, and sampling.
/// Immutable after construction; shareable read-only.
struct NoiseModel {
  enum class Kind { iso_gauss, diag_gauss, flow };

  Kind kind = Kind::iso_gauss;
  std::size_t dim = 0;
  double sigma = 1.0;  // iso_gauss
  double mean = 0.0;   // iso/diag shared scalar mean
  Tensor sigmas;       // diag_gauss
  std::shared_ptr<const FlowModel> prior;  // flow kind
  double shift = 0.0;
  double scale = 1.0;

  /// sigma is clamped to the 0.001 floor.
  static NoiseModel iso_gauss(std::size_t m, double sigma, double mean = 0.0) {
    if (sigma < 0.0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
    NoiseModel nm = iso_gauss_exact(m, std::max(sigma, kSigmaFloor));
    nm.mean = mean;
    return nm;
  }

  /// Unclamped variant; sigma = 0 is allowed for noiseless observation
  /// synthesis only (log_prob/grad reject it).
  static NoiseModel iso_gauss_exact(std::size_t m, double sigma) {
    if (m < 1) throw std::invalid_argument("NoiseModel: dimension must be >= 1");
    if (sigma < 0.0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
    NoiseModel nm;
    nm.kind = Kind::iso_gauss;
    nm.dim = m;
    nm.sigma = sigma;
    return nm;
  }

  /// Per-coordinate sigmas, each clamped to the 0.001 floor.
  static NoiseModel diag_gauss(Tensor sigma_vector, double mean = 0.0) {
    if (sigma_vector.size() < 1)
      throw std::invalid_argument("NoiseModel: sigma vector must be non-empty");
    for (double& s : sigma_vector.data) {
      if (s < 0.0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
      s = std::max(s, kSigmaFloor);
    }
    NoiseModel nm;
    nm.kind = Kind::diag_gauss;
    nm.dim = sigma_vector.size();
    nm.sigmas = std::move(sigma_vector);
    nm.mean = mean;
    return nm;
  }

  /// Noise as an affinely placed flow sample: delta = shift + scale * u with
  /// u drawn from the wrapped model.
  static NoiseModel flow_noise(std::shared_ptr<const FlowModel> model, double shift,
                               double scale) {
    if (!model) throw std::invalid_argument("NoiseModel: null flow model");
    if (scale <= 0.0) throw std::invalid_argument("NoiseModel: scale must be > 0");
    NoiseModel nm;
    nm.kind = Kind::flow;
    nm.dim = model->d;
    nm.prior = std::move(model);
    nm.shift = shift;
    nm.scale = scale;
    return nm;
  }
};

inline double noise_log_prob(const NoiseModel& nm, const Tensor& delta) {
  if (delta.size() != nm.dim)
    throw std::invalid_argument("noise_log_prob: dimension mismatch");
  switch (nm.kind) {
    case NoiseModel::Kind::iso_gauss: {
      if (nm.sigma <= 0.0)
        throw std::invalid_argument("noise_log_prob: degenerate sigma = 0");
      double lp = 0.0;
      for (double v : delta.data) {
        double u = (v - nm.mean) / nm.sigma;
        lp += -0.5 * std::log(2.0 * M_PI * nm.sigma * nm.sigma) - 0.5 * u * u;
      }
      return lp;
    }
    case NoiseModel::Kind::diag_gauss: {
      double lp = 0.0;
      for (std::size_t i = 0; i < nm.dim; ++i) {
        double s = nm.sigmas[i];
        double u = (delta[i] - nm.mean) / s;
        lp += -0.5 * std::log(2.0 * M_PI * s * s) - 0.5 * u * u;
      }
      return lp;
    }
    case NoiseModel::Kind::flow: {
      Tensor u = delta;
      for (double& v : u.data) v = (v - nm.shift) / nm.scale;
      return flow_log_prob(*nm.prior, u) -
             static_cast<double>(nm.dim) * std::log(nm.scale);
    }
  }
  throw std::invalid_argument("noise_log_prob: unknown kind");
}

inline Tensor noise_grad_log_prob(const NoiseModel& nm, const Tensor& delta) {
  if (delta.size() != nm.dim)
    throw std::invalid_argument("noise_grad_log_prob: dimension mismatch");
  switch (nm.kind) {
    case NoiseModel::Kind::iso_gauss: {
      if (nm.sigma <= 0.0)
        throw std::invalid_argument("noise_grad_log_prob: degenerate sigma = 0");
      Tensor g = delta;
      for (double& v : g.data) v = -(v - nm.mean) / (nm.sigma * nm.sigma);
      return g;
    }
    case NoiseModel::Kind::diag_gauss: {
      Tensor g = delta;
      for (std::size_t i = 0; i < nm.dim; ++i)
        g[i] = -(delta[i] - nm.mean) / (nm.sigmas[i] * nm.sigmas[i]);
      return g;
    }
    case NoiseModel::Kind::flow: {
      Tensor u = delta;
      for (double& v : u.data) v = (v - nm.shift) / nm.scale;
      Tensor g = flow_grad_logprob_x(*nm.prior, u);
      scale(g, 1.0 / nm.scale);
      return g;
    }
  }
  throw std::invalid_argument("noise_grad_log_prob: unknown kind");
}

inline Tensor sample_noise(const NoiseModel& nm, RngStream& rng) {
  switch (nm.kind) {
    case NoiseModel::Kind::iso_gauss:
      return gaussian_sample(rng, {nm.dim}, nm.mean, nm.sigma);
    case NoiseModel::Kind::diag_gauss: {
      Tensor d = Tensor::zeros({nm.dim});
      for (std::size_t i = 0; i < nm.dim; ++i)
        d[i] = nm.mean + nm.sigmas[i] * rng.gaussian();
      return d;
    }
    case NoiseModel::Kind::flow: {
      Tensor row = flow_sample(*nm.prior, rng, 1);
      Tensor d = Tensor::zeros({nm.dim});
      for (std::size_t i = 0; i < nm.dim; ++i) d[i] = nm.shift + nm.scale * row[i];
      return d;
    }
  }
  throw std::invalid_argument("sample_noise: unknown kind");
}

/// x~ = f(x) + delta with delta drawn from the noise model.
inline Tensor make_observation(const ForwardOperator& op, const NoiseModel& nm,
                               const Tensor& x, RngStream& rng) {
  Tensor y = apply_forward(op, x);
  if (nm.dim != y.size())
    throw std::invalid_argument("make_observation: noise/operator dimension mismatch");
  Tensor delta = sample_noise(nm, rng);
  add_scaled(y, delta, 1.0);
  return y;
}

}  // namespace flowinv
