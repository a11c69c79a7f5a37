#pragma once

#include <cmath>
#include <cstddef>

#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// Two-hidden-layer perceptron with tanh activations and a linear head.
/// Also doubles as its own gradient holder (same field layout).
struct Mlp {
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  std::size_t out_dim = 0;
  Tensor w1, b1;  // hidden x in, hidden
  Tensor w2, b2;  // hidden x hidden, hidden
  Tensor w3, b3;  // out x hidden, out

  static Mlp zeros(std::size_t in_dim, std::size_t hidden, std::size_t out_dim) {
    Mlp m;
    m.in_dim = in_dim;
    m.hidden = hidden;
    m.out_dim = out_dim;
    m.w1 = Tensor::zeros({hidden, in_dim});
    m.b1 = Tensor::zeros({hidden});
    m.w2 = Tensor::zeros({hidden, hidden});
    m.b2 = Tensor::zeros({hidden});
    m.w3 = Tensor::zeros({out_dim, hidden});
    m.b3 = Tensor::zeros({out_dim});
    return m;
  }

  /// Xavier-uniform hidden weights; zero head so the initial map is zero.
  static Mlp initialized(std::size_t in_dim, std::size_t hidden,
                         std::size_t out_dim, RngStream& rng) {
    Mlp m = zeros(in_dim, hidden, out_dim);
    auto xavier = [&](Tensor& w, std::size_t fan_in, std::size_t fan_out) {
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : w.data) v = rng.uniform(-limit, limit);
    };
    xavier(m.w1, in_dim, hidden);
    xavier(m.w2, hidden, hidden);
    // w3, b3 stay zero.
    return m;
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn(w1); fn(b1); fn(w2); fn(b2); fn(w3); fn(b3);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    fn(w1); fn(b1); fn(w2); fn(b2); fn(w3); fn(b3);
  }

  std::size_t param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
  }
};

/// Post-activation values kept for the backward pass.
struct MlpCache {
  Tensor input;
  Tensor h1, h2;  // tanh outputs
  Tensor out;
};

inline Tensor mlp_forward(const Mlp& m, const Tensor& input, MlpCache* cache = nullptr) {
  Tensor h1 = matvec(m.w1, input);
  for (std::size_t i = 0; i < h1.size(); ++i) h1[i] = std::tanh(h1[i] + m.b1[i]);
  Tensor h2 = matvec(m.w2, h1);
  for (std::size_t i = 0; i < h2.size(); ++i) h2[i] = std::tanh(h2[i] + m.b2[i]);
  Tensor out = matvec(m.w3, h2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += m.b3[i];
  if (cache) {
    cache->input = input;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->out = out;
    return cache->out;
  }
  return out;
}

/// Reverse-mode step: returns d<out_bar, out>/d(input) and, when `grads` is
/// non-null, accumulates parameter gradients into it (same layout as Mlp).
inline Tensor mlp_backward(const Mlp& m, const MlpCache& cache,
                           const Tensor& out_bar, Mlp* grads = nullptr) {
  // Head: out = w3 h2 + b3
  Tensor h2_bar = matvec_t(m.w3, out_bar);
  if (grads) {
    for (std::size_t r = 0; r < m.out_dim; ++r) {
      double g = out_bar[r];
      if (g == 0.0) continue;
      double* grow = grads->w3.data.data() + r * m.hidden;
      for (std::size_t c = 0; c < m.hidden; ++c) grow[c] += g * cache.h2[c];
      grads->b3[r] += g;
    }
  }
  // h2 = tanh(w2 h1 + b2)
  for (std::size_t i = 0; i < h2_bar.size(); ++i)
    h2_bar[i] *= 1.0 - cache.h2[i] * cache.h2[i];
  Tensor h1_bar = matvec_t(m.w2, h2_bar);
  if (grads) {
    for (std::size_t r = 0; r < m.hidden; ++r) {
      double g = h2_bar[r];
      if (g == 0.0) continue;
      double* grow = grads->w2.data.data() + r * m.hidden;
      for (std::size_t c = 0; c < m.hidden; ++c) grow[c] += g * cache.h1[c];
      grads->b2[r] += g;
    }
  }
  // h1 = tanh(w1 input + b1)
  for (std::size_t i = 0; i < h1_bar.size(); ++i)
    h1_bar[i] *= 1.0 - cache.h1[i] * cache.h1[i];
  Tensor input_bar = matvec_t(m.w1, h1_bar);
  if (grads) {
    for (std::size_t r = 0; r < m.hidden; ++r) {
      double g = h1_bar[r];
      if (g == 0.0) continue;
      double* grow = grads->w1.data.data() + r * m.in_dim;
      for (std::size_t c = 0; c < m.in_dim; ++c) grow[c] += g * cache.input[c];
      grads->b1[r] += g;
    }
  }
  return input_bar;
}

}  // namespace flowinv
