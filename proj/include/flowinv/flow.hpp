#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowinv/errors.hpp"
#include "flowinv/mlp.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// Affine coupling layer. mask_i == 1 coordinates pass through unchanged and
/// feed the conditioner; mask_i == 0 coordinates receive the affine update.
/// Scale outputs are clamped to |s| <= s_clamp, so the layer is always
/// invertible and the log-det is bounded by d * s_clamp.
struct CouplingLayer {
  Tensor mask;      // length d, entries 0 or 1
  Mlp conditioner;  // d -> 2d: (s_raw, t)
  double s_clamp = 3.0;
  std::size_t index = 0;  // position in the model, for error messages
};

/// Conditioner evaluation shared by forward, inverse and their backwards.
struct CondEval {
  MlpCache mlp_cache;
  Tensor s;          // clamped scale, zero at pass-through coordinates
  Tensor t;          // shift, zero at pass-through coordinates
  Tensor tanh_sraw;  // tanh of raw scale head, for the backward pass
};

namespace detail {

inline void eval_conditioner(const CouplingLayer& layer, const Tensor& reference,
                             CondEval& ev) {
  const std::size_t d = layer.mask.size();
  Tensor masked_in = reference;
  for (std::size_t i = 0; i < d; ++i) masked_in[i] *= layer.mask[i];
  const Tensor& raw = mlp_forward(layer.conditioner, masked_in, &ev.mlp_cache);
  for (double v : raw.data)
    if (!std::isfinite(v))
      throw NumericError("coupling layer " + std::to_string(layer.index) +
                         ": non-finite conditioner output");
  ev.s = Tensor::zeros({d});
  ev.t = Tensor::zeros({d});
  ev.tanh_sraw = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) {
    double th = std::tanh(raw[i]);
    ev.tanh_sraw[i] = th;
    if (layer.mask[i] == 0.0) {
      ev.s[i] = layer.s_clamp * th;
      ev.t[i] = raw[d + i];
    }
  }
}

/// Backprop from (s_bar, t_bar) through the conditioner to the layer input.
/// Returns the contribution to the input gradient; accumulates parameter
/// gradients when grads != nullptr.
inline Tensor conditioner_backward(const CouplingLayer& layer, const CondEval& ev,
                                   const Tensor& s_bar, const Tensor& t_bar,
                                   Mlp* grads) {
  const std::size_t d = layer.mask.size();
  Tensor out_bar = Tensor::zeros({2 * d});
  for (std::size_t i = 0; i < d; ++i) {
    if (layer.mask[i] != 0.0) continue;
    double th = ev.tanh_sraw[i];
    out_bar[i] = s_bar[i] * layer.s_clamp * (1.0 - th * th);
    out_bar[d + i] = t_bar[i];
  }
  Tensor in_bar = mlp_backward(layer.conditioner, ev.mlp_cache, out_bar, grads);
  for (std::size_t i = 0; i < d; ++i) in_bar[i] *= layer.mask[i];
  return in_bar;
}

}  // namespace detail

/// y = mask*x + (1-mask)*(x*exp(s) + t), logdet = sum of s over updated coords.
inline std::pair<Tensor, double> coupling_forward(const CouplingLayer& layer,
                                                  const Tensor& x,
                                                  CondEval* cache = nullptr) {
  if (x.size() != layer.mask.size())
    throw std::invalid_argument("coupling_forward: dimension mismatch");
  CondEval local;
  CondEval& ev = cache ? *cache : local;
  detail::eval_conditioner(layer, x, ev);
  Tensor y = x;
  double logdet = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] * std::exp(ev.s[i]) + ev.t[i];
    logdet += ev.s[i];
  }
  return {std::move(y), logdet};
}

/// Exact algebraic inverse; logdet_inverse = -logdet of the forward at the
/// recovered point.
inline std::pair<Tensor, double> coupling_inverse(const CouplingLayer& layer,
                                                  const Tensor& y,
                                                  CondEval* cache = nullptr) {
  if (y.size() != layer.mask.size())
    throw std::invalid_argument("coupling_inverse: dimension mismatch");
  CondEval local;
  CondEval& ev = cache ? *cache : local;
  detail::eval_conditioner(layer, y, ev);
  Tensor x = y;
  double logdet_inv = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    x[i] = (y[i] - ev.t[i]) * std::exp(-ev.s[i]);
    logdet_inv -= ev.s[i];
  }
  return {std::move(x), logdet_inv};
}

/// VJP of the forward map: returns J^T * upstream at x.
inline Tensor coupling_forward_vjp(const CouplingLayer& layer, const Tensor& x,
                                   const Tensor& upstream) {
  CondEval ev;
  detail::eval_conditioner(layer, x, ev);
  const std::size_t d = x.size();
  Tensor x_bar = Tensor::zeros({d});
  Tensor s_bar = Tensor::zeros({d});
  Tensor t_bar = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) {
    double es = std::exp(ev.s[i]);
    x_bar[i] = upstream[i] * es;
    s_bar[i] = upstream[i] * x[i] * es;
    t_bar[i] = upstream[i];
  }
  Tensor in_bar = detail::conditioner_backward(layer, ev, s_bar, t_bar, nullptr);
  add_scaled(x_bar, in_bar, 1.0);
  return x_bar;
}

/// Reverse-mode step through the inverse map plus its log-det term.
/// Computes the gradient of  <upstream, x(y)> + logdet_weight * logdet_inv(y)
/// with respect to y, where x = coupling_inverse(layer, y). Accumulates
/// conditioner parameter gradients when grads != nullptr.
inline Tensor coupling_inverse_vjp(const CouplingLayer& layer, const CondEval& ev,
                                   const Tensor& x_out, const Tensor& upstream,
                                   double logdet_weight, Mlp* grads = nullptr) {
  const std::size_t d = x_out.size();
  Tensor y_bar = Tensor::zeros({d});
  Tensor s_bar = Tensor::zeros({d});
  Tensor t_bar = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) {
    double ens = std::exp(-ev.s[i]);
    y_bar[i] = upstream[i] * ens;
    if (layer.mask[i] == 0.0) {
      s_bar[i] = -upstream[i] * x_out[i] - logdet_weight;
      t_bar[i] = -upstream[i] * ens;
    }
  }
  Tensor in_bar = detail::conditioner_backward(layer, ev, s_bar, t_bar, grads);
  add_scaled(y_bar, in_bar, 1.0);
  return y_bar;
}

/// Normalizing flow: ordered coupling layers over a standard-normal base.
/// Immutable while solving; training mutates a single-owner instance.
struct FlowModel {
  std::size_t d = 0;
  std::size_t hidden = 0;
  std::vector<CouplingLayer> layers;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto& layer : layers) layer.conditioner.for_each_param(fn);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    for (const auto& layer : layers) layer.conditioner.for_each_param(fn);
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.conditioner.param_count();
    return n;
  }
};

/// Builds a flow with alternating even/odd half masks. The zero-initialized
/// conditioner heads make the initial model an exact identity map.
inline FlowModel make_flow(std::size_t d, std::size_t n_layers, std::size_t hidden,
                           RngStream& rng, double s_clamp = 3.0) {
  if (d < 2) throw std::invalid_argument("make_flow: d must be >= 2");
  if (n_layers < 1) throw std::invalid_argument("make_flow: need at least one layer");
  FlowModel model;
  model.d = d;
  model.hidden = hidden;
  model.layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    CouplingLayer layer;
    layer.mask = Tensor::zeros({d});
    for (std::size_t i = 0; i < d; ++i)
      layer.mask[i] = ((i + l) % 2 == 0) ? 1.0 : 0.0;
    layer.conditioner = Mlp::initialized(d, hidden, 2 * d, rng);
    layer.s_clamp = s_clamp;
    layer.index = l;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// x = G(z): all layers applied in order. Optionally accumulates the forward
/// log-det and records intermediate inputs (x_l = input of layer l).
inline Tensor flow_forward(const FlowModel& model, const Tensor& z,
                           double* logdet = nullptr,
                           std::vector<Tensor>* inputs = nullptr) {
  if (z.size() != model.d)
    throw std::invalid_argument("flow_forward: dimension mismatch");
  Tensor x = z;
  double ld = 0.0;
  for (const auto& layer : model.layers) {
    if (inputs) inputs->push_back(x);
    auto [y, l] = coupling_forward(layer, x);
    x = std::move(y);
    ld += l;
  }
  if (logdet) *logdet = ld;
  return x;
}

/// z = G^{-1}(x); returns accumulated inverse log-det through all layers.
inline Tensor flow_inverse(const FlowModel& model, const Tensor& x,
                           double* logdet_inv = nullptr) {
  if (x.size() != model.d)
    throw std::invalid_argument("flow_inverse: dimension mismatch");
  Tensor z = x;
  double ld = 0.0;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
    auto [w, l] = coupling_inverse(*it, z);
    z = std::move(w);
    ld += l;
  }
  if (logdet_inv) *logdet_inv = ld;
  return z;
}

inline double standard_normal_log_density(const Tensor& z) {
  double q = 0.0;
  for (double v : z.data) q += v * v;
  return -0.5 * static_cast<double>(z.size()) * std::log(2.0 * M_PI) - 0.5 * q;
}

/// log p(x) = log N(G^{-1}(x)) + sum of inverse log-dets.
inline double flow_log_prob(const FlowModel& model, const Tensor& x) {
  double ld = 0.0;
  Tensor z = flow_inverse(model, x, &ld);
  return standard_normal_log_density(z) + ld;
}

/// n samples, drawn from the base and pushed through all layers. Rows of the
/// returned (n x d) tensor are individual samples.
inline Tensor flow_sample(const FlowModel& model, RngStream& rng, std::size_t n) {
  if (n < 1) throw std::invalid_argument("flow_sample: n must be >= 1");
  Tensor out = Tensor::zeros({n, model.d});
  for (std::size_t r = 0; r < n; ++r) {
    Tensor z = gaussian_sample(rng, {model.d});
    Tensor x = flow_forward(model, z);
    for (std::size_t c = 0; c < model.d; ++c) out.at(r, c) = x[c];
  }
  return out;
}

/// J_G(z)^T * upstream via reverse traversal of the layers.
inline Tensor flow_grad_z(const FlowModel& model, const Tensor& z,
                          const Tensor& upstream) {
  if (z.size() != model.d || upstream.size() != model.d)
    throw std::invalid_argument("flow_grad_z: dimension mismatch");
  std::vector<Tensor> inputs;
  inputs.reserve(model.layers.size());
  flow_forward(model, z, nullptr, &inputs);
  Tensor g = upstream;
  for (std::size_t l = model.layers.size(); l-- > 0;)
    g = coupling_forward_vjp(model.layers[l], inputs[l], g);
  return g;
}

namespace detail {

/// Inverse trajectory with per-layer conditioner caches.
/// outputs[k] is the result after applying the inverse of layer
/// layer_order[k]; layer_order runs from the last layer down to the first.
struct InverseTrace {
  std::vector<CondEval> evals;    // per processed layer, in processing order
  std::vector<Tensor> outputs;    // x after each inverse step
  Tensor z;                       // final latent
  double logdet_inv = 0.0;
};

inline InverseTrace trace_inverse(const FlowModel& model, const Tensor& x) {
  InverseTrace tr;
  const std::size_t L = model.layers.size();
  tr.evals.resize(L);
  tr.outputs.reserve(L);
  Tensor cur = x;
  for (std::size_t k = 0; k < L; ++k) {
    const CouplingLayer& layer = model.layers[L - 1 - k];
    auto [nxt, ld] = coupling_inverse(layer, cur, &tr.evals[k]);
    tr.logdet_inv += ld;
    tr.outputs.push_back(nxt);
    cur = std::move(nxt);
  }
  tr.z = cur;
  return tr;
}

/// Shared reverse sweep for log-prob style objectives.
///   objective = z_weight * (z-dependent term with gradient seed g_z)
///             + logdet_weight * sum of inverse log-dets
/// Walks the recorded inverse trajectory from z back to x, optionally
/// accumulating conditioner parameter gradients per layer.
inline Tensor backprop_inverse(const FlowModel& model, const InverseTrace& tr,
                               Tensor g, double logdet_weight,
                               std::vector<Mlp>* param_grads = nullptr) {
  const std::size_t L = model.layers.size();
  for (std::size_t k = L; k-- > 0;) {
    const CouplingLayer& layer = model.layers[L - 1 - k];
    Mlp* grads = param_grads ? &(*param_grads)[L - 1 - k] : nullptr;
    g = coupling_inverse_vjp(layer, tr.evals[k], tr.outputs[k], g, logdet_weight,
                             grads);
  }
  return g;
}

}  // namespace detail

/// Gradient of flow_log_prob with respect to x.
inline Tensor flow_grad_logprob_x(const FlowModel& model, const Tensor& x) {
  if (x.size() != model.d)
    throw std::invalid_argument("flow_grad_logprob_x: dimension mismatch");
  detail::InverseTrace tr = detail::trace_inverse(model, x);
  Tensor g = scaled(tr.z, -1.0);  // d log N(z) / dz
  return detail::backprop_inverse(model, tr, std::move(g), 1.0);
}

/// Exact gradient of the mean negative log-likelihood of a batch (n x d) with
/// respect to all conditioner parameters, one Mlp-shaped holder per layer.
/// When mean_nll is non-null it receives the batch mean NLL as a by-product.
inline std::vector<Mlp> flow_param_grad(const FlowModel& model, const Tensor& batch,
                                        double* mean_nll = nullptr) {
  if (batch.shape.size() != 2 || batch.cols() != model.d)
    throw std::invalid_argument("flow_param_grad: batch must be n x d");
  if (batch.rows() == 0)
    throw std::invalid_argument("flow_param_grad: empty batch");
  std::vector<Mlp> grads;
  grads.reserve(model.layers.size());
  for (const auto& layer : model.layers)
    grads.push_back(Mlp::zeros(model.d, layer.conditioner.hidden, 2 * model.d));
  const std::size_t n = batch.rows();
  double nll_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    Tensor x = batch.row(r);
    detail::InverseTrace tr = detail::trace_inverse(model, x);
    nll_sum -= standard_normal_log_density(tr.z) + tr.logdet_inv;
    // loss_r = -log N(z) - logdet_inv; d(-log N)/dz = z.
    detail::backprop_inverse(model, tr, tr.z, -1.0, &grads);
  }
  for (auto& g : grads)
    g.for_each_param([&](Tensor& p) { scale(p, 1.0 / static_cast<double>(n)); });
  if (mean_nll) *mean_nll = nll_sum / static_cast<double>(n);
  return grads;
}

/// Mean negative log-likelihood of a batch (nats per example).
inline double flow_mean_nll(const FlowModel& model, const Tensor& batch) {
  if (batch.shape.size() != 2 || batch.cols() != model.d)
    throw std::invalid_argument("flow_mean_nll: batch must be n x d");
  if (batch.rows() == 0)
    throw std::invalid_argument("flow_mean_nll: empty batch");
  double s = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r)
    s -= flow_log_prob(model, batch.row(r));
  return s / static_cast<double>(batch.rows());
}

}  // namespace flowinv
