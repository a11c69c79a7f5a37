#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowinv/adam.hpp"
#include "flowinv/dataset.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/flow.hpp"
#include "flowinv/parallel.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::size_t lr_halving_period = 60;  // epochs
  double max_grad_norm = 100.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

inline Tensor flatten_flow_params(const FlowModel& model) {
  Tensor flat = Tensor::zeros({model.param_count()});
  std::size_t pos = 0;
  model.for_each_param([&](const Tensor& p) {
    std::copy(p.data.begin(), p.data.end(), flat.data.begin() + pos);
    pos += p.size();
  });
  return flat;
}

inline void unflatten_flow_params(FlowModel& model, const Tensor& flat) {
  if (flat.size() != model.param_count())
    throw std::invalid_argument("unflatten_flow_params: length mismatch");
  std::size_t pos = 0;
  model.for_each_param([&](Tensor& p) {
    std::copy(flat.data.begin() + pos, flat.data.begin() + pos + p.size(),
              p.data.begin());
    pos += p.size();
  });
}

inline Tensor flatten_layer_grads(const std::vector<Mlp>& grads, std::size_t total) {
  Tensor flat = Tensor::zeros({total});
  std::size_t pos = 0;
  for (const auto& g : grads)
    g.for_each_param([&](const Tensor& p) {
      std::copy(p.data.begin(), p.data.end(), flat.data.begin() + pos);
      pos += p.size();
    });
  return flat;
}

/// Rescales grad in place so its global l2 norm is at most max_norm.
/// Returns the pre-clip norm.
inline double clip_global_norm(Tensor& grad, double max_norm) {
  double norm = norm2(grad);
  if (norm > max_norm && norm > 0.0) scale(grad, max_norm / norm);
  return norm;
}

namespace detail {

/// Batch mean-NLL gradient, split over fixed sample chunks. Chunk boundaries
/// depend only on the batch size, so the result is identical for any worker
/// count; chunk contributions are combined in fixed order.
inline Tensor batched_param_grad(const FlowModel& model, const Tensor& batch,
                                 std::size_t workers, double* mean_nll) {
  const std::size_t rows = batch.rows();
  const std::size_t total = model.param_count();
  const std::size_t chunk_count = std::min<std::size_t>(8, rows);
  if (chunk_count <= 1) {
    double nll = 0.0;
    auto grads = flow_param_grad(model, batch, &nll);
    if (mean_nll) *mean_nll = nll;
    return flatten_layer_grads(grads, total);
  }
  std::vector<Tensor> chunk_grads(chunk_count);
  std::vector<double> chunk_nll(chunk_count, 0.0);
  std::vector<std::size_t> chunk_rows(chunk_count, 0);
  parallel_for(chunk_count, workers, [&](std::size_t c) {
    std::size_t begin = c * rows / chunk_count;
    std::size_t end = (c + 1) * rows / chunk_count;
    std::size_t nrows = end - begin;
    Tensor sub = Tensor::zeros({nrows, batch.cols()});
    std::copy(batch.data.begin() + begin * batch.cols(),
              batch.data.begin() + end * batch.cols(), sub.data.begin());
    double nll = 0.0;
    auto grads = flow_param_grad(model, sub, &nll);
    chunk_grads[c] = flatten_layer_grads(grads, total);
    chunk_nll[c] = nll;
    chunk_rows[c] = nrows;
  });
  Tensor flat = Tensor::zeros({total});
  double nll_sum = 0.0;
  for (std::size_t c = 0; c < chunk_count; ++c) {
    double w = static_cast<double>(chunk_rows[c]) / static_cast<double>(rows);
    add_scaled(flat, chunk_grads[c], w);
    nll_sum += chunk_nll[c] * w;
  }
  if (mean_nll) *mean_nll = nll_sum;
  return flat;
}

}  // namespace detail

/// Maximum-likelihood training: Adam on the mean-NLL gradient with global
/// gradient-norm clipping and learning-rate halving every
/// lr_halving_period epochs. Returns the per-epoch mean NLL trace (nats per
/// example, averaged over the epoch's batches).
inline std::vector<double> train_flow(FlowModel& model, const Dataset& data,
                                      const TrainConfig& cfg) {
  if (model.d != data.d())
    throw std::invalid_argument("train_flow: model and dataset dimension differ");
  if (cfg.batch_size < 1 || cfg.batch_size > data.n())
    throw std::invalid_argument("train_flow: batch_size must be in [1, n]");
  if (cfg.lr <= 0.0 || cfg.max_grad_norm <= 0.0 || cfg.lr_halving_period < 1)
    throw std::invalid_argument("train_flow: config values must be positive");

  const std::size_t n = data.n();
  const std::size_t total = model.param_count();
  RngStream rng(cfg.seed);
  AdamState adam = AdamState::create({total}, cfg.lr);
  Tensor params = flatten_flow_params(model);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> trace;
  trace.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = cfg.lr * std::pow(0.5, static_cast<double>(epoch / cfg.lr_halving_period));
    // Fisher-Yates shuffle with the run's stream.
    for (std::size_t i = n - 1; i > 0; --i) {
      std::size_t j = rng.below(i + 1);
      std::swap(order[i], order[j]);
    }
    double epoch_nll = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      std::size_t end = std::min(n, start + cfg.batch_size);
      Tensor batch = Tensor::zeros({end - start, data.d()});
      for (std::size_t r = start; r < end; ++r)
        for (std::size_t c = 0; c < data.d(); ++c)
          batch.at(r - start, c) = data.items.at(order[r], c);
      double batch_nll = 0.0;
      Tensor grad = detail::batched_param_grad(model, batch, cfg.workers, &batch_nll);
      if (!std::isfinite(batch_nll) || !all_finite(grad))
        throw NumericError("train_flow: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(batch_index));
      epoch_nll += batch_nll * static_cast<double>(end - start);
      clip_global_norm(grad, cfg.max_grad_norm);
      adam_step(adam, params, grad);
      unflatten_flow_params(model, params);
    }
    trace.push_back(epoch_nll / static_cast<double>(n));
  }
  return trace;
}

}  // namespace flowinv
