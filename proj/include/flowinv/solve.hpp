#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowinv/adam.hpp"
#include "flowinv/dct.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/hash.hpp"
#include "flowinv/losses.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {

enum class SolveMethod { map, mle, bora, hand, lasso_dct };

inline SolveMethod solve_method_from_string(const std::string& name) {
  if (name == "map") return SolveMethod::map;
  if (name == "mle") return SolveMethod::mle;
  if (name == "bora") return SolveMethod::bora;
  if (name == "hand") return SolveMethod::hand;
  if (name == "lasso_dct") return SolveMethod::lasso_dct;
  throw std::invalid_argument("unknown solve method: " + name);
}

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::map: return "map";
    case SolveMethod::mle: return "mle";
    case SolveMethod::bora: return "bora";
    case SolveMethod::hand: return "hand";
    case SolveMethod::lasso_dct: return "lasso_dct";
  }
  return "?";
}

struct SolveConfig {
  SolveMethod method = SolveMethod::map;
  std::size_t steps = 400;
  double lr = 0.02;
  double beta = 1.0;     // MAP smoothing (prior weight)
  double gamma = 0.0;    // hand regularizer
  double lambda = 0.01;  // bora / lasso regularizer
  enum class ZInit { zero, gaussian } z_init = ZInit::zero;
  double z_init_std = 0.1;
  double latent_ball_radius = 0.0;  // 0 disables projection
  std::uint64_t seed = 0;
  std::size_t restarts = 1;  // keep lowest final loss; 1 = off
  bool optimize_in_x = false;

  std::string canonical() const {
    std::ostringstream os;
    os << "method=" << flowinv::to_string(method) << ";steps=" << steps
       << ";lr=" << lr << ";beta=" << beta << ";gamma=" << gamma
       << ";lambda=" << lambda
       << ";z_init=" << (z_init == ZInit::zero ? "zero" : "gaussian")
       << ";z_init_std=" << z_init_std << ";ball=" << latent_ball_radius
       << ";seed=" << seed << ";restarts=" << restarts
       << ";x_space=" << (optimize_in_x ? 1 : 0);
    return os.str();
  }
};

/// Signal geometry, needed by the DCT baseline to interpret flat vectors.
struct SignalGeometry {
  std::size_t height = 0;
  std::size_t width = 1;
  std::size_t channels = 1;
  std::size_t d() const { return height * width * channels; }
  static SignalGeometry flat(std::size_t d) { return {d, 1, 1}; }
};

struct SolveReport {
  Tensor reconstruction;
  Tensor final_z;
  std::vector<double> loss_trace;
  std::optional<double> psnr_vs_truth;
  std::string config_hash;
};

inline double soft_threshold(double v, double threshold) {
  if (v > threshold) return v - threshold;
  if (v < -threshold) return v + threshold;
  return 0.0;
}

/// Largest squared singular value of the operator's linear map, by power
/// iteration on f^T f. Deterministic start vector.
inline double operator_sq_norm(const ForwardOperator& op, std::size_t max_iters = 2000,
                               double rel_tol = 1e-12) {
  const std::size_t d = op.in_dim;
  Tensor v = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i)
    v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  scale(v, 1.0 / norm2(v));
  Tensor zero_x = Tensor::zeros({d});
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor w = forward_vjp(op, zero_x, apply_forward(op, v));
    double lam = norm2(w);
    if (lam == 0.0) return 0.0;  // zero operator
    scale(w, 1.0 / lam);
    v = std::move(w);
    if (it > 0 && std::abs(lam - prev) <= rel_tol * std::max(1.0, lam)) return lam;
    prev = lam;
  }
  throw NumericError("operator_sq_norm: power iteration did not converge");
}

/// ISTA on  min_c 0.5 ||x~ - f(idct2(c))||^2 + lambda ||c||_1
/// with fixed step 1/L, L the largest squared singular value of f.
inline SolveReport lasso_dct_solve(const ForwardOperator& op, const Tensor& x_tilde,
                                   double lambda, std::size_t steps,
                                   const SignalGeometry& geom) {
  if (!op.is_linear_kind())
    throw std::invalid_argument("lasso_dct_solve: operator must be linear");
  if (steps < 1) throw std::invalid_argument("lasso_dct_solve: steps must be >= 1");
  if (geom.d() != op.in_dim)
    throw std::invalid_argument("lasso_dct_solve: geometry/operator mismatch");
  const bool as_image = geom.width > 1;

  auto to_signal = [&](const Tensor& coeffs) {
    if (!as_image) return idct2(coeffs);
    Tensor c2(coeffs.data, {geom.height, geom.width * geom.channels});
    Tensor img = idct2(c2);
    return Tensor(img.data, {geom.d()});
  };
  auto to_coeffs = [&](const Tensor& sig) {
    if (!as_image) return dct2(sig);
    Tensor s2(sig.data, {geom.height, geom.width * geom.channels});
    Tensor c = dct2(s2);
    return Tensor(c.data, {geom.d()});
  };

  double L = operator_sq_norm(op);
  if (L <= 0.0) throw NumericError("lasso_dct_solve: zero operator");
  double step = 1.0 / L;

  Tensor coeffs = Tensor::zeros({geom.d()});
  Tensor zero_x = Tensor::zeros({op.in_dim});
  std::vector<double> trace;
  trace.reserve(steps);
  for (std::size_t it = 0; it < steps; ++it) {
    Tensor signal = to_signal(coeffs);
    Tensor residual = sub(x_tilde, apply_forward(op, signal));
    double l1 = 0.0;
    for (double c : coeffs.data) l1 += std::abs(c);
    trace.push_back(0.5 * dot(residual, residual) + lambda * l1);
    Tensor grad_c = to_coeffs(forward_vjp(op, zero_x, residual));  // = -grad
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      coeffs[i] = soft_threshold(coeffs[i] + step * grad_c[i], lambda * step);
  }
  SolveReport report;
  report.reconstruction = to_signal(coeffs);
  report.final_z = Tensor::zeros({0});
  report.loss_trace = std::move(trace);
  return report;
}

namespace detail {

inline LossEval eval_solve_loss(const FlowModel* prior, const NoiseModel* nm,
                                const ForwardOperator& op, const Tensor& var,
                                const Tensor& x_tilde, const SolveConfig& cfg) {
  switch (cfg.method) {
    case SolveMethod::map:
      return cfg.optimize_in_x ? map_loss_x(*prior, *nm, op, var, x_tilde, cfg.beta)
                               : map_loss(*prior, *nm, op, var, x_tilde, cfg.beta);
    case SolveMethod::mle:
      return cfg.optimize_in_x ? map_loss_x(*prior, *nm, op, var, x_tilde, 0.0)
                               : mle_loss(*prior, *nm, op, var, x_tilde);
    case SolveMethod::bora:
      return bora_loss(*prior, op, var, x_tilde, cfg.lambda);
    case SolveMethod::hand:
      return hand_loss(*prior, op, var, x_tilde, cfg.gamma);
    case SolveMethod::lasso_dct:
      break;
  }
  throw std::invalid_argument("eval_solve_loss: unsupported method");
}

inline SolveReport solve_single(const FlowModel* prior, const NoiseModel* nm,
                                const ForwardOperator& op, const Tensor& x_tilde,
                                const SolveConfig& cfg, std::uint64_t seed) {
  const std::size_t d = op.in_dim;
  RngStream rng(seed);
  Tensor var = cfg.z_init == SolveConfig::ZInit::zero
                   ? Tensor::zeros({d})
                   : gaussian_sample(rng, {d}, 0.0, cfg.z_init_std);
  if (cfg.optimize_in_x) var = flow_forward(*prior, var);

  AdamState adam = AdamState::create({d}, cfg.lr);
  std::vector<double> trace;
  trace.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    LossEval ev = eval_solve_loss(prior, nm, op, var, x_tilde, cfg);
    if (!std::isfinite(ev.loss) || !all_finite(ev.grad))
      throw NumericError("solve: non-finite loss at step " + std::to_string(step));
    trace.push_back(ev.loss);
    adam_step(adam, var, ev.grad);
    if (!cfg.optimize_in_x && cfg.latent_ball_radius > 0.0) {
      double n = norm2(var);
      if (n > cfg.latent_ball_radius) scale(var, cfg.latent_ball_radius / n);
    }
  }
  SolveReport report;
  if (cfg.optimize_in_x) {
    report.reconstruction = var;
    report.final_z = flow_inverse(*prior, var);
  } else {
    report.final_z = var;
    report.reconstruction = flow_forward(*prior, var);
  }
  report.loss_trace = std::move(trace);
  return report;
}

}  // namespace detail

/// Latent-space optimization of the configured loss with Adam, from z_init,
/// for cfg.steps steps; the reconstruction is G(z_final) (inverse DCT of the
/// coefficients for lasso_dct). Deterministic given (seed, config, inputs).
inline SolveReport solve(const FlowModel* prior, const NoiseModel* nm,
                         const ForwardOperator& op, const Tensor& x_tilde,
                         const SolveConfig& cfg, const SignalGeometry& geom) {
  if (x_tilde.size() != op.out_dim)
    throw std::invalid_argument("solve: observation/operator dimension mismatch");
  if (cfg.steps < 1) throw std::invalid_argument("solve: steps must be >= 1");

  SolveReport report;
  if (cfg.method == SolveMethod::lasso_dct) {
    if (op.kind == ForwardOperator::Kind::sign_of_linear)
      throw std::invalid_argument("solve: lasso_dct cannot be used with a sign operator");
    report = lasso_dct_solve(op, x_tilde, cfg.lambda, cfg.steps, geom);
  } else {
    if (!prior) throw std::invalid_argument("solve: method requires a signal prior");
    if ((cfg.method == SolveMethod::map || cfg.method == SolveMethod::mle) && !nm)
      throw std::invalid_argument("solve: map/mle require a noise model");
    if (prior->d != op.in_dim)
      throw std::invalid_argument("solve: prior/operator dimension mismatch");
    report = detail::solve_single(prior, nm, op, x_tilde, cfg, cfg.seed);
    for (std::size_t r = 1; r < cfg.restarts; ++r) {
      SolveReport other = detail::solve_single(prior, nm, op, x_tilde, cfg,
                                               RngStream(cfg.seed).derive(r).seed());
      if (other.loss_trace.back() < report.loss_trace.back()) report = std::move(other);
    }
  }
  report.config_hash = to_hex(fnv1a64(cfg.canonical()));
  return report;
}

}  // namespace flowinv
