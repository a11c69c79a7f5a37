#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowinv/adam.hpp"
#include "flowinv/flow.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// Prior with known negative log-density q (up to a constant) and certified
/// curvature bounds:
///   gaussian(tau):  q(x) = ||x - x*||^2 / (2 tau^2),   mu = M = 1/tau^2
///   quartic(a, b):  q(x) = a||x - x*||^2 + b||x - x*||^4,
///                   mu = 2a on any ball, M = 2a + 12 b r^2 on B_r
struct AnalyticPrior {
  enum class Kind { gaussian, quartic };

  Kind kind = Kind::gaussian;
  Tensor x_star;
  double tau = 1.0;
  double a = 1.0;
  double b = 0.1;

  static AnalyticPrior gaussian(Tensor center, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("AnalyticPrior: tau must be > 0");
    AnalyticPrior p;
    p.kind = Kind::gaussian;
    p.x_star = std::move(center);
    p.tau = tau;
    return p;
  }

  static AnalyticPrior quartic(Tensor center, double a, double b) {
    if (a <= 0.0 || b <= 0.0)
      throw std::invalid_argument("AnalyticPrior: a, b must be > 0");
    AnalyticPrior p;
    p.kind = Kind::quartic;
    p.x_star = std::move(center);
    p.a = a;
    p.b = b;
    return p;
  }

  double q(const Tensor& x) const {
    Tensor r = sub(x, x_star);
    double r2 = dot(r, r);
    if (kind == Kind::gaussian) return r2 / (2.0 * tau * tau);
    return a * r2 + b * r2 * r2;
  }

  Tensor grad_q(const Tensor& x) const {
    Tensor r = sub(x, x_star);
    if (kind == Kind::gaussian) {
      scale(r, 1.0 / (tau * tau));
      return r;
    }
    double r2 = dot(r, r);
    scale(r, 2.0 * a + 4.0 * b * r2);
    return r;
  }

  /// Certified strong-convexity lower bound (any ball, for both kinds).
  double mu() const { return kind == Kind::gaussian ? 1.0 / (tau * tau) : 2.0 * a; }

  /// Certified smoothness upper bound on the ball of radius r around x*.
  double smoothness(double r) const {
    return kind == Kind::gaussian ? 1.0 / (tau * tau) : 2.0 * a + 12.0 * b * r * r;
  }
};

struct BoundReport {
  double delta_norm = 0.0;
  double error = 0.0;  // ||x_bar - x*||
  double bound = 0.0;  // ||delta|| / (mu sigma^2 + 1)
  std::size_t gd_steps = 0;
  bool converged = false;
  double max_dist_from_xstar = 0.0;  // over all GD iterates
  double mu_used = 0.0;
};

/// Plain gradient descent from x~ = x* + delta on
///   L(x) = q(x) + ||x~ - x||^2 / (2 sigma^2),
/// stopping when the gradient norm reaches tol. lr = 0 selects the default
/// 0.5 / (M + 1/sigma^2); an explicit lr must satisfy lr < 1 / (M + 1/sigma^2).
inline BoundReport denoise_gd(const AnalyticPrior& prior, double sigma,
                              const Tensor& delta, double lr = 0.0,
                              double tol = 1e-10, std::size_t max_steps = 1000000,
                              std::vector<Tensor>* trajectory = nullptr) {
  if (sigma <= 0.0) throw std::invalid_argument("denoise_gd: sigma must be > 0");
  if (tol <= 0.0) throw std::invalid_argument("denoise_gd: tol must be > 0");
  check_same_shape(delta, prior.x_star, "denoise_gd");

  double r = norm2(delta);
  double M_full = prior.smoothness(r) + 1.0 / (sigma * sigma);
  if (lr == 0.0) lr = 0.5 / M_full;
  else if (lr >= 1.0 / M_full)
    throw std::invalid_argument("denoise_gd: lr must be below 1/(M + 1/sigma^2)");

  Tensor x = add(prior.x_star, delta);  // start from the observation
  const Tensor x_tilde = x;
  BoundReport report;
  report.delta_norm = r;
  report.mu_used = prior.mu();
  report.bound = r / (prior.mu() * sigma * sigma + 1.0);
  report.max_dist_from_xstar = r;

  for (std::size_t step = 0; step < max_steps; ++step) {
    if (trajectory) trajectory->push_back(x);
    Tensor g = prior.grad_q(x);
    add_scaled(g, sub(x, x_tilde), 1.0 / (sigma * sigma));
    double gnorm = norm2(g);
    if (gnorm <= tol) {
      report.converged = true;
      report.gd_steps = step;
      break;
    }
    add_scaled(x, g, -lr);
    report.max_dist_from_xstar =
        std::max(report.max_dist_from_xstar, norm2(sub(x, prior.x_star)));
    report.gd_steps = step + 1;
  }
  report.error = norm2(sub(x, prior.x_star));
  return report;
}

struct VerifyCell {
  double sigma = 0.0;
  double delta_scale = 0.0;
  std::size_t trials = 0;
  std::size_t converged = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // error / bound over converged trials
};

struct VerifySummary {
  std::vector<VerifyCell> cells;
  std::size_t total_trials = 0;
  std::size_t total_violations = 0;
  double max_ratio = 0.0;

  std::string table() const {
    std::ostringstream os;
    os << "sigma,delta_scale,trials,converged,violations,max_ratio\n";
    for (const auto& c : cells)
      os << c.sigma << "," << c.delta_scale << "," << c.trials << "," << c.converged
         << "," << c.violations << "," << c.max_ratio << "\n";
    return os.str();
  }
};

/// Runs denoise_gd across a (sigma, delta-scale) grid with `trials` random
/// noise directions per cell and checks error <= bound * (1 + 1e-6) on every
/// converged trial. mu is certified on any ball for both analytic priors, so
/// the theorem hypothesis holds for every (sigma, delta) pair.
inline VerifySummary verify_bound(const AnalyticPrior& prior, std::size_t trials,
                                  RngStream& rng, const std::vector<double>& sigma_grid,
                                  const std::vector<double>& delta_scale_grid,
                                  double tol = 1e-10) {
  if (trials < 1) throw std::invalid_argument("verify_bound: trials must be >= 1");
  VerifySummary summary;
  const std::size_t d = prior.x_star.size();
  for (double sigma : sigma_grid)
    for (double dscale : delta_scale_grid) {
      VerifyCell cell;
      cell.sigma = sigma;
      cell.delta_scale = dscale;
      cell.trials = trials;
      for (std::size_t t = 0; t < trials; ++t) {
        Tensor delta = gaussian_sample(rng, {d});
        double n = norm2(delta);
        if (n > 0.0) scale(delta, dscale / n);
        BoundReport rep = denoise_gd(prior, sigma, delta, 0.0, tol);
        if (!rep.converged) continue;
        cell.converged += 1;
        double ratio = rep.bound > 0.0 ? rep.error / rep.bound : 0.0;
        cell.max_ratio = std::max(cell.max_ratio, ratio);
        if (rep.error > rep.bound * (1.0 + 1e-6)) cell.violations += 1;
      }
      summary.total_trials += cell.trials;
      summary.total_violations += cell.violations;
      summary.max_ratio = std::max(summary.max_ratio, cell.max_ratio);
      summary.cells.push_back(cell);
    }
  return summary;
}

/// Gradient ascent (Adam) on log p_model from x0; returns a point whose score
/// norm is at most tol, or the last iterate if max_steps runs out.
inline Tensor find_mode(const FlowModel& model, const Tensor& x0, double lr = 0.05,
                        double tol = 1e-5, std::size_t max_steps = 20000) {
  Tensor x = x0;
  AdamState adam = AdamState::create(x.shape, lr);
  for (std::size_t step = 0; step < max_steps; ++step) {
    Tensor g = flow_grad_logprob_x(model, x);
    if (norm2(g) <= tol) break;
    scale(g, -1.0);  // ascend
    adam_step(adam, x, g);
  }
  return x;
}

struct ProbeReport {
  BoundReport base;
  double mu_hat = 0.0;
  double m_hat = 0.0;
  bool hypothesis_violated = false;
};

namespace detail {

/// Rayleigh quotient v^T H_q(x) v for q = -log p_model, via central finite
/// differences of the score along v (v must be unit norm).
inline double curvature_along(const FlowModel& model, const Tensor& x,
                              const Tensor& v, double eps = 1e-3) {
  Tensor xp = x, xm = x;
  add_scaled(xp, v, eps);
  add_scaled(xm, v, -eps);
  Tensor gp = flow_grad_logprob_x(model, xp);
  Tensor gm = flow_grad_logprob_x(model, xm);
  // H_q = -d(score)/dx
  return -(dot(gp, v) - dot(gm, v)) / (2.0 * eps);
}

}  // namespace detail

/// Advisory Theorem-1 probe for a learned prior: estimates local strong
/// convexity at a mode by randomized Rayleigh quotients, then runs the same
/// denoising gradient descent and reports error against the bound computed
/// from the estimate. Local convexity of a learned flow is not certified, so
/// the result is advisory; violated curvature hypotheses are flagged.
inline ProbeReport flow_local_bound_probe(const FlowModel& model, const Tensor& x_star,
                                          double sigma, double delta_scale,
                                          RngStream& rng,
                                          std::size_t probe_directions = 32,
                                          std::size_t max_steps = 50000) {
  if (norm2(flow_grad_logprob_x(model, x_star)) > 1e-4)
    throw std::invalid_argument(
        "flow_local_bound_probe: x_star is not a mode (score norm > 1e-4)");
  const std::size_t d = model.d;
  ProbeReport probe;
  probe.mu_hat = std::numeric_limits<double>::infinity();
  probe.m_hat = 0.0;
  for (std::size_t k = 0; k < probe_directions; ++k) {
    Tensor v = gaussian_sample(rng, {d});
    double n = norm2(v);
    if (n == 0.0) continue;
    scale(v, 1.0 / n);
    double c = detail::curvature_along(model, x_star, v);
    probe.mu_hat = std::min(probe.mu_hat, c);
    probe.m_hat = std::max(probe.m_hat, c);
  }

  Tensor delta = gaussian_sample(rng, {d});
  double n = norm2(delta);
  if (n > 0.0) scale(delta, delta_scale / n);

  // Curvature along the noise ray; negative curvature anywhere on the segment
  // violates the ball hypothesis.
  if (delta_scale > 0.0) {
    Tensor dir = scaled(delta, 1.0 / delta_scale);
    for (int s = 1; s <= 8; ++s) {
      Tensor x = x_star;
      add_scaled(x, delta, static_cast<double>(s) / 8.0);
      if (detail::curvature_along(model, x, dir) <= 0.0) {
        probe.hypothesis_violated = true;
        break;
      }
    }
  }
  if (probe.mu_hat <= 0.0) probe.hypothesis_violated = true;

  // GD on q(x) + ||x~-x||^2/(2 sigma^2) with q = -log p_model.
  double mu = probe.mu_hat;
  double big_m = std::max(probe.m_hat, std::abs(mu));
  double lr = 0.5 / (big_m + 1.0 / (sigma * sigma));
  Tensor x = add(x_star, delta);
  const Tensor x_tilde = x;
  BoundReport& rep = probe.base;
  rep.delta_norm = delta_scale;
  rep.mu_used = mu;
  rep.bound = mu > 0.0 ? delta_scale / (mu * sigma * sigma + 1.0) : 0.0;
  rep.max_dist_from_xstar = delta_scale;
  const double tol = 1e-6;
  for (std::size_t step = 0; step < max_steps; ++step) {
    Tensor g = flow_grad_logprob_x(model, x);
    scale(g, -1.0);  // grad of q
    add_scaled(g, sub(x, x_tilde), 1.0 / (sigma * sigma));
    if (norm2(g) <= tol) {
      rep.converged = true;
      rep.gd_steps = step;
      break;
    }
    add_scaled(x, g, -lr);
    rep.max_dist_from_xstar =
        std::max(rep.max_dist_from_xstar, norm2(sub(x, x_star)));
    rep.gd_steps = step + 1;
  }
  rep.error = norm2(sub(x, x_star));
  return probe;
}

}  // namespace flowinv
