#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// Deterministic measurement map f in  x~ = f(x) + delta.
/// Immutable after construction; shareable read-only.
struct ForwardOperator {
  enum class Kind { identity, scale, linear, sign_of_linear };

  Kind kind = Kind::identity;
  double factor = 1.0;  // scale kind
  Tensor A;             // m x d for linear kinds
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static ForwardOperator identity(std::size_t d) {
    ForwardOperator op;
    op.kind = Kind::identity;
    op.in_dim = op.out_dim = d;
    return op;
  }

  static ForwardOperator scale(std::size_t d, double c) {
    ForwardOperator op;
    op.kind = Kind::scale;
    op.factor = c;
    op.in_dim = op.out_dim = d;
    return op;
  }

  static ForwardOperator linear(Tensor matrix) {
    if (matrix.shape.size() != 2 || matrix.rows() < 1)
      throw std::invalid_argument("ForwardOperator::linear: A must be m x d, m >= 1");
    if (!all_finite(matrix))
      throw std::invalid_argument("ForwardOperator::linear: A must be finite");
    ForwardOperator op;
    op.kind = Kind::linear;
    op.in_dim = matrix.cols();
    op.out_dim = matrix.rows();
    op.A = std::move(matrix);
    return op;
  }

  static ForwardOperator sign_of_linear(Tensor matrix) {
    ForwardOperator op = linear(std::move(matrix));
    op.kind = Kind::sign_of_linear;
    return op;
  }

  bool is_linear_kind() const {
    return kind == Kind::identity || kind == Kind::scale || kind == Kind::linear;
  }
};

/// Random Gaussian measurement matrix with entries N(0, 1/m), so the
/// measurement energy is scale-stable across m.
inline Tensor random_measurement_matrix(std::size_t m, std::size_t d, RngStream& rng) {
  if (m < 1 || d < 1)
    throw std::invalid_argument("random_measurement_matrix: m, d must be >= 1");
  Tensor A = Tensor::zeros({m, d});
  double std = 1.0 / std::sqrt(static_cast<double>(m));
  for (double& v : A.data) v = std * rng.gaussian();
  return A;
}

/// sign with the fixed convention sign(0) := +1.
inline double sign_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }

inline Tensor apply_forward(const ForwardOperator& op, const Tensor& x) {
  if (x.size() != op.in_dim)
    throw std::invalid_argument("apply_forward: dimension mismatch");
  switch (op.kind) {
    case ForwardOperator::Kind::identity:
      return x;
    case ForwardOperator::Kind::scale:
      return scaled(x, op.factor);
    case ForwardOperator::Kind::linear:
      return matvec(op.A, x);
    case ForwardOperator::Kind::sign_of_linear: {
      Tensor y = matvec(op.A, x);
      for (double& v : y.data) v = sign_plus(v);
      return y;
    }
  }
  throw std::invalid_argument("apply_forward: unknown kind");
}

/// Vector-Jacobian product. Exact for identity/scale/linear; sign_of_linear
/// uses the straight-through estimator (sign treated as identity in the
/// backward pass), i.e. A^T * upstream.
inline Tensor forward_vjp(const ForwardOperator& op, const Tensor& x,
                          const Tensor& upstream) {
  if (x.size() != op.in_dim || upstream.size() != op.out_dim)
    throw std::invalid_argument("forward_vjp: dimension mismatch");
  switch (op.kind) {
    case ForwardOperator::Kind::identity:
      return upstream;
    case ForwardOperator::Kind::scale:
      return scaled(upstream, op.factor);
    case ForwardOperator::Kind::linear:
    case ForwardOperator::Kind::sign_of_linear:
      return matvec_t(op.A, upstream);
  }
  throw std::invalid_argument("forward_vjp: unknown kind");
}

}  // namespace flowinv
