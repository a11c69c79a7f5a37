#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowinv {

/// Dense row-major array of 64-bit reals with shape metadata.
/// Value type: cheap to move, safe to copy between threads.
struct Tensor {
  std::vector<double> data;
  std::vector<std::size_t> shape;

  Tensor() = default;
  Tensor(std::vector<double> values, std::vector<std::size_t> dims)
      : data(std::move(values)), shape(std::move(dims)) {
    if (numel(shape) != data.size())
      throw std::invalid_argument("Tensor: shape does not match data length");
  }

  static std::size_t numel(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> dims) {
    return full(std::move(dims), 0.0);
  }

  static Tensor full(std::vector<std::size_t> dims, double value) {
    std::size_t n = numel(dims);
    return Tensor(std::vector<double>(n, value), std::move(dims));
  }

  /// 1-D vector of length n.
  static Tensor vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor(std::move(values), {n});
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// 2-D access; tensor must have exactly two dims.
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 0; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : 0; }

  /// Copy of row r of a 2-D tensor as a 1-D tensor.
  Tensor row(std::size_t r) const {
    std::size_t c = shape[1];
    std::vector<double> out(data.begin() + r * c, data.begin() + (r + 1) * c);
    return Tensor(std::move(out), {c});
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline bool all_finite(const Tensor& t) {
  for (double v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

inline double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

/// a += c * b
inline void add_scaled(Tensor& a, const Tensor& b, double c) {
  check_same_shape(a, b, "add_scaled");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

inline void scale(Tensor& a, double c) {
  for (double& v : a.data) v *= c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_scaled(out, b, 1.0);
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_scaled(out, b, -1.0);
  return out;
}

inline Tensor scaled(const Tensor& a, double c) {
  Tensor out = a;
  scale(out, c);
  return out;
}

/// y = A x for a 2-D (m x d) tensor and a length-d vector.
inline Tensor matvec(const Tensor& A, const Tensor& x) {
  if (A.shape.size() != 2 || A.cols() != x.size())
    throw std::invalid_argument("matvec: dimension mismatch");
  Tensor y = Tensor::zeros({A.rows()});
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    const double* arow = A.data.data() + r * A.cols();
    for (std::size_t c = 0; c < A.cols(); ++c) s += arow[c] * x[c];
    y[r] = s;
  }
  return y;
}

/// y = A^T x for a 2-D (m x d) tensor and a length-m vector.
inline Tensor matvec_t(const Tensor& A, const Tensor& x) {
  if (A.shape.size() != 2 || A.rows() != x.size())
    throw std::invalid_argument("matvec_t: dimension mismatch");
  Tensor y = Tensor::zeros({A.cols()});
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const double* arow = A.data.data() + r * A.cols();
    double xr = x[r];
    for (std::size_t c = 0; c < A.cols(); ++c) y[c] += arow[c] * xr;
  }
  return y;
}

/// Mean squared difference between two equally shaped tensors.
inline double mean_squared_error(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mean_squared_error");
  if (a.empty()) throw std::invalid_argument("mean_squared_error: empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace flowinv
