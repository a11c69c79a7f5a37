#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "flowinv/tensor.hpp"

namespace flowinv {

namespace detail {

/// Orthonormal DCT-II matrix: C[k][n] = alpha_k cos(pi (2n+1) k / (2N)).
inline Tensor dct_matrix(std::size_t n) {
  Tensor C = Tensor::zeros({n, n});
  double a0 = std::sqrt(1.0 / static_cast<double>(n));
  double ak = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      C.at(k, j) = (k == 0 ? a0 : ak) *
                   std::cos(M_PI * (2.0 * static_cast<double>(j) + 1.0) *
                            static_cast<double>(k) / (2.0 * static_cast<double>(n)));
  return C;
}

enum class TransformDir { forward, inverse };

/// Separable transform along both axes of an h x w tensor.
inline Tensor transform_2d(const Tensor& x, TransformDir dir) {
  std::size_t h = x.rows(), w = x.cols();
  Tensor Ch = dct_matrix(h), Cw = dct_matrix(w);
  Tensor tmp = Tensor::zeros({h, w});
  // rows: for each row r, transform along columns (length w)
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t k = 0; k < w; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j)
        s += (dir == TransformDir::forward ? Cw.at(k, j) : Cw.at(j, k)) * x.at(r, j);
      tmp.at(r, k) = s;
    }
  Tensor out = Tensor::zeros({h, w});
  for (std::size_t c = 0; c < w; ++c)
    for (std::size_t k = 0; k < h; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < h; ++j)
        s += (dir == TransformDir::forward ? Ch.at(k, j) : Ch.at(j, k)) * tmp.at(j, c);
      out.at(k, c) = s;
    }
  return out;
}

}  // namespace detail

/// Orthonormal type-II DCT. 1-D tensors get the 1-D transform; 2-D tensors
/// the separable transform along both axes.
inline Tensor dct2(const Tensor& x) {
  if (x.shape.size() == 1) {
    Tensor C = detail::dct_matrix(x.size());
    return matvec(C, x);
  }
  if (x.shape.size() == 2) return detail::transform_2d(x, detail::TransformDir::forward);
  throw std::invalid_argument("dct2: tensor must be 1-D or 2-D");
}

/// Inverse of dct2 (DCT-III with the same normalization).
inline Tensor idct2(const Tensor& c) {
  if (c.shape.size() == 1) {
    Tensor C = detail::dct_matrix(c.size());
    return matvec_t(C, c);
  }
  if (c.shape.size() == 2) return detail::transform_2d(c, detail::TransformDir::inverse);
  throw std::invalid_argument("idct2: tensor must be 1-D or 2-D");
}

}  // namespace flowinv
