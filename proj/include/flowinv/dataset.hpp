#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// In-memory dataset: one example per row. 1-D point data uses
/// height = d, width = channels = 1. Image kinds keep values in [0,1].
struct Dataset {
  Tensor items;  // n x d
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t n() const { return items.rows(); }
  std::size_t d() const { return items.cols(); }
};

enum class SynthKind { gauss_mixture_2d, checkerboard_2d, bars8x8, blobs8x8 };

inline SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "gauss_mixture_2d") return SynthKind::gauss_mixture_2d;
  if (name == "checkerboard_2d") return SynthKind::checkerboard_2d;
  if (name == "bars8x8") return SynthKind::bars8x8;
  if (name == "blobs8x8") return SynthKind::blobs8x8;
  throw std::invalid_argument("unknown synthetic dataset kind: " + name);
}

inline const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::gauss_mixture_2d: return "gauss_mixture_2d";
    case SynthKind::checkerboard_2d: return "checkerboard_2d";
    case SynthKind::bars8x8: return "bars8x8";
    case SynthKind::blobs8x8: return "blobs8x8";
  }
  return "?";
}

/// 8-bit dequantization: (byte + u)/256 with u ~ U[0,1), so the result lies
/// in [byte/256, (byte+1)/256) and the data distribution has a density.
inline double dequantize_8bit(unsigned char byte, RngStream& rng) {
  return (static_cast<double>(byte) + rng.uniform01()) / 256.0;
}

namespace detail {

/// Quantize to 8 bits, then dequantize with jitter. Keeps image synth values
/// in [0,1) while giving the pixel distribution a proper density.
inline double quantize_dequantize(double v, RngStream& rng) {
  v = std::clamp(v, 0.0, 1.0);
  auto byte = static_cast<unsigned char>(std::min(255.0, std::floor(v * 256.0)));
  return dequantize_8bit(byte, rng);
}

/// Round through f32 so IMGD save -> load reproduces values exactly.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

/// Deterministic-given-seed synthetic datasets.
///   gauss_mixture_2d: two symmetric modes at (+-2, 0), std 0.3
///   checkerboard_2d:  uniform over the even cells of a 4x4 grid on [-2,2]^2
///   bars8x8:          axis-aligned stripe images (structured-noise analog)
///   blobs8x8:         smooth two-blob images (signal analog)
inline Dataset synth_dataset(SynthKind kind, std::size_t n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("synth_dataset: n must be >= 1");
  Dataset ds;
  switch (kind) {
    case SynthKind::gauss_mixture_2d: {
      ds.items = Tensor::zeros({n, 2});
      ds.height = 2; ds.width = 1; ds.channels = 1;
      for (std::size_t r = 0; r < n; ++r) {
        double cx = rng.below(2) == 0 ? -2.0 : 2.0;
        ds.items.at(r, 0) = detail::to_f32(cx + 0.3 * rng.gaussian());
        ds.items.at(r, 1) = detail::to_f32(0.3 * rng.gaussian());
      }
      return ds;
    }
    case SynthKind::checkerboard_2d: {
      ds.items = Tensor::zeros({n, 2});
      ds.height = 2; ds.width = 1; ds.channels = 1;
      for (std::size_t r = 0; r < n; ++r) {
        // Even cells of a 4x4 grid over [-2,2]^2.
        std::size_t cell = rng.below(8);
        std::size_t row = cell / 2;
        std::size_t col = 2 * (cell % 2) + (row % 2);
        double x0 = -2.0 + static_cast<double>(col) + rng.uniform01();
        double x1 = -2.0 + static_cast<double>(row) + rng.uniform01();
        ds.items.at(r, 0) = detail::to_f32(x0);
        ds.items.at(r, 1) = detail::to_f32(x1);
      }
      return ds;
    }
    case SynthKind::bars8x8: {
      ds.items = Tensor::zeros({n, 64});
      ds.height = 8; ds.width = 8; ds.channels = 1;
      const std::size_t periods[3] = {2, 4, 8};
      for (std::size_t r = 0; r < n; ++r) {
        bool horizontal = rng.below(2) == 0;
        std::size_t period = periods[rng.below(3)];
        std::size_t phase = rng.below(period);
        double hi = rng.uniform(0.7, 1.0);
        double lo = rng.uniform(0.0, 0.25);
        for (std::size_t i = 0; i < 8; ++i)
          for (std::size_t j = 0; j < 8; ++j) {
            std::size_t k = horizontal ? i : j;
            double v = ((k + phase) % period) < period / 2 ? hi : lo;
            ds.items.at(r, i * 8 + j) =
                detail::to_f32(detail::quantize_dequantize(v, rng));
          }
      }
      return ds;
    }
    case SynthKind::blobs8x8: {
      ds.items = Tensor::zeros({n, 64});
      ds.height = 8; ds.width = 8; ds.channels = 1;
      for (std::size_t r = 0; r < n; ++r) {
        double c1r = rng.uniform(1.0, 6.0), c1c = rng.uniform(1.0, 6.0);
        double c2r = rng.uniform(1.0, 6.0), c2c = rng.uniform(1.0, 6.0);
        double w1 = rng.uniform(0.8, 1.6), w2 = rng.uniform(0.8, 1.6);
        double a1 = rng.uniform(0.5, 1.0), a2 = rng.uniform(0.5, 1.0);
        for (std::size_t i = 0; i < 8; ++i)
          for (std::size_t j = 0; j < 8; ++j) {
            double di = static_cast<double>(i), dj = static_cast<double>(j);
            double r1 = (di - c1r) * (di - c1r) + (dj - c1c) * (dj - c1c);
            double r2 = (di - c2r) * (di - c2r) + (dj - c2c) * (dj - c2c);
            double v = a1 * std::exp(-r1 / (2.0 * w1 * w1)) +
                       a2 * std::exp(-r2 / (2.0 * w2 * w2));
            ds.items.at(r, i * 8 + j) =
                detail::to_f32(detail::quantize_dequantize(v, rng));
          }
      }
      return ds;
    }
  }
  throw std::invalid_argument("synth_dataset: unknown kind");
}

// IMGD container, all integers and f32 payload little-endian:
//   magic[4]="IMGD" | u32 version | u32 n | u32 height | u32 width
//   | u32 channels | n*h*w*c f32 values, row-major.
inline constexpr char kDatasetMagic[4] = {'I', 'M', 'G', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kDatasetMagic, kDatasetMagic + 4);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  put_u32(kDatasetVersion);
  put_u32(static_cast<std::uint32_t>(ds.n()));
  put_u32(static_cast<std::uint32_t>(ds.height));
  put_u32(static_cast<std::uint32_t>(ds.width));
  put_u32(static_cast<std::uint32_t>(ds.channels));
  for (double v : ds.items.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_dataset: cannot open " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("save_dataset: short write to " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t k, const char* what) {
    if (pos + k > buf.size())
      throw FormatError(std::string("dataset: truncated while reading ") + what +
                        " at byte offset " + std::to_string(pos));
  };
  need(4, "magic");
  if (std::memcmp(buf.data(), kDatasetMagic, 4) != 0)
    throw FormatError("dataset: bad magic at byte offset 0");
  pos = 4;
  auto get_u32 = [&](const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  std::uint32_t version = get_u32("version");
  if (version != kDatasetVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  std::uint32_t n = get_u32("n");
  std::uint32_t h = get_u32("height");
  std::uint32_t w = get_u32("width");
  std::uint32_t c = get_u32("channels");
  if (n < 1 || h < 1 || w < 1 || c < 1)
    throw FormatError("dataset: invalid header dimensions at byte offset 8");
  std::size_t count = static_cast<std::size_t>(n) * h * w * c;
  if (buf.size() - pos != count * 4)
    throw FormatError("dataset: header declares " + std::to_string(count) +
                      " values but payload holds " +
                      std::to_string((buf.size() - pos) / 4));
  Dataset ds;
  ds.height = h; ds.width = w; ds.channels = c;
  ds.items = Tensor::zeros({n, static_cast<std::size_t>(h) * w * c});
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<std::uint32_t>(buf[pos + 4 * i + k]) << (8 * k);
    ds.items.data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return ds;
}

}  // namespace flowinv
