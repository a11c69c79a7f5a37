#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "flowinv/errors.hpp"
#include "flowinv/flow.hpp"

namespace flowinv {

// Checkpoint container ("NFCK", version 1), all integers and reals
// little-endian:
//   magic[4] | u32 version | u32 d | u32 layer_count | u32 hidden_width
//   | f64 s_clamp | masks (layer_count * d bytes of 0/1)
//   | per layer: w1, b1, w2, b2, w3, b3 as f64, row-major
inline constexpr char kCheckpointMagic[4] = {'N', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f64(std::vector<unsigned char>& buf, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

struct ByteReader {
  const std::vector<unsigned char>& buf;
  std::size_t pos = 0;

  void require(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw FormatError(std::string("checkpoint: truncated while reading ") + what +
                        " at byte offset " + std::to_string(pos));
  }
  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64(const char* what) {
    require(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
  }
  unsigned char byte(const char* what) {
    require(1, what);
    return buf[pos++];
  }
};

}  // namespace detail

inline void checkpoint_save(const FlowModel& model, const std::string& path) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 4);
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(model.d));
  detail::put_u32(buf, static_cast<std::uint32_t>(model.layers.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(model.hidden));
  detail::put_f64(buf, model.layers.empty() ? 3.0 : model.layers[0].s_clamp);
  for (const auto& layer : model.layers)
    for (std::size_t i = 0; i < model.d; ++i)
      buf.push_back(layer.mask[i] != 0.0 ? 1 : 0);
  for (const auto& layer : model.layers)
    layer.conditioner.for_each_param([&](const Tensor& p) {
      for (double v : p.data) detail::put_f64(buf, v);
    });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint_save: cannot open " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("checkpoint_save: short write to " + path);
}

inline FlowModel checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint_load: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  detail::ByteReader r{buf};

  r.require(4, "magic");
  if (std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic at byte offset 0");
  r.pos = 4;
  std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  std::uint32_t d = r.u32("d");
  std::uint32_t layer_count = r.u32("layer_count");
  std::uint32_t hidden = r.u32("hidden_width");
  double s_clamp = r.f64("s_clamp");
  if (d < 2 || layer_count < 1 || hidden < 1)
    throw FormatError("checkpoint: invalid header dimensions at byte offset 12");

  FlowModel model;
  model.d = d;
  model.hidden = hidden;
  model.layers.resize(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    CouplingLayer& layer = model.layers[l];
    layer.mask = Tensor::zeros({d});
    layer.s_clamp = s_clamp;
    layer.index = l;
    for (std::uint32_t i = 0; i < d; ++i) {
      unsigned char m = r.byte("mask");
      if (m > 1)
        throw FormatError("checkpoint: invalid mask byte at byte offset " +
                          std::to_string(r.pos - 1));
      layer.mask[i] = static_cast<double>(m);
    }
  }
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    Mlp& mlp = model.layers[l].conditioner;
    mlp = Mlp::zeros(d, hidden, 2 * d);
    mlp.for_each_param([&](Tensor& p) {
      for (double& v : p.data) v = r.f64("parameters");
    });
  }
  if (r.pos != buf.size())
    throw FormatError("checkpoint: trailing bytes at byte offset " +
                      std::to_string(r.pos));
  return model;
}

}  // namespace flowinv
