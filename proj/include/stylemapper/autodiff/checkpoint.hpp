#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/autodiff/optim.hpp"

// Checkpoint layout (all integers little-endian):
//   magic "SMCK" | u32 version | u32 header_len | header bytes (text)
//   u32 count | count x { u32 name_len | name | u32 rank | rank x u32 dim | numel x f32 }
namespace stylemapper::ad {

inline constexpr std::array<char, 4> kCheckpointMagic = {'S', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  return s;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParameterSet<T>& params, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kCheckpointMagic.data(), 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (T v : e.tensor.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  std::uint32_t version = 0;
  std::string header;
  std::vector<CheckpointEntry> entries;
};

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  if (detail::get_bytes(in, 4) != std::string(kCheckpointMagic.data(), 4)) {
    throw std::runtime_error(path + ": not a checkpoint (bad magic)");
  }
  CheckpointData data;
  data.version = detail::get_u32(in);
  if (data.version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(data.version));
  }
  data.header = detail::get_bytes(in, detail::get_u32(in));
  const auto count = detail::get_u32(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.name = detail::get_bytes(in, detail::get_u32(in));
    const auto rank = detail::get_u32(in);
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(detail::get_u32(in));
    e.values.resize(numel(e.shape));
    for (auto& v : e.values) v = std::bit_cast<float>(detail::get_u32(in));
    data.entries.push_back(std::move(e));
  }
  return data;
}

// Copies checkpoint values into an existing parameter set; names and shapes must match.
template <typename T>
void load_into(const CheckpointData& data, ParameterSet<T>& params) {
  if (data.entries.size() != params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(data.entries.size()) + " tensors, model expects " +
                             std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < data.entries.size(); ++k) {
    auto& dst = params.entries()[k];
    const auto& src = data.entries[k];
    if (dst.name != src.name || dst.tensor.shape() != src.shape) {
      throw std::runtime_error("checkpoint tensor " + src.name + shape_str(src.shape) + " does not match " + dst.name +
                               shape_str(dst.tensor.shape()));
    }
    auto& vals = dst.tensor.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<T>(src.values[i]);
  }
}

}  // namespace stylemapper::ad
