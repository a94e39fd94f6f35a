#pragma once

// Parameter checkpoint file.
//
// Layout (all integers little-endian):
//   8 bytes   magic "ESCKPT01"
//   u32       tensor count
//   per tensor:
//     u32     name length, then that many bytes of name
//     u32     ndim, then ndim x u64 dims
//     f32[n]  row-major payload, little-endian, n = product of dims
// Payloads are stored as 32-bit floats regardless of the in-memory scalar
// type; loading into a double tensor widens the values.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgesign/tensor.hpp"

namespace edgesign {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'E', 'S', 'C', 'K',
                                             'P', 'T', '0', '1'};

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
void save_checkpoint(const std::string& path, const NamedTensors<T>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path);
  out.write(detail::kCheckpointMagic, 8);
  detail::write_u32(out, std::uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::write_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    detail::write_u32(out, std::uint32_t(t.ndim()));
    for (auto d : t.shape()) detail::write_u64(out, d);
    for (const T& v : t.values()) detail::write_f32(out, float(v));
  }
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

template <typename T>
std::map<std::string, Tensor<T>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw CheckpointError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t count = detail::read_u32(in);
  std::map<std::string, Tensor<T>> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = detail::read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("checkpoint: truncated file");
    const std::uint32_t ndim = detail::read_u32(in);
    Shape shape(ndim);
    for (auto& d : shape) d = detail::read_u64(in);
    const std::size_t n = shape_numel(shape);
    std::vector<T> data(n);
    for (auto& v : data) v = static_cast<T>(detail::read_f32(in));
    out.emplace(std::move(name),
                Tensor<T>::from_vector(std::move(shape), std::move(data)));
  }
  return out;
}

// Copies checkpointed values into an existing parameter tensor in place.
template <typename T>
void restore_values(Tensor<T>& param, const Tensor<T>& stored,
                    const std::string& name) {
  if (param.shape() != stored.shape()) {
    throw CheckpointError("checkpoint: shape mismatch for " + name + ": " +
                          shape_to_string(param.shape()) + " vs " +
                          shape_to_string(stored.shape()));
  }
  auto dst = param.values_mut();
  auto src = stored.values();
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace edgesign
