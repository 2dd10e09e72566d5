// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Binary policy checkpoints. Layout (all integers little-endian):
//
//   8 bytes   magic "PSCHCKPT"
//   u32       format version (1)
//   u64       header length L
//   L bytes   UTF-8 JSON: {"architecture": {...}, "metadata": {...}}
//   u32       array count N
//   N arrays, each:
//     u32 name length, name bytes
//     u8  dtype (1 = float64, 2 = float32)
//     u32 rank, then rank x u64 extents
//     payload, row-major, IEEE-754 little-endian
//
// See docs/checkpoint-format.md.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "placesched/graph_io.hpp"
#include "placesched/policy.hpp"

namespace placesched {

inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'C', 'H', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Dtype : std::uint8_t { kFloat64 = 1, kFloat32 = 2 };

struct Checkpoint {
  PolicyConfig config;
  Parameters params;
  nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck, Dtype dtype = Dtype::kFloat64) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = nlohmann::json{{"architecture", to_json(ck.config)}, {"metadata", ck.metadata}}.dump();
  detail::put_le<std::uint64_t>(out, header.size());
  out += header;
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.params.values.size()));
  for (std::size_t i = 0; i < ck.params.values.size(); ++i) {
    const auto& name = ck.params.names[i];
    const Matrix& m = ck.params.values[i];
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    detail::put_le<std::uint32_t>(out, 2);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      if (dtype == Dtype::kFloat64) {
        detail::put_le<double>(out, m.data()[k]);
      } else {
        detail::put_le<float>(out, static_cast<float>(m.data()[k]));
      }
    }
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& data) {
  detail::Reader in(data);
  if (in.bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw FormatError("not a policy checkpoint (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > data.size()) throw FormatError("checkpoint is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("architecture")) throw FormatError("checkpoint header lacks \"architecture\"");
  Checkpoint ck;
  ck.config = policy_config_from_json(header.at("architecture"));
  if (header.contains("metadata")) ck.metadata = header.at("metadata");

  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.bytes(in.get<std::uint32_t>());
    const auto dtype = static_cast<Dtype>(in.get<std::uint8_t>());
    if (dtype != Dtype::kFloat64 && dtype != Dtype::kFloat32) throw FormatError("array " + name + ": unknown dtype");
    const auto rank = in.get<std::uint32_t>();
    if (rank != 2) throw FormatError("array " + name + ": expected rank 2");
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    const std::size_t width = dtype == Dtype::kFloat64 ? 8 : 4;
    if (rows != 0 && cols > (data.size() / width) / rows) throw FormatError("checkpoint is truncated");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      m.data()[k] = dtype == Dtype::kFloat64 ? in.get<double>() : static_cast<double>(in.get<float>());
    }
    ck.params.add(std::move(name), std::move(m));
  }
  if (!in.done()) throw FormatError("trailing bytes after the last checkpoint array");
  // Validates names and shapes against the architecture.
  Policy check(ck.config, ck.params);
  return ck;
}

inline void save_checkpoint(const std::string& path, const Policy& policy, const nlohmann::json& metadata = {},
                            Dtype dtype = Dtype::kFloat64) {
  Checkpoint ck{policy.config(), policy.params(), metadata.is_null() ? nlohmann::json::object() : metadata};
  write_text_file(path, serialize_checkpoint(ck, dtype));
}

inline Policy load_policy(const std::string& path, nlohmann::json* metadata = nullptr) {
  Checkpoint ck = parse_checkpoint(read_text_file(path));
  if (metadata) *metadata = ck.metadata;
  return Policy(ck.config, ck.params);
}

}  // namespace placesched
