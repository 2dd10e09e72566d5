// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace placesched {

/// Optimization objective. Runtime minimizes makespan subject to the
/// per-device memory capacity; peak memory minimizes the largest resident
/// footprint on any device.
enum class Task { kRuntime, kPeakMemory };

inline std::string_view to_string(Task task) {
  return task == Task::kRuntime ? "runtime" : "peak_memory";
}

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON, missing or unknown keys, wrong types.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Structurally well-formed input that violates a domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A request exceeds a hard capability limit (e.g. the exhaustive oracle's
/// op cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A request the caller could fix: unknown algorithm, missing checkpoint.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline Task parse_task(std::string_view name) {
  if (name == "runtime") return Task::kRuntime;
  if (name == "peak_memory" || name == "memory") return Task::kPeakMemory;
  throw FormatError("unknown task '" + std::string(name) +
                    "' (expected runtime or peak_memory)");
}

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from a parent seed and a sequence of keys.
/// Every random substream in the library is keyed this way so results do not
/// depend on evaluation order or thread count.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t seed, Keys... keys) {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(keys) +
                                  0x632be59bd9b4e019ULL))),
   ...);
  return h;
}

template <typename... Keys>
Rng substream(std::uint64_t seed, Keys... keys) {
  return Rng(derive_seed(seed, keys...));
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace placesched
