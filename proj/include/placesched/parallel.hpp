// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace placesched {

inline int default_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(worker, i) for i in [0, count) on up to `threads` workers using
/// contiguous static chunks. Worker 0 runs on the calling thread. The first
/// exception thrown by any worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&](int worker) {
    const int begin = static_cast<int>(static_cast<long long>(count) * worker / threads);
    const int end = static_cast<int>(static_cast<long long>(count) * (worker + 1) / threads);
    try {
      for (int i = begin; i < end; ++i) fn(worker, i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int w = 1; w < threads; ++w) pool.emplace_back(body, w);
    body(0);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace placesched
