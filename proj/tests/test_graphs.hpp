// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Small hand-built and randomly generated graphs shared by the test suites.

#pragma once

#include <string>
#include <vector>

#include "placesched/common.hpp"
#include "placesched/graph.hpp"

namespace placesched::testing {

class Builder {
 public:
  Builder& op(std::string id, double duration, std::int64_t internal = 0) {
    g_.ops.push_back({std::move(id), duration, internal});
    return *this;
  }
  Builder& tensor(std::string id, std::string producer, std::int64_t size) {
    g_.tensors.push_back({std::move(id), std::move(producer), size});
    return *this;
  }
  Builder& use(std::string tensor, std::string op, bool control = false) {
    g_.consumers.push_back({std::move(tensor), std::move(op), control});
    return *this;
  }
  ComputationGraph build() const { return g_; }

 private:
  ComputationGraph g_;
};

/// a -> b -> c with one tensor per edge.
inline ComputationGraph chain(std::vector<double> durations, std::vector<std::int64_t> sizes = {}) {
  Builder b;
  for (std::size_t i = 0; i < durations.size(); ++i) b.op("op" + std::to_string(i), durations[i]);
  for (std::size_t i = 0; i + 1 < durations.size(); ++i) {
    const std::string t = "t" + std::to_string(i);
    b.tensor(t, "op" + std::to_string(i), sizes.empty() ? 1 : sizes[i]);
    b.use(t, "op" + std::to_string(i + 1));
  }
  return b.build();
}

/// Five ops, two devices: op1 -> {A -> op2, B -> op3}; op2 -> C -> op4;
/// op3 -> D -> op5; op4 -> E -> op5.
inline ComputationGraph five_op_example() {
  return Builder()
      .op("1", 1).op("2", 1).op("3", 1).op("4", 1).op("5", 1)
      .tensor("A", "1", 10).tensor("B", "1", 20).tensor("C", "2", 30)
      .tensor("D", "3", 40).tensor("E", "4", 50)
      .use("A", "2").use("B", "3").use("C", "4").use("D", "5").use("E", "5")
      .build();
}

/// Three ops and three tensors: op 1 produces A, B and C; op 2 consumes A
/// and C; op 3 consumes B.
inline ComputationGraph three_op_example() {
  return Builder()
      .op("1", 1).op("2", 1).op("3", 1)
      .tensor("A", "1", 5).tensor("B", "1", 5).tensor("C", "1", 5)
      .use("A", "2").use("C", "2").use("B", "3")
      .build();
}

/// 4-op diamond with unit durations and unit tensor sizes.
inline ComputationGraph diamond() {
  return Builder()
      .op("s", 1).op("l", 1).op("r", 1).op("j", 1)
      .tensor("sl", "s", 1).tensor("sr", "s", 1).tensor("lj", "l", 1).tensor("rj", "r", 1)
      .use("sl", "l").use("sr", "r").use("lj", "j").use("rj", "j")
      .build();
}

struct TinyGraphOptions {
  int min_ops = 1;
  int max_ops = 6;
  int max_tensors = 6;
  double consume_probability = 0.45;
  double control_probability = 0.15;
  bool internal_memory = true;
};

/// Random DAG with at most `max_ops` ops. Ops are created in topological
/// order; every tensor is consumed by a random subset of later ops.
inline ComputationGraph random_tiny_graph(Rng& rng, const TinyGraphOptions& opt = {}) {
  Builder b;
  const int n = opt.min_ops + static_cast<int>(uniform_index(rng, opt.max_ops - opt.min_ops + 1));
  for (int i = 0; i < n; ++i) {
    const double duration = 1.0 + static_cast<double>(uniform_index(rng, 9));
    const std::int64_t internal =
        opt.internal_memory && uniform01(rng) < 0.2 ? static_cast<std::int64_t>(uniform_index(rng, 5)) : 0;
    b.op("op" + std::to_string(i), duration, internal);
  }
  int tensors = 0;
  for (int i = 0; i < n && tensors < opt.max_tensors; ++i) {
    const int outputs = uniform01(rng) < 0.15 ? 2 : (uniform01(rng) < 0.15 ? 0 : 1);
    for (int k = 0; k < outputs && tensors < opt.max_tensors; ++k) {
      const std::string t = "t" + std::to_string(tensors++);
      const bool control = uniform01(rng) < opt.control_probability;
      b.tensor(t, "op" + std::to_string(i), control ? 0 : 1 + static_cast<std::int64_t>(uniform_index(rng, 9)));
      for (int j = i + 1; j < n; ++j) {
        if (uniform01(rng) < opt.consume_probability) b.use(t, "op" + std::to_string(j), control);
      }
    }
  }
  return b.build();
}

}  // namespace placesched::testing
