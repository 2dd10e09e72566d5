// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "placesched/decode.hpp"

namespace placesched {

struct OracleResult {
  Fitness best = Fitness::worst();
  Solution solution;
  long long evaluated = 0;  // (placement, order) pairs simulated
};

inline constexpr int kDefaultOracleOpCap = 6;

/// Global optimum by enumeration of every placement and every topological
/// order of the corresponding extended graph. Only for tiny graphs.
inline OracleResult exhaustive_oracle(const IndexedGraph& graph, const SimConfig& config, Task task,
                                      int op_cap = kDefaultOracleOpCap) {
  const int o = graph.op_count();
  if (o > op_cap) {
    throw CapacityError("exhaustive oracle is capped at " + std::to_string(op_cap) + " ops; graph has " +
                        std::to_string(o));
  }
  const int d = config.devices;
  OracleResult result;
  Simulator sim;
  ExtendedGraph ext;
  Placement placement(o, 0);
  FullSchedule order;
  std::vector<int> indegree;
  std::vector<char> done;

  // Depth-first enumeration of linear extensions.
  auto enumerate = [&](auto&& self) -> void {
    const int n = ext.size();
    if (static_cast<int>(order.size()) == n) {
      const Fitness f = sim.fitness(ext, order, config, task);
      ++result.evaluated;
      if (f < result.best) {
        result.best = f;
        result.solution = {ext.placement(), order, f};
      }
      return;
    }
    for (int x = 0; x < n; ++x) {
      if (done[x] || indegree[x] != 0) continue;
      done[x] = 1;
      order.push_back(x);
      ext.for_each_successor(x, [&](int y) { --indegree[y]; });
      self(self);
      ext.for_each_successor(x, [&](int y) { ++indegree[y]; });
      order.pop_back();
      done[x] = 0;
    }
  };

  while (true) {
    ext.rebuild(graph, placement, d);
    indegree.resize(ext.size());
    for (int x = 0; x < ext.size(); ++x) indegree[x] = ext.dependency_count(x);
    done.assign(ext.size(), 0);
    order.clear();
    enumerate(enumerate);

    int i = 0;
    while (i < o && ++placement[i] == d) placement[i++] = 0;
    if (i == o) break;
  }
  return result;
}

}  // namespace placesched
