// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "placesched/policy.hpp"
#include "test_graphs.hpp"

namespace placesched::testing {

/// Relabels nodes (new index of old node v is perm[v]) and shuffles edges.
inline AttributedMultigraph permute(const AttributedMultigraph& g, const std::vector<int>& perm, Rng& rng) {
  AttributedMultigraph out;
  out.node_count = g.node_count;
  out.node_features.resize(g.node_features.rows(), g.node_features.cols());
  for (int v = 0; v < g.node_count; ++v) out.node_features.row(perm[v]) = g.node_features.row(v);
  std::vector<int> edges(g.edge_count());
  std::iota(edges.begin(), edges.end(), 0);
  std::shuffle(edges.begin(), edges.end(), rng);
  out.edge_features.resize(g.edge_features.rows(), g.edge_features.cols());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const int e = edges[i];
    out.edge_source.push_back(perm[g.edge_source[e]]);
    out.edge_target.push_back(perm[g.edge_target[e]]);
    out.edge_tensor.push_back(g.edge_tensor[e]);
    out.edge_features.row(static_cast<Eigen::Index>(i)) = g.edge_features.row(e);
  }
  return out;
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Multigraph of a random graph with random (non-tied) BRKGA-like features.
inline AttributedMultigraph random_multigraph(Rng& rng, int devices, const TinyGraphOptions& opt) {
  ComputationGraph raw = random_tiny_graph(rng, opt);
  for (auto& op : raw.ops) op.duration += uniform01(rng);
  IndexedGraph g(raw);
  BrkgaNodeFeatures bf;
  for (int v = 0; v < g.op_count(); ++v) {
    std::vector<double> e(devices);
    double s = 0;
    for (double& x : e) s += (x = uniform01(rng) + 1e-3);
    for (double& x : e) x /= s;
    bf.device_expectation.push_back(e);
    bf.schedule_position.push_back(uniform01(rng));
  }
  return to_multigraph(g, Task::kRuntime, devices, bf);
}

}  // namespace placesched::testing
