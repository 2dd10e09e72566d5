// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "placesched/decode.hpp"

namespace placesched {

/// Per-node aggregates of a short uniform BRKGA run.
struct BrkgaNodeFeatures {
  std::vector<std::vector<double>> device_expectation;  // [op][device], rows sum to 1
  std::vector<double> schedule_position;                // [op], in [0, 1]
};

inline constexpr int kFeatureBudget = 400;

/// Runs uniform BRKGA for `budget` evaluations and averages, over the final
/// population, each op's device assignment and its normalized position among
/// the original ops of the decoded schedule.
inline BrkgaNodeFeatures brkga_features(const GraphProblem& problem, std::uint64_t seed,
                                        int budget = kFeatureBudget, BrkgaParams params = {}, int threads = 1) {
  params.budget = budget;
  const auto layout = problem.layout();
  Brkga ga(params, ProposalSet::uniform(layout.size()), problem.batch_fitness(threads), seed);
  const EvolutionState state = ga.run();

  const int o = layout.ops;
  const int d = layout.devices;
  BrkgaNodeFeatures f;
  f.device_expectation.assign(o, std::vector<double>(d, 0.0));
  f.schedule_position.assign(o, 0.0);
  auto eval = problem.evaluator();
  int members = 0;
  std::vector<int> rank(o);
  for (const Population& pop : state.populations) {
    for (const Chromosome& c : pop.members) {
      const Solution s = eval.decode(c);
      int r = 0;
      for (int x : s.schedule)
        if (x < o) rank[x] = r++;
      for (int v = 0; v < o; ++v) {
        f.device_expectation[v][s.placement[v]] += 1.0;
        f.schedule_position[v] += o > 1 ? static_cast<double>(rank[v]) / (o - 1) : 0.0;
      }
      ++members;
    }
  }
  if (members > 0) {
    for (int v = 0; v < o; ++v) {
      for (double& e : f.device_expectation[v]) e /= members;
      f.schedule_position[v] /= members;
    }
  }
  return f;
}

/// Graph-network input: one node per op, one directed edge per
/// (producer, tensor, consumer) triple.
///
/// Node feature columns, for d devices (d = 2 gives 11 columns):
///   0 sum of input tensor sizes       4 sum of predecessor runtimes
///   1 sum of output tensor sizes      5 sum of successor runtimes
///   2 extra internal memory           6 own runtime
///   3 is-max-memory one-hot           7 is-max-runtime one-hot
///   8 .. 8+d-1 expected placement on each device
///   8+d        expected normalized schedule position
/// Edge feature columns: tensor size, control one-hot, normalized index of
/// the tensor among its producer's outputs.
struct AttributedMultigraph {
  int node_count = 0;
  std::vector<int> edge_source;
  std::vector<int> edge_target;
  std::vector<int> edge_tensor;
  Eigen::MatrixXd node_features;
  Eigen::MatrixXd edge_features;

  int edge_count() const { return static_cast<int>(edge_source.size()); }
};

inline constexpr int kEdgeFeatureCount = 3;
inline constexpr int node_feature_count(int devices) { return 9 + devices; }

inline AttributedMultigraph to_multigraph(const IndexedGraph& g, Task task, int devices,
                                          const std::optional<BrkgaNodeFeatures>& brkga = std::nullopt) {
  const int n = g.op_count();
  AttributedMultigraph mg;
  mg.node_count = n;
  mg.node_features = Eigen::MatrixXd::Zero(n, node_feature_count(devices));
  mg.edge_features = Eigen::MatrixXd::Zero(g.edge_count(), kEdgeFeatureCount);

  std::int64_t max_memory = 0;
  double max_runtime = 0.0;
  int argmax_memory = 0, argmax_runtime = 0;
  for (int v = 0; v < n; ++v) {
    if (g.memory_figure(v) > max_memory) {
      max_memory = g.memory_figure(v);
      argmax_memory = v;
    }
    if (g.duration(v) > max_runtime) {
      max_runtime = g.duration(v);
      argmax_runtime = v;
    }
  }
  std::vector<std::vector<int>> preds(n), succs(n);
  for (const auto& e : g.edges()) {
    preds[e.consumer].push_back(e.producer);
    succs[e.producer].push_back(e.consumer);
  }
  for (auto* lists : {&preds, &succs}) {
    for (auto& l : *lists) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  }
  std::vector<double> pred_sum(n, 0.0), succ_sum(n, 0.0);
  double runtime_norm = max_runtime;
  for (int v = 0; v < n; ++v) {
    for (int p : preds[v]) pred_sum[v] += g.duration(p);
    for (int s : succs[v]) succ_sum[v] += g.duration(s);
    runtime_norm = std::max({runtime_norm, pred_sum[v], succ_sum[v]});
  }
  // Neighbour sums may exceed the largest single runtime; the divisor grows
  // to cover them so every runtime column stays in [0, 1].
  const double mem_scale = max_memory > 0 ? 1.0 / static_cast<double>(max_memory) : 0.0;
  const double run_scale = runtime_norm > 0 ? 1.0 / runtime_norm : 0.0;

  for (int v = 0; v < n; ++v) {
    auto row = mg.node_features.row(v);
    std::int64_t in = 0, out = 0;
    for (int t : g.inputs(v)) in += g.size(t);
    for (int t : g.outputs(v)) out += g.size(t);
    row(0) = static_cast<double>(in) * mem_scale;
    row(1) = static_cast<double>(out) * mem_scale;
    row(2) = static_cast<double>(g.internal_memory(v)) * mem_scale;
    row(3) = (max_memory > 0 && v == argmax_memory) ? 1.0 : 0.0;
    if (task == Task::kRuntime) {
      row(4) = pred_sum[v] * run_scale;
      row(5) = succ_sum[v] * run_scale;
      row(6) = g.duration(v) * run_scale;
      row(7) = (max_runtime > 0 && v == argmax_runtime) ? 1.0 : 0.0;
    }
    if (brkga) {
      for (int dev = 0; dev < devices; ++dev) row(8 + dev) = brkga->device_expectation[v][dev];
      row(8 + devices) = brkga->schedule_position[v];
    }
  }

  std::vector<int> ordinal(g.tensor_count());
  for (int v = 0; v < n; ++v) {
    const auto& outs = g.outputs(v);
    for (std::size_t i = 0; i < outs.size(); ++i) ordinal[outs[i]] = static_cast<int>(i) + 1;
  }
  for (int i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edges()[i];
    mg.edge_source.push_back(e.producer);
    mg.edge_target.push_back(e.consumer);
    mg.edge_tensor.push_back(e.tensor);
    mg.edge_features(i, 0) = static_cast<double>(g.size(e.tensor)) * mem_scale;
    mg.edge_features(i, 1) = e.control ? 1.0 : 0.0;
    mg.edge_features(i, 2) =
        static_cast<double>(ordinal[e.tensor]) / static_cast<double>(g.outputs(e.producer).size());
  }
  return mg;
}

}  // namespace placesched
