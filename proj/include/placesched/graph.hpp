// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "placesched/common.hpp"

namespace placesched {

struct Op {
  std::string id;
  double duration = 0.0;  // abstract time units
  std::int64_t internal_memory = 0;  // bytes, resident only while the op runs

  friend bool operator==(const Op&, const Op&) = default;
};

struct Tensor {
  std::string id;
  std::string producer;
  std::int64_t size = 0;  // bytes; control dependencies are size 0

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct ConsumerEdge {
  std::string tensor;
  std::string op;
  bool control = false;

  friend bool operator==(const ConsumerEdge&, const ConsumerEdge&) = default;
};

/// Raw computation graph as read from disk. May be invalid; see validate().
struct ComputationGraph {
  std::vector<Op> ops;
  std::vector<Tensor> tensors;
  std::vector<ConsumerEdge> consumers;

  friend bool operator==(const ComputationGraph&, const ComputationGraph&) = default;
};

enum class ViolationKind {
  kDuplicateOpId,
  kDuplicateTensorId,
  kDanglingProducer,
  kDanglingTensor,
  kDanglingConsumer,
  kDuplicateConsumer,
  kInvalidDuration,
  kInvalidSize,
  kInvalidInternalMemory,
  kControlTensorNotEmpty,
  kCycle,
};

struct Violation {
  ViolationKind kind;
  std::string entity;
  std::string message;
};

/// Checks every graph invariant and returns the violations found. An empty
/// result means the graph is valid.
inline std::vector<Violation> validate(const ComputationGraph& graph) {
  std::vector<Violation> out;
  std::unordered_map<std::string, int> op_index;
  for (int i = 0; i < static_cast<int>(graph.ops.size()); ++i) {
    const Op& op = graph.ops[i];
    if (!op_index.emplace(op.id, i).second) {
      out.push_back({ViolationKind::kDuplicateOpId, op.id, "duplicate op id '" + op.id + "'"});
    }
    if (!std::isfinite(op.duration) || op.duration < 0) {
      out.push_back({ViolationKind::kInvalidDuration, op.id,
                     "op '" + op.id + "' has a negative or non-finite duration"});
    }
    if (op.internal_memory < 0) {
      out.push_back({ViolationKind::kInvalidInternalMemory, op.id,
                     "op '" + op.id + "' has negative internal memory"});
    }
  }

  std::unordered_map<std::string, int> tensor_index;
  for (int i = 0; i < static_cast<int>(graph.tensors.size()); ++i) {
    const Tensor& t = graph.tensors[i];
    if (!tensor_index.emplace(t.id, i).second) {
      out.push_back({ViolationKind::kDuplicateTensorId, t.id, "duplicate tensor id '" + t.id + "'"});
    }
    if (t.size < 0) {
      out.push_back({ViolationKind::kInvalidSize, t.id, "tensor '" + t.id + "' has negative size"});
    }
    if (!op_index.contains(t.producer)) {
      out.push_back({ViolationKind::kDanglingProducer, t.id,
                     "tensor '" + t.id + "' references missing producer '" + t.producer + "'"});
    }
  }

  std::unordered_set<std::string> seen_pairs;
  // Adjacency over ops for the cycle check; only edges with resolvable ends.
  std::vector<std::vector<int>> succ(graph.ops.size());
  for (const ConsumerEdge& e : graph.consumers) {
    const std::string label = e.tensor + " -> " + e.op;
    auto t = tensor_index.find(e.tensor);
    auto c = op_index.find(e.op);
    if (t == tensor_index.end()) {
      out.push_back({ViolationKind::kDanglingTensor, label,
                     "consumer edge references missing tensor '" + e.tensor + "'"});
    }
    if (c == op_index.end()) {
      out.push_back({ViolationKind::kDanglingConsumer, label,
                     "consumer edge references missing op '" + e.op + "'"});
    }
    if (!seen_pairs.insert(e.tensor + '\x1f' + e.op).second) {
      out.push_back({ViolationKind::kDuplicateConsumer, label,
                     "tensor '" + e.tensor + "' consumed twice by op '" + e.op + "'"});
    }
    if (t == tensor_index.end() || c == op_index.end()) continue;
    const Tensor& tensor = graph.tensors[t->second];
    if (e.control && tensor.size != 0) {
      out.push_back({ViolationKind::kControlTensorNotEmpty, label,
                     "control edge carries non-empty tensor '" + e.tensor + "'"});
    }
    auto p = op_index.find(tensor.producer);
    if (p != op_index.end()) succ[p->second].push_back(c->second);
  }

  // Kahn's algorithm; whatever is left unvisited lies on or behind a cycle.
  std::vector<int> indegree(graph.ops.size(), 0);
  for (const auto& s : succ)
    for (int v : s) ++indegree[v];
  std::queue<int> ready;
  for (int v = 0; v < static_cast<int>(indegree.size()); ++v)
    if (indegree[v] == 0) ready.push(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    int u = ready.front();
    ready.pop();
    ++visited;
    for (int v : succ[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  if (visited != graph.ops.size()) {
    std::string members;
    for (int v = 0; v < static_cast<int>(indegree.size()); ++v) {
      if (indegree[v] > 0) {
        if (!members.empty()) members += ", ";
        members += graph.ops[v].id;
      }
    }
    out.push_back({ViolationKind::kCycle, members, "dependency cycle through ops {" + members + "}"});
  }
  return out;
}

inline std::string describe(const std::vector<Violation>& violations) {
  std::string s;
  for (const auto& v : violations) {
    if (!s.empty()) s += "; ";
    s += v.message;
  }
  return s;
}

/// A validated graph with integer adjacency. Op, tensor and edge indices
/// follow the order of the underlying ComputationGraph.
class IndexedGraph {
 public:
  struct Edge {
    int tensor;
    int producer;
    int consumer;
    bool control;
  };

  IndexedGraph() = default;

  explicit IndexedGraph(ComputationGraph graph) : graph_(std::move(graph)) {
    if (auto violations = validate(graph_); !violations.empty()) {
      throw InvariantError("invalid graph: " + describe(violations));
    }
    const int o = static_cast<int>(graph_.ops.size());
    const int t = static_cast<int>(graph_.tensors.size());
    for (int i = 0; i < o; ++i) op_index_.emplace(graph_.ops[i].id, i);
    for (int i = 0; i < t; ++i) tensor_index_.emplace(graph_.tensors[i].id, i);

    duration_.resize(o);
    internal_memory_.resize(o);
    for (int i = 0; i < o; ++i) {
      duration_[i] = graph_.ops[i].duration;
      internal_memory_[i] = graph_.ops[i].internal_memory;
    }
    inputs_.assign(o, {});
    outputs_.assign(o, {});
    producer_.resize(t);
    size_.resize(t);
    consumers_.assign(t, {});
    for (int i = 0; i < t; ++i) {
      producer_[i] = op_index_.at(graph_.tensors[i].producer);
      size_[i] = graph_.tensors[i].size;
      outputs_[producer_[i]].push_back(i);
    }
    for (const ConsumerEdge& e : graph_.consumers) {
      const int ti = tensor_index_.at(e.tensor);
      const int ci = op_index_.at(e.op);
      consumers_[ti].push_back(ci);
      inputs_[ci].push_back(ti);
      edges_.push_back({ti, producer_[ti], ci, e.control});
    }
  }

  const ComputationGraph& graph() const { return graph_; }
  int op_count() const { return static_cast<int>(duration_.size()); }
  int tensor_count() const { return static_cast<int>(size_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const std::string& op_id(int op) const { return graph_.ops[op].id; }
  const std::string& tensor_id(int tensor) const { return graph_.tensors[tensor].id; }
  int op_index(const std::string& id) const { return op_index_.at(id); }
  int tensor_index(const std::string& id) const { return tensor_index_.at(id); }

  double duration(int op) const { return duration_[op]; }
  std::int64_t internal_memory(int op) const { return internal_memory_[op]; }
  std::int64_t size(int tensor) const { return size_[tensor]; }
  int producer(int tensor) const { return producer_[tensor]; }

  const std::vector<int>& inputs(int op) const { return inputs_[op]; }
  const std::vector<int>& outputs(int op) const { return outputs_[op]; }
  const std::vector<int>& consumers(int tensor) const { return consumers_[tensor]; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sum of input and output tensor sizes plus internal memory.
  std::int64_t memory_figure(int op) const {
    std::int64_t m = internal_memory_[op];
    for (int t : inputs_[op]) m += size_[t];
    for (int t : outputs_[op]) m += size_[t];
    return m;
  }

 private:
  ComputationGraph graph_;
  std::unordered_map<std::string, int> op_index_;
  std::unordered_map<std::string, int> tensor_index_;
  std::vector<double> duration_;
  std::vector<std::int64_t> internal_memory_;
  std::vector<std::int64_t> size_;
  std::vector<int> producer_;
  std::vector<std::vector<int>> inputs_;
  std::vector<std::vector<int>> outputs_;
  std::vector<std::vector<int>> consumers_;
  std::vector<Edge> edges_;
};

/// Op with the greatest memory figure (peak-memory task) or the greatest
/// duration (runtime task); lowest index on ties. Decoding forces this op
/// onto the first device.
inline int pinned_node(const IndexedGraph& graph, Task task) {
  if (graph.op_count() == 0) throw InvariantError("pinned_node on an empty graph");
  int best = 0;
  for (int v = 1; v < graph.op_count(); ++v) {
    const bool better = task == Task::kPeakMemory
                            ? graph.memory_figure(v) > graph.memory_figure(best)
                            : graph.duration(v) > graph.duration(best);
    if (better) best = v;
  }
  return best;
}

}  // namespace placesched
