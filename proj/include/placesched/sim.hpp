// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "placesched/graph.hpp"

namespace placesched {

struct SimConfig {
  int devices = 2;
  std::int64_t memory_capacity = std::int64_t{16} << 30;  // bytes per device
  double transfer_latency = 0.0;
  double transfer_bandwidth = std::numeric_limits<double>::infinity();  // bytes per time unit

  double transfer_time(std::int64_t bytes) const {
    double t = transfer_latency;
    if (std::isfinite(transfer_bandwidth)) t += static_cast<double>(bytes) / transfer_bandwidth;
    return t;
  }
};

/// Device index per op, in op order.
using Placement = std::vector<int>;

/// Order over the nodes of an ExtendedGraph.
using FullSchedule = std::vector<int>;

struct TransferOp {
  int tensor;
  int from;
  int to;

  friend bool operator==(const TransferOp&, const TransferOp&) = default;
};

/// The op set extended with the synchronous transfers a placement implies.
/// Nodes [0, op_count) are the original ops; transfers follow, ordered by
/// (tensor, destination device). There is at most one transfer per
/// (tensor, destination).
class ExtendedGraph {
 public:
  ExtendedGraph() = default;
  ExtendedGraph(const IndexedGraph& graph, std::span<const int> placement, int devices) {
    rebuild(graph, placement, devices);
  }

  void rebuild(const IndexedGraph& graph, std::span<const int> placement, int devices) {
    if (devices < 1) throw InvariantError("device count must be positive");
    if (static_cast<int>(placement.size()) != graph.op_count()) {
      throw InvariantError("placement covers " + std::to_string(placement.size()) + " ops, graph has " +
                           std::to_string(graph.op_count()));
    }
    for (int dev : placement) {
      if (dev < 0 || dev >= devices) throw InvariantError("placement device out of range");
    }
    graph_ = &graph;
    devices_ = devices;
    placement_.assign(placement.begin(), placement.end());
    transfers_.clear();
    transfer_of_.assign(static_cast<std::size_t>(graph.tensor_count()) * devices, -1);
    const int o = graph.op_count();
    for (int t = 0; t < graph.tensor_count(); ++t) {
      const int src = placement_[graph.producer(t)];
      int* slots = &transfer_of_[static_cast<std::size_t>(t) * devices];
      for (int c : graph.consumers(t)) {
        if (placement_[c] != src) slots[placement_[c]] = 0;
      }
      for (int dst = 0; dst < devices; ++dst) {
        if (slots[dst] == 0) {
          slots[dst] = o + static_cast<int>(transfers_.size());
          transfers_.push_back({t, src, dst});
        }
      }
    }
  }

  const IndexedGraph& graph() const { return *graph_; }
  int devices() const { return devices_; }
  const Placement& placement() const { return placement_; }
  int op_count() const { return graph_->op_count(); }
  int size() const { return op_count() + static_cast<int>(transfers_.size()); }
  const std::vector<TransferOp>& transfers() const { return transfers_; }

  bool is_transfer(int node) const { return node >= op_count(); }
  const TransferOp& transfer(int node) const { return transfers_[node - op_count()]; }
  int transfer_node(int tensor, int device) const {
    return transfer_of_[static_cast<std::size_t>(tensor) * devices_ + device];
  }

  int dependency_count(int node) const {
    return is_transfer(node) ? 1 : static_cast<int>(graph_->inputs(node).size());
  }

  /// Calls f(dep) once per (input tensor) dependency of node.
  template <typename F>
  void for_each_dependency(int node, F&& f) const {
    if (is_transfer(node)) {
      f(graph_->producer(transfer(node).tensor));
      return;
    }
    const int dev = placement_[node];
    for (int t : graph_->inputs(node)) {
      const int p = graph_->producer(t);
      f(placement_[p] == dev ? p : transfer_node(t, dev));
    }
  }

  /// Mirror of for_each_dependency: f(succ) is called once for every
  /// dependency edge leaving node.
  template <typename F>
  void for_each_successor(int node, F&& f) const {
    if (is_transfer(node)) {
      const TransferOp& x = transfer(node);
      for (int c : graph_->consumers(x.tensor))
        if (placement_[c] == x.to) f(c);
      return;
    }
    const int dev = placement_[node];
    for (int t : graph_->outputs(node)) {
      for (int c : graph_->consumers(t))
        if (placement_[c] == dev) f(c);
      for (int dst = 0; dst < devices_; ++dst) {
        const int x = transfer_node(t, dst);
        if (x >= 0) f(x);
      }
    }
  }

  std::string node_name(int node) const {
    if (!is_transfer(node)) return graph_->op_id(node);
    const TransferOp& x = transfer(node);
    return "transfer(" + graph_->tensor_id(x.tensor) + ", " + std::to_string(x.from) + "->" +
           std::to_string(x.to) + ")";
  }

 private:
  const IndexedGraph* graph_ = nullptr;
  int devices_ = 1;
  Placement placement_;
  std::vector<TransferOp> transfers_;
  std::vector<int> transfer_of_;
};

inline ExtendedGraph build_extended_graph(const IndexedGraph& graph, const Placement& placement,
                                          int devices) {
  return ExtendedGraph(graph, placement, devices);
}

/// Resident tensors and memory on every device while one schedule step runs.
struct TraceStep {
  int node = -1;
  std::vector<std::vector<int>> resident;  // per device, tensor indices ascending
  std::vector<std::int64_t> memory;        // per device, including running op workspace
  std::vector<std::int64_t> memory_after;  // per device, after the step's frees
};

struct ExecutionReport {
  std::int64_t peak_memory = 0;
  std::vector<std::int64_t> per_device_peak;
  double makespan = 0.0;
  bool feasible = true;
  std::vector<TraceStep> trace;
};

/// Raised for schedules that run a node before its inputs are resident, or
/// that do not cover the extended op set exactly once.
class ScheduleError : public Error {
 public:
  ScheduleError(std::string node, const std::string& what) : Error(what), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

/// Lexicographic (feasibility class, objective); smaller is better and every
/// feasible value ranks ahead of every infeasible one.
struct Fitness {
  bool feasible = true;
  double value = 0.0;

  friend bool operator==(const Fitness&, const Fitness&) = default;
  friend bool operator<(const Fitness& a, const Fitness& b) {
    if (a.feasible != b.feasible) return a.feasible;
    return a.value < b.value;
  }
  friend bool operator>(const Fitness& a, const Fitness& b) { return b < a; }
  friend bool operator<=(const Fitness& a, const Fitness& b) { return !(b < a); }
  friend bool operator>=(const Fitness& a, const Fitness& b) { return !(a < b); }

  static Fitness worst() { return {false, std::numeric_limits<double>::infinity()}; }
};

inline Fitness fitness_from_report(const ExecutionReport& r, const SimConfig& config, Task task) {
  if (task == Task::kPeakMemory) return {true, static_cast<double>(r.peak_memory)};
  if (r.feasible) return {true, r.makespan};
  double excess = 0.0;
  for (std::int64_t peak : r.per_device_peak) {
    excess += static_cast<double>(std::max<std::int64_t>(0, peak - config.memory_capacity));
  }
  return {false, excess};
}

/// Step-by-step execution of a schedule. Holds scratch buffers so repeated
/// evaluations do not allocate; one instance per thread.
class Simulator {
 public:
  /// Runs the schedule and fills `report`. With `record_trace` the report
  /// also receives one TraceStep per schedule entry.
  void run(const ExtendedGraph& ext, std::span<const int> schedule, const SimConfig& config,
           bool record_trace, ExecutionReport& report) {
    const IndexedGraph& g = ext.graph();
    const int d = ext.devices();
    const int n = ext.size();
    const Placement& pl = ext.placement();

    if (static_cast<int>(schedule.size()) != n) {
      throw ScheduleError("", "schedule has " + std::to_string(schedule.size()) +
                                  " entries but the extended graph has " + std::to_string(n) +
                                  " nodes");
    }
    pending_.assign(static_cast<std::size_t>(g.tensor_count()) * d, 0);
    resident_.assign(pending_.size(), 0);
    seen_.assign(n, 0);
    finish_.assign(n, 0.0);
    clock_.assign(d, 0.0);
    mem_.assign(d, 0);
    report.per_device_peak.assign(d, 0);
    report.trace.clear();

    for (int t = 0; t < g.tensor_count(); ++t) {
      int* row = &pending_[static_cast<std::size_t>(t) * d];
      for (int c : g.consumers(t)) ++row[pl[c]];
      const int src = pl[g.producer(t)];
      for (int dst = 0; dst < d; ++dst)
        if (ext.transfer_node(t, dst) >= 0) ++row[src];
    }

    auto slot = [d](int t, int dev) { return static_cast<std::size_t>(t) * d + dev; };
    auto release = [&](int t, int dev) {
      if (--pending_[slot(t, dev)] == 0) {
        resident_[slot(t, dev)] = 0;
        mem_[dev] -= g.size(t);
      }
    };

    for (int step = 0; step < n; ++step) {
      const int x = schedule[step];
      if (x < 0 || x >= n) {
        throw ScheduleError("", "schedule entry " + std::to_string(x) + " is not a node");
      }
      if (seen_[x]) throw ScheduleError(ext.node_name(x), ext.node_name(x) + " scheduled twice");
      seen_[x] = 1;

      int busy_device = -1;
      std::int64_t workspace = 0;
      if (!ext.is_transfer(x)) {
        const int dev = pl[x];
        double start = clock_[dev];
        for (int t : g.inputs(x)) {
          if (!resident_[slot(t, dev)]) {
            throw ScheduleError(g.op_id(x), "op '" + g.op_id(x) + "' scheduled before input '" +
                                                g.tensor_id(t) + "' is resident on device " +
                                                std::to_string(dev));
          }
        }
        ext.for_each_dependency(x, [&](int dep) { start = std::max(start, finish_[dep]); });
        for (int t : g.outputs(x)) {
          resident_[slot(t, dev)] = 1;
          mem_[dev] += g.size(t);
        }
        busy_device = dev;
        workspace = g.internal_memory(x);
        auto& peak = report.per_device_peak[dev];
        peak = std::max(peak, mem_[dev] + workspace);
        if (record_trace) record(ext, x, busy_device, workspace, report);
        for (int t : g.inputs(x)) release(t, dev);
        finish_[x] = start + g.duration(x);
        clock_[dev] = finish_[x];
      } else {
        const TransferOp& tr = ext.transfer(x);
        if (!resident_[slot(tr.tensor, tr.from)]) {
          const std::string name = ext.node_name(x);
          throw ScheduleError(name, name + " scheduled before tensor '" + g.tensor_id(tr.tensor) +
                                        "' is resident on device " + std::to_string(tr.from));
        }
        const double start = std::max({clock_[tr.from], clock_[tr.to],
                                       finish_[g.producer(tr.tensor)]});
        finish_[x] = start + config.transfer_time(g.size(tr.tensor));
        clock_[tr.from] = clock_[tr.to] = finish_[x];
        resident_[slot(tr.tensor, tr.to)] = 1;
        mem_[tr.to] += g.size(tr.tensor);
        auto& peak = report.per_device_peak[tr.to];
        peak = std::max(peak, mem_[tr.to]);
        if (record_trace) record(ext, x, -1, 0, report);
        release(tr.tensor, tr.from);
      }
      if (record_trace) report.trace.back().memory_after = mem_;
    }

    report.makespan = 0.0;
    for (double c : clock_) report.makespan = std::max(report.makespan, c);
    report.peak_memory = 0;
    report.feasible = true;
    for (std::int64_t p : report.per_device_peak) {
      report.peak_memory = std::max(report.peak_memory, p);
      report.feasible = report.feasible && p <= config.memory_capacity;
    }
  }

  Fitness fitness(const ExtendedGraph& ext, std::span<const int> schedule, const SimConfig& config,
                  Task task) {
    run(ext, schedule, config, false, scratch_);
    return fitness_from_report(scratch_, config, task);
  }

 private:
  void record(const ExtendedGraph& ext, int node, int busy_device, std::int64_t workspace,
              ExecutionReport& report) const {
    const int d = ext.devices();
    TraceStep step;
    step.node = node;
    step.resident.assign(d, {});
    for (int t = 0; t < ext.graph().tensor_count(); ++t)
      for (int dev = 0; dev < d; ++dev)
        if (resident_[static_cast<std::size_t>(t) * d + dev]) step.resident[dev].push_back(t);
    step.memory = mem_;
    if (busy_device >= 0) step.memory[busy_device] += workspace;
    report.trace.push_back(std::move(step));
  }

  std::vector<int> pending_;
  std::vector<char> resident_;
  std::vector<char> seen_;
  std::vector<double> finish_;
  std::vector<double> clock_;
  std::vector<std::int64_t> mem_;
  ExecutionReport scratch_;
};

/// Simulates `schedule` over the extended graph implied by `placement`.
inline ExecutionReport simulate(const IndexedGraph& graph, const Placement& placement,
                                const FullSchedule& schedule, const SimConfig& config) {
  ExtendedGraph ext(graph, placement, config.devices);
  ExecutionReport report;
  Simulator sim;
  sim.run(ext, schedule, config, true, report);
  return report;
}

inline Fitness evaluate_fitness(const IndexedGraph& graph, const Placement& placement,
                                const FullSchedule& schedule, const SimConfig& config, Task task) {
  ExtendedGraph ext(graph, placement, config.devices);
  Simulator sim;
  return sim.fitness(ext, schedule, config, task);
}

}  // namespace placesched
