// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "placesched/brkga.hpp"
#include "placesched/parallel.hpp"
#include "placesched/sim.hpp"

namespace placesched {

struct Solution {
  Placement placement;
  FullSchedule schedule;
  Fitness fitness;
};

/// Turns chromosomes into (placement, schedule) pairs. Every chromosome
/// decodes to a valid solution:
///  - each op goes to its highest-affinity device (lowest device on ties),
///    except the pinned op, which always goes to device 0;
///  - the schedule is a list-scheduling topological sort of the extended
///    graph where the ready node with the highest priority gene runs next
///    (lower node index on ties). Transfers use their (tensor, destination)
///    gene.
class Decoder {
 public:
  Decoder(const IndexedGraph& graph, int devices, int pinned_op)
      : graph_(&graph), layout_(graph, devices), pinned_(pinned_op) {}

  const ChromosomeLayout& layout() const { return layout_; }
  int pinned_op() const { return pinned_; }

  void decode_placement(std::span<const double> genes, Placement& placement) const {
    const int d = layout_.devices;
    placement.resize(layout_.ops);
    for (int v = 0; v < layout_.ops; ++v) {
      int best = 0;
      for (int dev = 1; dev < d; ++dev) {
        if (genes[layout_.affinity(v, dev)] > genes[layout_.affinity(v, best)]) best = dev;
      }
      placement[v] = best;
    }
    if (pinned_ >= 0) placement[pinned_] = 0;
  }

  /// Topological sort of `ext` with the given priority per extended node.
  void schedule_by_priority(const ExtendedGraph& ext, std::span<const double> priority,
                            FullSchedule& schedule) {
    const int n = ext.size();
    indegree_.resize(n);
    heap_.clear();
    schedule.clear();
    schedule.reserve(n);
    // Max-heap on priority; the smaller index wins ties.
    auto less = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second > b.second;
    };
    for (int x = 0; x < n; ++x) {
      indegree_[x] = ext.dependency_count(x);
      if (indegree_[x] == 0) heap_.emplace_back(priority[x], x);
    }
    std::make_heap(heap_.begin(), heap_.end(), less);
    while (!heap_.empty()) {
      std::pop_heap(heap_.begin(), heap_.end(), less);
      const int x = heap_.back().second;
      heap_.pop_back();
      schedule.push_back(x);
      ext.for_each_successor(x, [&](int y) {
        if (--indegree_[y] == 0) {
          heap_.emplace_back(priority[y], y);
          std::push_heap(heap_.begin(), heap_.end(), less);
        }
      });
    }
  }

  void decode(std::span<const double> genes, ExtendedGraph& ext, FullSchedule& schedule) {
    decode_placement(genes, placement_);
    ext.rebuild(*graph_, placement_, layout_.devices);
    priority_.resize(ext.size());
    for (int v = 0; v < layout_.ops; ++v) priority_[v] = genes[layout_.priority(v)];
    for (int x = layout_.ops; x < ext.size(); ++x) {
      const TransferOp& tr = ext.transfer(x);
      priority_[x] = genes[layout_.transfer(tr.tensor, tr.to)];
    }
    schedule_by_priority(ext, priority_, schedule);
  }

 private:
  const IndexedGraph* graph_;
  ChromosomeLayout layout_;
  int pinned_;
  Placement placement_;
  std::vector<double> priority_;
  std::vector<int> indegree_;
  std::vector<std::pair<double, int>> heap_;
};

/// A fixed optimization instance: graph, simulator configuration, task and
/// pinned op. Hands out per-thread evaluators and counts fitness calls.
class GraphProblem {
 public:
  GraphProblem(const IndexedGraph& graph, SimConfig config, Task task)
      : graph_(&graph), config_(config), task_(task), pinned_(pinned_node(graph, task)) {}

  const IndexedGraph& graph() const { return *graph_; }
  const SimConfig& config() const { return config_; }
  Task task() const { return task_; }
  int pinned_op() const { return pinned_; }
  ChromosomeLayout layout() const { return ChromosomeLayout(*graph_, config_.devices); }

  /// Fitness calls made through evaluators created by this problem.
  long long calls() const { return calls_->load(); }

  class Evaluator {
   public:
    explicit Evaluator(const GraphProblem& problem)
        : problem_(&problem), decoder_(problem.graph(), problem.config().devices, problem.pinned_op()) {}

    Fitness operator()(std::span<const double> genes) {
      decoder_.decode(genes, ext_, schedule_);
      problem_->calls_->fetch_add(1, std::memory_order_relaxed);
      return sim_.fitness(ext_, schedule_, problem_->config(), problem_->task());
    }

    /// Fitness of an explicit solution; counts as one call.
    Fitness evaluate(const Placement& placement, const FullSchedule& schedule) {
      ext_.rebuild(problem_->graph(), placement, problem_->config().devices);
      problem_->calls_->fetch_add(1, std::memory_order_relaxed);
      return sim_.fitness(ext_, schedule, problem_->config(), problem_->task());
    }

    Solution decode(std::span<const double> genes) {
      decoder_.decode(genes, ext_, schedule_);
      return {ext_.placement(), schedule_, {}};
    }

    Decoder& decoder() { return decoder_; }

   private:
    const GraphProblem* problem_;
    Decoder decoder_;
    Simulator sim_;
    ExtendedGraph ext_;
    FullSchedule schedule_;
  };

  Evaluator evaluator() const { return Evaluator(*this); }

  /// Batch fitness for the GA. Evaluators are created lazily per worker.
  BatchFitness batch_fitness(int threads = 1) const {
    auto pool = std::make_shared<std::vector<std::unique_ptr<Evaluator>>>();
    const GraphProblem* self = this;
    return [pool, self, threads](std::span<const Chromosome> batch, std::span<Fitness> out) {
      const int workers = std::clamp(threads, 1, static_cast<int>(batch.size()));
      while (static_cast<int>(pool->size()) < workers) pool->push_back(std::make_unique<Evaluator>(*self));
      parallel_for(static_cast<int>(batch.size()), workers,
                   [&](int worker, int i) { out[i] = (*(*pool)[worker])(batch[i]); });
    };
  }

 private:
  const IndexedGraph* graph_;
  SimConfig config_;
  Task task_;
  int pinned_;
  std::shared_ptr<std::atomic<long long>> calls_ = std::make_shared<std::atomic<long long>>(0);
};

struct RunResult {
  Chromosome best;
  Fitness best_fitness = Fitness::worst();
  Placement placement;
  FullSchedule schedule;
  int evaluations = 0;
  std::vector<Fitness> history;
  std::vector<Fitness> best_at;
};

inline RunResult to_run_result(const GraphProblem& problem, const EvolutionState& state) {
  RunResult r;
  r.best = state.best;
  r.best_fitness = state.best_fitness;
  r.evaluations = state.evaluations;
  r.history = state.history;
  r.best_at = state.best_at;
  if (!state.best.empty()) {
    auto eval = problem.evaluator();
    Solution s = eval.decode(state.best);
    r.placement = std::move(s.placement);
    r.schedule = std::move(s.schedule);
  }
  return r;
}

/// Runs BRKGA on one graph. `checkpoints` lists evaluation counts at which
/// the best-so-far fitness is also recorded (RunResult::best_at).
inline RunResult run_brkga(const GraphProblem& problem, const ProposalSet& proposals, const BrkgaParams& params,
                           std::uint64_t seed, int threads = 1, std::vector<int> checkpoints = {}) {
  if (proposals.size() != problem.layout().size()) {
    throw InvariantError("proposal set length does not match the chromosome layout");
  }
  Brkga ga(params, proposals, problem.batch_fitness(threads), seed, std::move(checkpoints));
  return to_run_result(problem, ga.run());
}

}  // namespace placesched
