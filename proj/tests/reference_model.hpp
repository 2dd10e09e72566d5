// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Independent brute-force evaluator of the execution model, written against
// the prose rules only and sharing no code with the simulator:
//  * a tensor is present on a device from the step it is produced there (or
//    received by a transfer) until the last step at which a local consumer
//    (op on that device, or outgoing transfer) runs; tensors nobody consumes
//    stay until the end;
//  * device memory at a step is the sum of present tensors plus the running
//    op's workspace;
//  * each device runs one thing at a time in schedule order; a transfer
//    waits for both endpoint devices and the producer.
// Enumeration walks every placement and every dependency-respecting order.

#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "placesched/graph.hpp"

namespace placesched::reference {

struct Node {
  bool transfer = false;
  std::string op;      // op id, or producer id for transfers
  std::string tensor;  // transfers only
  int to = -1;         // transfers only
};

struct Outcome {
  double makespan = 0;
  long long peak = 0;
};

struct Best {
  double makespan = std::numeric_limits<double>::infinity();
  long long peak = std::numeric_limits<long long>::max();
  long long orders = 0;
};

class Model {
 public:
  explicit Model(const ComputationGraph& g) : g_(g) {
    for (const auto& op : g.ops) {
      duration_[op.id] = op.duration;
      workspace_[op.id] = op.internal_memory;
    }
    for (const auto& t : g.tensors) {
      size_[t.id] = t.size;
      producer_[t.id] = t.producer;
    }
    for (const auto& e : g.consumers) {
      users_[e.tensor].push_back(e.op);
      needs_[e.op].push_back(e.tensor);
    }
  }

  Outcome evaluate(const std::map<std::string, int>& where, const std::vector<Node>& order, int devices,
                   double latency, double bandwidth) const {
    const int steps = static_cast<int>(order.size());
    std::map<std::string, int> op_step;
    std::map<std::pair<std::string, int>, int> arrive;  // (tensor, device) -> step
    for (int s = 0; s < steps; ++s) {
      const Node& n = order[s];
      if (!n.transfer) {
        op_step[n.op] = s;
        for (const auto& t : g_.tensors)
          if (t.producer == n.op) arrive[{t.id, where.at(n.op)}] = s;
      } else {
        arrive[{n.tensor, n.to}] = s;
      }
    }
    // Last local use per (tensor, device).
    std::map<std::pair<std::string, int>, int> leave;
    for (int s = 0; s < steps; ++s) {
      const Node& n = order[s];
      if (!n.transfer) {
        auto it = needs_.find(n.op);
        if (it == needs_.end()) continue;
        for (const auto& t : it->second) {
          auto key = std::make_pair(t, where.at(n.op));
          leave[key] = std::max(leave.count(key) ? leave[key] : -1, s);
        }
      } else {
        auto key = std::make_pair(n.tensor, where.at(producer_.at(n.tensor)));
        leave[key] = std::max(leave.count(key) ? leave[key] : -1, s);
      }
    }

    Outcome out;
    for (int s = 0; s < steps; ++s) {
      for (int dev = 0; dev < devices; ++dev) {
        long long mem = 0;
        for (const auto& [key, a] : arrive) {
          if (key.second != dev || a > s) continue;
          const bool unused = !users_.count(key.first);
          const int last = unused ? steps : leave.at(key);
          if (s <= last) mem += size_.at(key.first);
        }
        if (!order[s].transfer && where.at(order[s].op) == dev) mem += workspace_.at(order[s].op);
        out.peak = std::max(out.peak, mem);
      }
    }

    std::vector<double> free_at(devices, 0.0);
    std::map<std::string, double> op_done;
    std::map<std::pair<std::string, int>, double> received;
    for (const Node& n : order) {
      if (!n.transfer) {
        const int dev = where.at(n.op);
        double ready = free_at[dev];
        auto it = needs_.find(n.op);
        if (it != needs_.end()) {
          for (const auto& t : it->second) {
            const std::string& p = producer_.at(t);
            ready = std::max(ready, where.at(p) == dev ? op_done.at(p) : received.at({t, dev}));
          }
        }
        op_done[n.op] = ready + duration_.at(n.op);
        free_at[dev] = op_done[n.op];
      } else {
        const int from = where.at(n.op);
        double start = std::max({free_at[from], free_at[n.to], op_done.at(n.op)});
        double cost = latency;
        if (bandwidth != std::numeric_limits<double>::infinity()) cost += size_.at(n.tensor) / bandwidth;
        free_at[from] = free_at[n.to] = received[{n.tensor, n.to}] = start + cost;
      }
    }
    out.makespan = *std::max_element(free_at.begin(), free_at.end());
    return out;
  }

  /// Minimum makespan and minimum peak over all placements and orders.
  Best brute_force(int devices, double latency = 0.0,
                   double bandwidth = std::numeric_limits<double>::infinity()) const {
    Best best;
    const int o = static_cast<int>(g_.ops.size());
    std::vector<int> assign(o, 0);
    while (true) {
      std::map<std::string, int> where;
      for (int i = 0; i < o; ++i) where[g_.ops[i].id] = assign[i];

      std::vector<Node> nodes;
      for (const auto& op : g_.ops) nodes.push_back({false, op.id, "", -1});
      for (const auto& t : g_.tensors) {
        std::set<int> remote;
        auto it = users_.find(t.id);
        if (it != users_.end())
          for (const auto& c : it->second)
            if (where[c] != where[t.producer]) remote.insert(where[c]);
        for (int dev : remote) nodes.push_back({true, t.producer, t.id, dev});
      }
      std::vector<Node> order;
      std::vector<bool> used(nodes.size(), false);
      walk(nodes, used, order, where, devices, latency, bandwidth, best);

      int i = 0;
      while (i < o && ++assign[i] == devices) assign[i++] = 0;
      if (i == o) break;
    }
    return best;
  }

 private:
  bool runnable(const Node& n, const std::vector<Node>& order, const std::map<std::string, int>& where) const {
    auto has_run = [&](auto pred) { return std::any_of(order.begin(), order.end(), pred); };
    if (n.transfer) {
      return has_run([&](const Node& m) { return !m.transfer && m.op == n.op; });
    }
    auto it = needs_.find(n.op);
    if (it == needs_.end()) return true;
    for (const auto& t : it->second) {
      const std::string& p = producer_.at(t);
      const int dev = where.at(n.op);
      const bool ok = where.at(p) == dev
                          ? has_run([&](const Node& m) { return !m.transfer && m.op == p; })
                          : has_run([&](const Node& m) { return m.transfer && m.tensor == t && m.to == dev; });
      if (!ok) return false;
    }
    return true;
  }

  void walk(const std::vector<Node>& nodes, std::vector<bool>& used, std::vector<Node>& order,
            const std::map<std::string, int>& where, int devices, double latency, double bandwidth,
            Best& best) const {
    if (order.size() == nodes.size()) {
      Outcome o = evaluate(where, order, devices, latency, bandwidth);
      best.makespan = std::min(best.makespan, o.makespan);
      best.peak = std::min(best.peak, o.peak);
      ++best.orders;
      return;
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (used[i] || !runnable(nodes[i], order, where)) continue;
      used[i] = true;
      order.push_back(nodes[i]);
      walk(nodes, used, order, where, devices, latency, bandwidth, best);
      order.pop_back();
      used[i] = false;
    }
  }

  const ComputationGraph& g_;
  std::map<std::string, double> duration_;
  std::map<std::string, long long> workspace_;
  std::map<std::string, long long> size_;
  std::map<std::string, std::string> producer_;
  std::map<std::string, std::vector<std::string>> users_;
  std::map<std::string, std::vector<std::string>> needs_;
};

}  // namespace placesched::reference
