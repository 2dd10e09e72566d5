// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <vector>

#include "placesched/decode.hpp"

namespace placesched {

// ---------------------------------------------------------------------------
// Shared helpers

/// Full schedule whose op subsequence is `order` (a topological order of the
/// ops). Each transfer is issued once its tensor exists, no later than its
/// earliest consumer on the destination device.
inline FullSchedule schedule_from_op_order(const ExtendedGraph& ext, const std::vector<int>& order) {
  const int o = static_cast<int>(order.size());
  std::vector<double> priority(ext.size(), 0.0);
  for (int pos = 0; pos < o; ++pos) priority[order[pos]] = static_cast<double>(o - pos);
  for (int x = o; x < ext.size(); ++x) {
    double p = 0.0;
    ext.for_each_successor(x, [&](int y) { p = std::max(p, priority[y]); });
    priority[x] = p;
  }
  Decoder scratch(ext.graph(), ext.devices(), -1);
  FullSchedule schedule;
  scratch.schedule_by_priority(ext, priority, schedule);
  return schedule;
}

/// Topological order of the ops; ready ops are drawn uniformly at random.
inline std::vector<int> random_topological_order(const IndexedGraph& g, Rng& rng) {
  const int o = g.op_count();
  std::vector<int> indegree(o, 0);
  for (const auto& e : g.edges()) ++indegree[e.consumer];
  std::vector<int> ready;
  for (int v = 0; v < o; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::vector<int> order;
  order.reserve(o);
  while (!ready.empty()) {
    const std::size_t i = uniform_index(rng, ready.size());
    const int v = ready[i];
    ready[i] = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int t : g.outputs(v))
      for (int c : g.consumers(t))
        if (--indegree[c] == 0) ready.push_back(c);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Local search

struct LocalSearchConfig {
  int max_restarts = std::numeric_limits<int>::max();
};

struct LocalSearchMove {
  enum class Kind { kDevice, kSchedule };
  int restart = 0;
  Kind kind = Kind::kDevice;
  int op = -1;
  int target = -1;  // new device, or new position in the op order
  Fitness before;
  Fitness after;
};

struct LocalSearchResult {
  Solution best;
  int evaluations = 0;
  int restarts = 0;
  std::vector<LocalSearchMove> moves;
};

/// Greedy descent from random starts. A start is a uniformly random placement
/// with a random topological order. Each scan tries moving one op to another
/// device, then moving one op to another feasible position of the order; the
/// first strictly improving move is taken and the scan begins again. A start
/// with no improving move is abandoned for a fresh one. Every simulator call
/// counts against `budget`.
inline LocalSearchResult local_search(const GraphProblem& problem, int budget, std::uint64_t seed,
                                      const LocalSearchConfig& config = {}) {
  if (budget < 1) throw InvariantError("local search needs a budget of at least one evaluation");
  const IndexedGraph& g = problem.graph();
  const int o = g.op_count();
  const int d = problem.config().devices;
  auto eval = problem.evaluator();
  ExtendedGraph ext;
  LocalSearchResult result;
  result.best.fitness = Fitness::worst();

  // Predecessor/successor op sets bound the feasible positions of an op.
  std::vector<std::vector<int>> preds(o), succs(o);
  for (const auto& e : g.edges()) {
    preds[e.consumer].push_back(e.producer);
    succs[e.producer].push_back(e.consumer);
  }

  Placement placement;
  std::vector<int> order;
  auto evaluate = [&](const Placement& pl, const std::vector<int>& ord, FullSchedule* out) {
    ext.rebuild(g, pl, d);
    FullSchedule s = schedule_from_op_order(ext, ord);
    const Fitness f = eval.evaluate(pl, s);
    ++result.evaluations;
    if (f < result.best.fitness) result.best = {pl, s, f};
    if (out) *out = std::move(s);
    return f;
  };

  for (int restart = 0; result.evaluations < budget && restart < config.max_restarts; ++restart) {
    Rng rng = substream(seed, restart);
    result.restarts = restart + 1;
    placement.assign(o, 0);
    for (int v = 0; v < o; ++v) placement[v] = static_cast<int>(uniform_index(rng, d));
    order = random_topological_order(g, rng);
    Fitness current = evaluate(placement, order, nullptr);

    std::vector<int> ops(o);
    std::iota(ops.begin(), ops.end(), 0);
    bool improved = true;
    while (improved && result.evaluations < budget) {
      improved = false;
      std::shuffle(ops.begin(), ops.end(), rng);
      for (int v : ops) {
        for (int dev = 0; dev < d && !improved && result.evaluations < budget; ++dev) {
          if (dev == placement[v]) continue;
          Placement trial = placement;
          trial[v] = dev;
          const Fitness f = evaluate(trial, order, nullptr);
          if (f < current) {
            result.moves.push_back({restart, LocalSearchMove::Kind::kDevice, v, dev, current, f});
            placement = std::move(trial);
            current = f;
            improved = true;
          }
        }
        if (improved || result.evaluations >= budget) break;
      }
      if (improved || result.evaluations >= budget) continue;

      std::vector<int> pos(o);
      for (int p = 0; p < o; ++p) pos[order[p]] = p;
      for (int v : ops) {
        int lo = 0, hi = o - 1;
        for (int u : preds[v]) lo = std::max(lo, pos[u] + 1);
        for (int w : succs[v]) hi = std::min(hi, pos[w] - 1);
        std::vector<int> targets;
        for (int p = lo; p <= hi; ++p)
          if (p != pos[v]) targets.push_back(p);
        std::shuffle(targets.begin(), targets.end(), rng);
        for (int p : targets) {
          if (result.evaluations >= budget) break;
          std::vector<int> trial = order;
          trial.erase(trial.begin() + pos[v]);
          trial.insert(trial.begin() + p, v);
          const Fitness f = evaluate(placement, trial, nullptr);
          if (f < current) {
            result.moves.push_back({restart, LocalSearchMove::Kind::kSchedule, v, p, current, f});
            order = std::move(trial);
            current = f;
            improved = true;
            break;
          }
        }
        if (improved || result.evaluations >= budget) break;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Graph partitioning + depth-first scheduling

/// Bytes moved between devices: each tensor counts once per device, other
/// than its producer's, that holds one of its consumers.
inline std::int64_t cut_bytes(const IndexedGraph& g, const Placement& placement) {
  std::int64_t total = 0;
  std::vector<int> seen;
  for (int t = 0; t < g.tensor_count(); ++t) {
    seen.clear();
    const int home = placement[g.producer(t)];
    for (int c : g.consumers(t)) {
      const int dev = placement[c];
      if (dev != home && std::find(seen.begin(), seen.end(), dev) == seen.end()) seen.push_back(dev);
    }
    total += g.size(t) * static_cast<std::int64_t>(seen.size());
  }
  return total;
}

struct PartitionConfig {
  int restarts = 8;
  int max_passes = 50;
};

namespace detail {

/// Cut of one tensor restricted to the ops in the current subproblem.
inline std::int64_t tensor_cut(const IndexedGraph& g, int t, const std::vector<int>& side) {
  const int home = side[g.producer(t)];
  if (home < 0) return 0;
  for (int c : g.consumers(t))
    if (side[c] >= 0 && side[c] != home) return g.size(t);
  return 0;
}

/// Pass-based Kernighan-Lin refinement with single-node moves. Every pass
/// moves each node once, greedily by exact gain among moves that keep the
/// left side within one node of `target_left`, then rolls back to the best
/// prefix. Neither side is ever emptied. `side` holds 0/1 for members and
/// -1 for everything else.
inline std::int64_t kl_refine(const IndexedGraph& g, const std::vector<int>& members, int target_left,
                              std::vector<int>& side, int max_passes) {
  std::vector<std::vector<int>> incident(g.op_count());
  for (int v : members) {
    for (int t : g.outputs(v)) incident[v].push_back(t);
    for (int t : g.inputs(v)) incident[v].push_back(t);
    std::sort(incident[v].begin(), incident[v].end());
    incident[v].erase(std::unique(incident[v].begin(), incident[v].end()), incident[v].end());
  }
  auto total_cut = [&] {
    std::int64_t c = 0;
    std::vector<char> counted(g.tensor_count(), 0);
    for (int v : members)
      for (int t : incident[v])
        if (!counted[t]) {
          counted[t] = 1;
          c += tensor_cut(g, t, side);
        }
    return c;
  };
  auto gain = [&](int v) {
    std::int64_t before = 0, after = 0;
    for (int t : incident[v]) before += tensor_cut(g, t, side);
    side[v] ^= 1;
    for (int t : incident[v]) after += tensor_cut(g, t, side);
    side[v] ^= 1;
    return before - after;
  };

  std::int64_t cut = total_cut();
  const int n = static_cast<int>(members.size());
  int left = 0;
  for (int v : members) left += side[v] == 0;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<char> locked(g.op_count(), 0);
    std::vector<int> moved;
    std::int64_t running = cut, best = cut;
    std::size_t best_prefix = 0;
    int running_left = left;
    for (std::size_t step = 0; step < members.size(); ++step) {
      int pick = -1;
      std::int64_t pick_gain = std::numeric_limits<std::int64_t>::min();
      for (int v : members) {
        if (locked[v]) continue;
        const int new_left = running_left + (side[v] == 0 ? -1 : 1);
        if (std::abs(new_left - target_left) > 1) continue;
        if (n >= 2 && (new_left == 0 || new_left == n)) continue;
        const std::int64_t gv = gain(v);
        if (gv > pick_gain) {
          pick_gain = gv;
          pick = v;
        }
      }
      if (pick < 0) break;
      running_left += side[pick] == 0 ? -1 : 1;
      side[pick] ^= 1;
      locked[pick] = 1;
      moved.push_back(pick);
      running -= pick_gain;
      if (running < best) {
        best = running;
        best_prefix = moved.size();
      }
    }
    for (std::size_t i = moved.size(); i > best_prefix; --i) side[moved[i - 1]] ^= 1;
    left = 0;
    for (int v : members) left += side[v] == 0;
    if (best >= cut) break;
    cut = best;
  }
  return cut;
}

}  // namespace detail

struct BisectionResult {
  std::vector<int> left;  // members placed on the first half
  std::vector<int> right;
  std::int64_t cut = 0;
  std::int64_t initial_cut = 0;  // cut of the first random bisection
};

/// Min-cut bisection of `members` with |left| within one of `target_left`.
/// The best of several random starts is kept.
inline BisectionResult kl_bisection(const IndexedGraph& g, const std::vector<int>& members, int target_left,
                                    Rng& rng, const PartitionConfig& config = {}) {
  BisectionResult best;
  best.cut = std::numeric_limits<std::int64_t>::max();
  std::vector<int> side(g.op_count(), -1);
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    std::vector<int> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i) side[shuffled[i]] = static_cast<int>(i) < target_left ? 0 : 1;
    if (r == 0) {
      std::int64_t c = 0;
      for (int t = 0; t < g.tensor_count(); ++t) c += detail::tensor_cut(g, t, side);
      best.initial_cut = c;
    }
    const std::int64_t cut = detail::kl_refine(g, members, target_left, side, config.max_passes);
    if (cut < best.cut) {
      best.cut = cut;
      best.left.clear();
      best.right.clear();
      for (int v : members) (side[v] == 0 ? best.left : best.right).push_back(v);
    }
  }
  return best;
}

/// Placement by recursive KL bisection over the device range.
inline Placement partition_placement(const IndexedGraph& g, int devices, Rng& rng, const PartitionConfig& config = {},
                                     std::int64_t* first_initial_cut = nullptr) {
  Placement placement(g.op_count(), 0);
  bool first = true;
  auto split = [&](auto&& self, const std::vector<int>& members, int lo, int hi) -> void {
    if (hi - lo == 1 || members.empty()) {
      for (int v : members) placement[v] = lo;
      return;
    }
    const int mid = lo + (hi - lo) / 2;
    const int n = static_cast<int>(members.size());
    const int target =
        std::clamp(static_cast<int>(std::llround(static_cast<double>(n) * (mid - lo) / (hi - lo))), 1, n - 1);
    BisectionResult b = kl_bisection(g, members, target, rng, config);
    if (first && first_initial_cut) *first_initial_cut = b.initial_cut;
    first = false;
    self(self, b.left, lo, mid);
    self(self, b.right, mid, hi);
  };
  std::vector<int> all(g.op_count());
  std::iota(all.begin(), all.end(), 0);
  split(split, all, 0, devices);
  return placement;
}

/// Bytes an extended-graph node emits: the op's outputs, or the moved tensor.
inline std::int64_t emitted_bytes(const ExtendedGraph& ext, int x) {
  const IndexedGraph& g = ext.graph();
  if (ext.is_transfer(x)) return g.size(ext.transfer(x).tensor);
  std::int64_t s = 0;
  for (int t : g.outputs(x)) s += g.size(t);
  return s;
}

/// Depth-first list schedule: after a node runs, its newly ready successors
/// are explored first, largest emitted bytes first (lower index on ties).
inline FullSchedule dfs_schedule(const ExtendedGraph& ext) {
  const int n = ext.size();
  std::vector<int> indegree(n);
  std::vector<int> stack;
  auto push_sorted = [&](std::vector<int> nodes) {
    // The stack pops from the back, so the preferred node goes last.
    std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
      const auto sa = emitted_bytes(ext, a), sb = emitted_bytes(ext, b);
      if (sa != sb) return sa < sb;
      return a > b;
    });
    stack.insert(stack.end(), nodes.begin(), nodes.end());
  };
  std::vector<int> ready;
  for (int x = 0; x < n; ++x) {
    indegree[x] = ext.dependency_count(x);
    if (indegree[x] == 0) ready.push_back(x);
  }
  push_sorted(ready);
  FullSchedule schedule;
  schedule.reserve(n);
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    schedule.push_back(x);
    ready.clear();
    ext.for_each_successor(x, [&](int y) {
      if (--indegree[y] == 0) ready.push_back(y);
    });
    push_sorted(ready);
  }
  return schedule;
}

struct PartitionResult {
  Solution solution;
  std::int64_t cut = 0;
  std::int64_t initial_cut = 0;
  int evaluations = 0;
};

/// Graph-partition placement plus depth-first schedule. One simulator call.
inline PartitionResult partition_dfs(const GraphProblem& problem, std::uint64_t seed,
                                     const PartitionConfig& config = {}) {
  Rng rng(seed);
  PartitionResult r;
  const int d = problem.config().devices;
  Placement placement = partition_placement(problem.graph(), d, rng, config, &r.initial_cut);
  ExtendedGraph ext(problem.graph(), placement, d);
  FullSchedule schedule = dfs_schedule(ext);
  auto eval = problem.evaluator();
  const Fitness f = eval.evaluate(placement, schedule);
  r.cut = cut_bytes(problem.graph(), placement);
  r.solution = {std::move(placement), std::move(schedule), f};
  r.evaluations = 1;
  return r;
}

// ---------------------------------------------------------------------------
// Instance-independent tuned BRKGA

/// BRKGA hyperparameters plus one Beta(alpha, beta) shared by every gene.
struct GridPoint {
  BrkgaParams params;
  double alpha = 1.0;
  double beta = 1.0;
};

inline nlohmann::json to_json(const GridPoint& p) {
  return {{"alpha", p.alpha},
          {"beta", p.beta},
          {"population", p.params.population},
          {"elites", p.params.elites},
          {"children", p.params.children},
          {"elite_bias", p.params.elite_bias},
          {"populations", p.params.populations}};
}

inline GridPoint grid_point_from_json(const nlohmann::json& j) {
  GridPoint p;
  try {
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.params.population = j.at("population").get<int>();
    p.params.elites = j.at("elites").get<int>();
    p.params.children = j.at("children").get<int>();
    p.params.elite_bias = j.at("elite_bias").get<double>();
    p.params.populations = j.at("populations").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tuned BRKGA parameters: ") + e.what());
  }
  p.params.check();
  if (!(p.alpha > 0) || !(p.beta > 0)) throw InvariantError("tuned BRKGA beta parameters must be positive");
  return p;
}

/// 3 x 3 Beta shapes, 3 population sizes, 2 elite fractions, 4 mutant
/// fractions and 1 to 3 populations: 648 points.
inline std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (double a : {0.5, 1.0, 2.0})
    for (double b : {0.5, 1.0, 2.0})
      for (int pi : {50, 100, 150})
        for (double ef : {0.1, 0.2})
          for (double mf : {0.1, 0.15, 0.2, 0.25})
            for (int pops : {1, 2, 3}) {
              GridPoint p;
              p.alpha = a;
              p.beta = b;
              p.params.population = pi;
              p.params.elites = static_cast<int>(std::lround(ef * pi));
              const int mutants = static_cast<int>(std::lround(mf * pi));
              p.params.children = pi - p.params.elites - mutants;
              p.params.populations = pops;
              grid.push_back(p);
            }
  return grid;
}

struct TunedBrkga {
  GridPoint point;
  int index = -1;
  double mean_objective = 0.0;
  std::vector<double> mean_objectives;  // per grid point
  std::vector<int> infeasible;          // per grid point, runs without a feasible solution
};

/// Grid search for the single setting with the lowest mean objective over
/// the sample (fewest infeasible runs first; lowest index on ties). Every
/// point sees the same per-graph seeds.
inline TunedBrkga tuned_brkga_search(const std::vector<const IndexedGraph*>& sample, const SimConfig& config,
                                     Task task, const std::vector<GridPoint>& grid, int budget, std::uint64_t seed,
                                     int threads = 1) {
  if (sample.empty()) throw InvariantError("tuned BRKGA search needs a non-empty sample");
  if (grid.empty()) throw InvariantError("tuned BRKGA search needs a non-empty grid");
  TunedBrkga out;
  out.mean_objectives.assign(grid.size(), 0.0);
  out.infeasible.assign(grid.size(), 0);
  parallel_for(static_cast<int>(grid.size()), threads, [&](int, int i) {
    BrkgaParams p = grid[i].params;
    p.budget = budget;
    double sum = 0.0;
    for (std::size_t s = 0; s < sample.size(); ++s) {
      GraphProblem problem(*sample[s], config, task);
      const auto proposals = ProposalSet::constant(problem.layout().size(), grid[i].alpha, grid[i].beta);
      const Fitness f = run_brkga(problem, proposals, p, derive_seed(seed, s)).best_fitness;
      if (!f.feasible) ++out.infeasible[i];
      sum += f.value;
    }
    out.mean_objectives[i] = sum / static_cast<double>(sample.size());
  });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (out.index < 0 || out.infeasible[i] < out.infeasible[out.index] ||
        (out.infeasible[i] == out.infeasible[out.index] && out.mean_objectives[i] < out.mean_objectives[out.index])) {
      out.index = static_cast<int>(i);
    }
  }
  out.point = grid[out.index];
  out.mean_objective = out.mean_objectives[out.index];
  return out;
}

/// Instance-dependent random search: BRKGA stopped after its first
/// population has been sampled and evaluated.
inline RunResult idrs(const GraphProblem& problem, const ProposalSet& proposals, const BrkgaParams& params,
                      std::uint64_t seed, int threads = 1) {
  BrkgaParams p = params;
  p.budget = p.population;
  return run_brkga(problem, proposals, p, seed, threads);
}

}  // namespace placesched
