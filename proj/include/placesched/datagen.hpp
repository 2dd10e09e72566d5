// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "placesched/decode.hpp"

namespace placesched {

enum class Family { kErdosRenyi, kBarabasiAlbert, kWattsStrogatz, kStochasticBlock };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::kErdosRenyi: return "erdos_renyi";
    case Family::kBarabasiAlbert: return "barabasi_albert";
    case Family::kWattsStrogatz: return "watts_strogatz";
    case Family::kStochasticBlock: return "stochastic_block";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::kErdosRenyi, Family::kBarabasiAlbert, Family::kWattsStrogatz, Family::kStochasticBlock}) {
    if (to_string(f) == s) return f;
  }
  throw FormatError("unknown graph family '" + s + "'");
}

struct GenSpec {
  std::vector<Family> families = {Family::kErdosRenyi, Family::kBarabasiAlbert, Family::kWattsStrogatz,
                                  Family::kStochasticBlock};
  double er_p = 0.05;
  int ba_m = 2;
  int ws_k = 4;
  double ws_p = 0.3;
  int sbm_blocks = 4;
  double sbm_p = 0.3;
  double sbm_q = 0.01;
  int min_nodes = 50;
  int max_nodes = 200;
  double size_mean = 50.0;
  double size_stddev = 10.0;
  double duration_noise = 0.1;
  std::vector<double> output_count_probs = {0.1, 0.8, 0.1};
  double control_probability = 0.2;
  bool filter = true;
  double filter_threshold = 0.18;
  int filter_short_budget = 1000;
  int filter_long_budget = 10000;

  void check() const {
    if (families.empty() || min_nodes < 1 || max_nodes < min_nodes || !(er_p >= 0 && er_p <= 1) || ba_m < 1 ||
        ws_k < 2 || ws_k % 2 != 0 || !(ws_p >= 0 && ws_p <= 1) || sbm_blocks < 1 || !(sbm_p >= 0 && sbm_p <= 1) ||
        !(sbm_q >= 0 && sbm_q <= 1) || !(size_stddev >= 0) || !(duration_noise >= 0) || output_count_probs.empty() ||
        !(control_probability >= 0 && control_probability <= 1) || filter_short_budget < 1 ||
        filter_long_budget < filter_short_budget) {
      throw InvariantError("inconsistent generator specification");
    }
  }
};

inline nlohmann::json to_json(const GenSpec& s) {
  nlohmann::json fams = nlohmann::json::array();
  for (Family f : s.families) fams.push_back(to_string(f));
  return {{"families", fams},
          {"erdos_renyi", {{"p", s.er_p}}},
          {"barabasi_albert", {{"m", s.ba_m}}},
          {"watts_strogatz", {{"k", s.ws_k}, {"p", s.ws_p}}},
          {"stochastic_block", {{"k", s.sbm_blocks}, {"p", s.sbm_p}, {"q", s.sbm_q}}},
          {"nodes", {s.min_nodes, s.max_nodes}},
          {"tensor_size", {{"mean", s.size_mean}, {"stddev", s.size_stddev}}},
          {"duration_noise", s.duration_noise},
          {"output_count_probs", s.output_count_probs},
          {"control_probability", s.control_probability},
          {"filter", {{"enabled", s.filter},
                      {"threshold", s.filter_threshold},
                      {"short_budget", s.filter_short_budget},
                      {"long_budget", s.filter_long_budget}}}};
}

/// Reads a generator specification. Missing keys keep their defaults;
/// unknown top-level keys are rejected.
inline GenSpec gen_spec_from_json(const nlohmann::json& j) {
  GenSpec s;
  static const std::set<std::string> known = {"families", "erdos_renyi", "barabasi_albert", "watts_strogatz",
                                              "stochastic_block", "nodes", "tensor_size", "duration_noise",
                                              "output_count_probs", "control_probability", "filter"};
  if (!j.is_object()) throw FormatError("generator spec must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw FormatError("unknown generator spec key \"" + k + "\"");
  }
  try {
    auto opt = [](const nlohmann::json& o, const char* key, auto& field) {
      if (o.contains(key)) field = o.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("families")) {
      s.families.clear();
      for (const auto& f : j.at("families")) s.families.push_back(parse_family(f.get<std::string>()));
    }
    if (j.contains("erdos_renyi")) opt(j.at("erdos_renyi"), "p", s.er_p);
    if (j.contains("barabasi_albert")) opt(j.at("barabasi_albert"), "m", s.ba_m);
    if (j.contains("watts_strogatz")) {
      opt(j.at("watts_strogatz"), "k", s.ws_k);
      opt(j.at("watts_strogatz"), "p", s.ws_p);
    }
    if (j.contains("stochastic_block")) {
      opt(j.at("stochastic_block"), "k", s.sbm_blocks);
      opt(j.at("stochastic_block"), "p", s.sbm_p);
      opt(j.at("stochastic_block"), "q", s.sbm_q);
    }
    if (j.contains("nodes")) {
      const auto r = j.at("nodes").get<std::vector<int>>();
      if (r.size() != 2) throw FormatError("\"nodes\" must be [min, max]");
      s.min_nodes = r[0];
      s.max_nodes = r[1];
    }
    if (j.contains("tensor_size")) {
      opt(j.at("tensor_size"), "mean", s.size_mean);
      opt(j.at("tensor_size"), "stddev", s.size_stddev);
    }
    opt(j, "duration_noise", s.duration_noise);
    opt(j, "output_count_probs", s.output_count_probs);
    opt(j, "control_probability", s.control_probability);
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      opt(f, "enabled", s.filter);
      opt(f, "threshold", s.filter_threshold);
      opt(f, "short_budget", s.filter_short_budget);
      opt(f, "long_budget", s.filter_long_budget);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("generator spec: ") + e.what());
  }
  s.check();
  return s;
}

using UndirectedEdges = std::vector<std::pair<int, int>>;

inline UndirectedEdges erdos_renyi(int n, double p, Rng& rng) {
  UndirectedEdges e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) e.emplace_back(u, v);
  return e;
}

/// Preferential attachment: each new node links to m distinct earlier nodes
/// picked proportionally to degree; the first new node links to the m seeds.
inline UndirectedEdges barabasi_albert(int n, int m, Rng& rng) {
  UndirectedEdges e;
  if (n <= m) return e;
  std::vector<int> repeated;
  std::vector<int> targets(m);
  std::iota(targets.begin(), targets.end(), 0);
  for (int v = m; v < n; ++v) {
    for (int t : targets) {
      e.emplace_back(t, v);
      repeated.push_back(t);
      repeated.push_back(v);
    }
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < m) chosen.insert(repeated[uniform_index(rng, repeated.size())]);
    targets.assign(chosen.begin(), chosen.end());
  }
  return e;
}

/// Ring lattice with k neighbours per node, each edge rewired with
/// probability p to a uniformly chosen non-duplicate endpoint.
inline UndirectedEdges watts_strogatz(int n, int k, double p, Rng& rng) {
  std::set<std::pair<int, int>> edges;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  if (n <= k) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.insert({u, v});
    return {edges.begin(), edges.end()};
  }
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < n; ++u) edges.insert(key(u, (u + j) % n));
  for (int j = 1; j <= k / 2; ++j) {
    for (int u = 0; u < n; ++u) {
      const auto old = key(u, (u + j) % n);
      if (!edges.count(old) || uniform01(rng) >= p) continue;
      int w = static_cast<int>(uniform_index(rng, n));
      int tries = 0;
      while ((w == u || edges.count(key(u, w))) && ++tries < 4 * n) w = static_cast<int>(uniform_index(rng, n));
      if (w == u || edges.count(key(u, w))) continue;
      edges.erase(old);
      edges.insert(key(u, w));
    }
  }
  return {edges.begin(), edges.end()};
}

/// k near-equal blocks; within-block edge probability p, across q.
inline UndirectedEdges stochastic_block(int n, int k, double p, double q, Rng& rng) {
  UndirectedEdges e;
  auto block = [&](int v) { return static_cast<int>(static_cast<long long>(v) * k / n); };
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (uniform01(rng) < (block(u) == block(v) ? p : q)) e.emplace_back(u, v);
  return e;
}

inline UndirectedEdges sample_family(const GenSpec& spec, Family f, int n, Rng& rng) {
  switch (f) {
    case Family::kErdosRenyi: return erdos_renyi(n, spec.er_p, rng);
    case Family::kBarabasiAlbert: return barabasi_albert(n, spec.ba_m, rng);
    case Family::kWattsStrogatz: return watts_strogatz(n, spec.ws_k, spec.ws_p, rng);
    case Family::kStochasticBlock: return stochastic_block(n, spec.sbm_blocks, spec.sbm_p, spec.sbm_q, rng);
  }
  return {};
}

struct GeneratedGraph {
  ComputationGraph graph;
  Family family = Family::kErdosRenyi;
  int nodes = 0;  // excluding source and sink
  std::size_t undirected_edges = 0;
};

/// One synthetic computation graph: a random undirected graph oriented by a
/// random node order, with a cost-free source feeding every head and a
/// cost-free sink fed by every tail through control tensors.
inline GeneratedGraph generate_instance(const GenSpec& spec, Rng& rng) {
  spec.check();
  GeneratedGraph out;
  out.family = spec.families[uniform_index(rng, spec.families.size())];
  const int n = spec.min_nodes + static_cast<int>(uniform_index(rng, spec.max_nodes - spec.min_nodes + 1));
  out.nodes = n;
  const UndirectedEdges undirected = sample_family(spec, out.family, n, rng);
  out.undirected_edges = undirected.size();

  std::vector<int> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indegree(n, 0);
  for (auto [a, b] : undirected) {
    const int u = rank[a] < rank[b] ? a : b;
    const int v = u == a ? b : a;
    succ[u].push_back(v);
    ++indegree[v];
  }
  for (auto& s : succ) std::sort(s.begin(), s.end(), [&](int x, int y) { return rank[x] < rank[y]; });
  std::vector<int> order(n);
  for (int v = 0; v < n; ++v) order[rank[v]] = v;

  std::normal_distribution<double> size_dist(spec.size_mean, spec.size_stddev);
  std::normal_distribution<double> noise(0.0, spec.duration_noise);
  std::discrete_distribution<int> outputs_dist(spec.output_count_probs.begin(), spec.output_count_probs.end());

  auto name = [](int v) { return "n" + std::to_string(v); };
  ComputationGraph& g = out.graph;
  g.ops.push_back({"source", 0.0, 0});
  g.tensors.push_back({"source:ctl", "source", 0});

  std::vector<std::vector<std::int64_t>> out_sizes(n);
  std::vector<std::int64_t> in_bytes(n, 0);
  std::vector<bool> has_control(n, false);
  struct DataEdge {
    int producer, consumer;
    int output;  // -1 for control
  };
  std::vector<DataEdge> deps;
  for (int u : order) {
    const int count = outputs_dist(rng);
    for (int k = 0; k < count; ++k) {
      out_sizes[u].push_back(std::max<std::int64_t>(1, std::llround(size_dist(rng))));
    }
    for (int v : succ[u]) {
      const bool control = out_sizes[u].empty() || uniform01(rng) < spec.control_probability;
      const int which = control ? -1 : static_cast<int>(uniform_index(rng, out_sizes[u].size()));
      deps.push_back({u, v, which});
      if (control) has_control[u] = true;
    }
  }
  // Distinct data tensors consumed per op.
  std::vector<std::set<int>> consumed(n);
  for (const auto& d : deps) {
    if (d.output >= 0 && consumed[d.consumer].insert(d.producer * 4 + d.output).second) {
      in_bytes[d.consumer] += out_sizes[d.producer][d.output];
    }
  }
  for (int u : order) {
    std::int64_t own = in_bytes[u];
    for (auto s : out_sizes[u]) own += s;
    const double duration = std::max(0.0, static_cast<double>(own) * (1.0 + noise(rng)));
    g.ops.push_back({name(u), duration, 0});
    for (std::size_t k = 0; k < out_sizes[u].size(); ++k) {
      g.tensors.push_back({name(u) + ":" + std::to_string(k), name(u), out_sizes[u][k]});
    }
    const bool tail = succ[u].empty();
    if (has_control[u] || tail) g.tensors.push_back({name(u) + ":ctl", name(u), 0});
  }
  g.ops.push_back({"sink", 0.0, 0});

  for (int u : order) {
    if (indegree[u] == 0) g.consumers.push_back({"source:ctl", name(u), true});
  }
  for (const auto& d : deps) {
    if (d.output < 0) {
      g.consumers.push_back({name(d.producer) + ":ctl", name(d.consumer), true});
    } else {
      g.consumers.push_back({name(d.producer) + ":" + std::to_string(d.output), name(d.consumer), false});
    }
  }
  for (int u : order) {
    if (succ[u].empty()) g.consumers.push_back({name(u) + ":ctl", "sink", true});
  }
  return out;
}

struct FilterResult {
  Fitness short_run;
  Fitness long_run;
  double improvement = 0.0;  // (short - long) / short
  bool keep = false;
};

/// Runtime improvement of uniform BRKGA from the short to the long budget,
/// measured on one run whose best-so-far is checkpointed at the short budget.
inline FilterResult filter_interesting(const IndexedGraph& g, const GenSpec& spec, std::uint64_t seed,
                                       const SimConfig& config = {}) {
  GraphProblem problem(g, config, Task::kRuntime);
  BrkgaParams params;
  params.budget = spec.filter_long_budget;
  auto r = run_brkga(problem, ProposalSet::uniform(problem.layout().size()), params, seed, 1,
                     {spec.filter_short_budget});
  FilterResult f;
  f.short_run = r.best_at.empty() ? r.best_fitness : r.best_at[0];
  f.long_run = r.best_fitness;
  f.improvement = f.short_run.value > 0 ? (f.short_run.value - f.long_run.value) / f.short_run.value : 0.0;
  f.keep = f.improvement >= spec.filter_threshold;
  return f;
}

/// Multiplicative noise copies: every tensor size and op duration is scaled
/// by its own Uniform(0.5, 1.5) draw. Integer sizes are rounded and kept
/// strictly inside (0.5 s, 1.5 s) where such an integer exists.
inline std::vector<ComputationGraph> augment(const ComputationGraph& g, int copies, Rng& rng) {
  std::vector<ComputationGraph> out;
  auto factor = [&]() {
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    return 0.5 + u;
  };
  for (int c = 0; c < copies; ++c) {
    ComputationGraph copy = g;
    for (auto& t : copy.tensors) {
      const double f = factor();
      if (t.size == 0) continue;
      const auto s = static_cast<double>(t.size);
      const auto lo = static_cast<std::int64_t>(std::floor(0.5 * s)) + 1;
      const auto hi = static_cast<std::int64_t>(std::ceil(1.5 * s)) - 1;
      t.size = std::clamp<std::int64_t>(std::llround(s * f), lo, std::max(lo, hi));
    }
    for (auto& op : copy.ops) op.duration *= factor();
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace placesched
