// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Name-keyed registry of every optimizer plus the dataset evaluation harness.

#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "placesched/baselines.hpp"
#include "placesched/oracle.hpp"
#include "placesched/trainer.hpp"

namespace placesched {

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = {"brkga",       "regal", "local_search", "gp_dfs",
                                                 "tuned_brkga", "idrs",  "oracle"};
  return names;
}

inline bool is_algorithm(const std::string& name) {
  const auto& n = algorithm_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

struct AlgorithmOptions {
  int budget = 5000;  // fitness calls, features included
  int feature_budget = kFeatureBudget;
  int threads = 1;
  int oracle_cap = kDefaultOracleOpCap;
  BrkgaParams brkga;
  LocalSearchConfig local_search;
  PartitionConfig partition;
  const Policy* policy = nullptr;  // regal
  std::optional<GridPoint> tuned;  // tuned_brkga
};

struct AlgorithmResult {
  std::string algorithm;
  Solution solution;
  long long evaluations = 0;
  double wall_time = 0.0;  // seconds
};

/// Runs one registered algorithm. Seeds follow the trainer's convention so
/// that regal against brkga at the same budget reproduces the training
/// reward: derive(seed, 1) features, derive(seed, 2) uniform search,
/// derive(seed, 3) the policy-guided search.
inline AlgorithmResult run_algorithm(const std::string& name, const IndexedGraph& g, const SimConfig& config,
                                     Task task, std::uint64_t seed, const AlgorithmOptions& opt) {
  if (!is_algorithm(name)) throw UsageError("unknown algorithm '" + name + "'");
  const auto start = std::chrono::steady_clock::now();
  AlgorithmResult out;
  out.algorithm = name;
  GraphProblem problem(g, config, task);
  auto from_run = [&](const RunResult& r) {
    out.solution = {r.placement, r.schedule, r.best_fitness};
  };
  if (name == "brkga") {
    BrkgaParams p = opt.brkga;
    p.budget = opt.budget;
    from_run(run_brkga(problem, ProposalSet::uniform(problem.layout().size()), p, derive_seed(seed, 2), opt.threads));
  } else if (name == "regal") {
    if (opt.policy == nullptr) throw UsageError("algorithm regal needs a policy checkpoint");
    const Policy& policy = *opt.policy;
    if (policy.config().devices != config.devices) {
      throw UsageError("checkpoint was trained for " + std::to_string(policy.config().devices) +
                       " devices, run uses " + std::to_string(config.devices));
    }
    if (opt.budget < opt.feature_budget) throw UsageError("budget is smaller than the feature budget");
    GraphProblem feature_problem(g, config, task);
    const auto bf = brkga_features(feature_problem, derive_seed(seed, 1), opt.feature_budget, opt.brkga, opt.threads);
    auto f = policy.forward(to_multigraph(g, task, config.devices, bf));
    const ActionAssignment action = policy.act(f, nullptr);
    BrkgaParams p = opt.brkga;
    p.budget = opt.budget - opt.feature_budget;
    if (policy.config().crossover_head) p.elite_bias = dequantize_crossover(action.crossover, policy.config().k_cross);
    const auto proposals = to_proposals(action, policy.config(), problem.layout(), problem.pinned_op());
    from_run(run_brkga(problem, proposals, p, derive_seed(seed, 3), opt.threads));
    out.evaluations += feature_problem.calls();
  } else if (name == "local_search") {
    out.solution = local_search(problem, opt.budget, derive_seed(seed, 4), opt.local_search).best;
  } else if (name == "gp_dfs") {
    out.solution = partition_dfs(problem, derive_seed(seed, 5), opt.partition).solution;
  } else if (name == "tuned_brkga") {
    if (!opt.tuned) throw UsageError("algorithm tuned_brkga needs tuned parameters");
    BrkgaParams p = opt.tuned->params;
    p.budget = opt.budget;
    const auto proposals = ProposalSet::constant(problem.layout().size(), opt.tuned->alpha, opt.tuned->beta);
    from_run(run_brkga(problem, proposals, p, derive_seed(seed, 2), opt.threads));
  } else if (name == "idrs") {
    from_run(idrs(problem, ProposalSet::uniform(problem.layout().size()), opt.brkga, derive_seed(seed, 2), opt.threads));
  } else {
    OracleResult r = exhaustive_oracle(g, config, task, opt.oracle_cap);
    out.solution = r.solution;
    out.evaluations = r.evaluated;
  }
  if (name != "oracle") out.evaluations += problem.calls();
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Solution file contents.
inline nlohmann::json solution_to_json(const IndexedGraph& g, const SimConfig& config, const AlgorithmResult& r,
                                       bool include_wall_time = true) {
  nlohmann::json placement = nlohmann::json::object();
  for (int v = 0; v < g.op_count(); ++v) placement[g.op_id(v)] = r.solution.placement[v];
  const ExtendedGraph ext(g, r.solution.placement, config.devices);
  nlohmann::json schedule = nlohmann::json::array();
  for (int x : r.solution.schedule) schedule.push_back(ext.node_name(x));
  nlohmann::json j = {{"algorithm", r.algorithm},
                      {"placement", placement},
                      {"schedule", schedule},
                      {"objective", r.solution.fitness.value},
                      {"feasible", r.solution.fitness.feasible},
                      {"evaluations_used", r.evaluations}};
  if (include_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

// ---------------------------------------------------------------------------
// Dataset evaluation

struct EvalGraph {
  std::string id;
  std::string split;
  std::shared_ptr<const IndexedGraph> graph;
};

struct EvalRecord {
  std::string graph_id;
  std::string split;
  std::string algorithm;
  Fitness fitness;
  long long evaluations = 0;
  double wall_time = 0.0;
  std::optional<double> improvement_pct;  // against uniform BRKGA at the same budget
  std::optional<double> gap_pct;          // against the best objective found on the graph
  std::string excluded;                   // reason, when either metric is missing
};

/// Per graph: the uniform BRKGA reference plus every requested algorithm,
/// all with per-graph seed derive(seed, graph index). Improvement is
/// 100 (o_ref - o) / o_ref; gap is 100 (o - o_best) / o_best. Runs that are
/// infeasible, or references equal to zero, are excluded from the metrics.
/// The oracle is skipped on graphs above its op cap.
inline std::vector<EvalRecord> evaluate_graphs(const std::vector<EvalGraph>& graphs,
                                               const std::vector<std::string>& algorithms, const SimConfig& config,
                                               Task task, std::uint64_t seed, const AlgorithmOptions& opt) {
  for (const auto& a : algorithms)
    if (!is_algorithm(a)) throw UsageError("unknown algorithm '" + a + "'");
  std::vector<std::vector<EvalRecord>> per_graph(graphs.size());
  AlgorithmOptions inner = opt;
  inner.threads = 1;
  parallel_for(static_cast<int>(graphs.size()), opt.threads, [&](int, int gi) {
    const auto& eg = graphs[gi];
    const std::uint64_t s = derive_seed(seed, gi);
    const AlgorithmResult ref = run_algorithm("brkga", *eg.graph, config, task, s, inner);
    auto& recs = per_graph[gi];
    for (const auto& a : algorithms) {
      EvalRecord rec;
      rec.graph_id = eg.id;
      rec.split = eg.split;
      rec.algorithm = a;
      if (a == "oracle" && eg.graph->op_count() > opt.oracle_cap) {
        rec.fitness = Fitness::worst();
        rec.excluded = "above oracle cap";
        recs.push_back(rec);
        continue;
      }
      const AlgorithmResult r = a == "brkga" ? ref : run_algorithm(a, *eg.graph, config, task, s, inner);
      rec.fitness = r.solution.fitness;
      rec.evaluations = r.evaluations;
      rec.wall_time = r.wall_time;
      recs.push_back(rec);
    }
    Fitness best = ref.solution.fitness;
    for (const auto& r : recs)
      if (r.excluded.empty() && r.fitness < best) best = r.fitness;
    for (auto& r : recs) {
      if (!r.excluded.empty()) continue;
      if (!r.fitness.feasible || !ref.solution.fitness.feasible || ref.solution.fitness.value == 0.0) {
        r.excluded = "infeasible or zero reference";
        continue;
      }
      const double o = r.fitness.value;
      r.improvement_pct = 100.0 * (ref.solution.fitness.value - o) / ref.solution.fitness.value;
      r.gap_pct = best.value == 0.0 ? 0.0 : 100.0 * (o - best.value) / best.value;
    }
  });
  std::vector<EvalRecord> out;
  for (auto& v : per_graph) out.insert(out.end(), v.begin(), v.end());
  return out;
}

struct EvalSummary {
  std::string algorithm;
  std::string split;
  double mean_improvement_pct = 0.0;
  double mean_gap_pct = 0.0;
  int n_graphs = 0;  // graphs contributing to the means
  int excluded = 0;
  double mean_wall_time = 0.0;
};

/// One row per (algorithm, split), in order of first appearance.
inline std::vector<EvalSummary> summarize(const std::vector<EvalRecord>& records) {
  std::vector<EvalSummary> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<int> timed;
  for (const auto& r : records) {
    auto key = std::make_pair(r.algorithm, r.split);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({r.algorithm, r.split});
      timed.push_back(0);
    }
    EvalSummary& s = rows[it->second];
    if (r.improvement_pct && r.gap_pct) {
      s.mean_improvement_pct += *r.improvement_pct;
      s.mean_gap_pct += *r.gap_pct;
      ++s.n_graphs;
    } else {
      ++s.excluded;
    }
    if (r.excluded != "above oracle cap") {
      s.mean_wall_time += r.wall_time;
      ++timed[it->second];
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].n_graphs > 0) {
      rows[i].mean_improvement_pct /= rows[i].n_graphs;
      rows[i].mean_gap_pct /= rows[i].n_graphs;
    }
    if (timed[i] > 0) rows[i].mean_wall_time /= timed[i];
  }
  return rows;
}

inline std::string format_number(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

inline std::string metrics_csv(const std::vector<EvalSummary>& rows) {
  std::string s = "algorithm,split,mean_improvement_pct,mean_gap_pct,n_graphs,excluded\n";
  for (const auto& r : rows) {
    s += r.algorithm + "," + r.split + "," + format_number(r.mean_improvement_pct) + "," +
         format_number(r.mean_gap_pct) + "," + std::to_string(r.n_graphs) + "," + std::to_string(r.excluded) + "\n";
  }
  return s;
}

inline std::string timing_csv(const std::vector<EvalSummary>& rows) {
  std::string s = "algorithm,split,mean_wall_time_s\n";
  for (const auto& r : rows) s += r.algorithm + "," + r.split + "," + format_number(r.mean_wall_time) + "\n";
  return s;
}

inline std::string records_csv(const std::vector<EvalRecord>& records) {
  std::string s = "graph,split,algorithm,feasible,objective,evaluations,improvement_pct,gap_pct,excluded\n";
  for (const auto& r : records) {
    s += r.graph_id + "," + r.split + "," + r.algorithm + "," + (r.fitness.feasible ? "1" : "0") + "," +
         format_number(r.fitness.value) + "," + std::to_string(r.evaluations) + "," +
         (r.improvement_pct ? format_number(*r.improvement_pct) : "") + "," +
         (r.gap_pct ? format_number(*r.gap_pct) : "") + "," + r.excluded + "\n";
  }
  return s;
}

/// Per-graph improvement counts in bins [k w, (k+1) w) for each algorithm
/// and split. `outcome` is better above zero and worse below; the bin that
/// starts at zero also holds exact ties.
inline std::string improvement_histogram_csv(const std::vector<EvalRecord>& records, double width = 1.0) {
  if (!(width > 0)) throw InvariantError("histogram bin width must be positive");
  std::map<std::tuple<std::string, std::string, long long>, int> bins;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : records) {
    if (!r.improvement_pct) continue;
    const auto key = std::make_pair(r.algorithm, r.split);
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
    ++bins[{r.algorithm, r.split, static_cast<long long>(std::floor(*r.improvement_pct / width))}];
  }
  std::string s = "algorithm,split,bin_low_pct,bin_high_pct,count,outcome\n";
  for (const auto& [alg, split] : order) {
    for (const auto& [key, count] : bins) {
      if (std::get<0>(key) != alg || std::get<1>(key) != split) continue;
      const double lo = static_cast<double>(std::get<2>(key)) * width;
      const double hi = lo + width;
      const char* outcome = lo > 0 ? "better" : (lo == 0 ? "equal_or_better" : "worse");
      s += alg + "," + split + "," + format_number(lo) + "," + format_number(hi) + "," + std::to_string(count) + "," +
           outcome + "\n";
    }
  }
  return s;
}

}  // namespace placesched
