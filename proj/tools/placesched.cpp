// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 I/O failure, 2 usage or
// configuration error, 3 capability exceeded.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "placesched/algorithms.hpp"
#include "placesched/checkpoint.hpp"
#include "placesched/dataset.hpp"

namespace ps = placesched;
namespace fs = std::filesystem;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCapacity = 3;

struct SimOptions {
  std::string task = "runtime";
  int devices = 2;
  std::int64_t memory_capacity = std::int64_t{16} << 30;
  double transfer_latency = 0.0;
  double transfer_bandwidth = 0.0;  // 0 means unlimited

  void attach(CLI::App* app) {
    app->add_option("--task", task, "runtime or peak_memory")->capture_default_str();
    app->add_option("--devices", devices, "Number of devices")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--memory-capacity", memory_capacity, "Bytes per device")->capture_default_str();
    app->add_option("--transfer-latency", transfer_latency, "Fixed cost per transfer")->capture_default_str();
    app->add_option("--transfer-bandwidth", transfer_bandwidth, "Bytes per time unit; 0 = unlimited")
        ->capture_default_str();
  }
  ps::SimConfig config() const {
    ps::SimConfig c;
    c.devices = devices;
    c.memory_capacity = memory_capacity;
    c.transfer_latency = transfer_latency;
    if (transfer_bandwidth > 0) c.transfer_bandwidth = transfer_bandwidth;
    return c;
  }
  ps::Task parsed_task() const { return ps::parse_task(task); }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    ps::write_text_file(path, text);
  }
}

std::optional<ps::GridPoint> read_tuned(const std::string& path) {
  if (path.empty()) return std::nullopt;
  try {
    return ps::grid_point_from_json(nlohmann::json::parse(ps::read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ps::FormatError(std::string("tuned parameters: ") + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::uint64_t seed = 0;
  int threads = ps::default_threads();
  std::string spec_path;
  std::string out;
  int train = 200, valid = 50, test = 50;
  int copies = 0;
  bool full_scale = false;
  bool no_filter = false;
};

int cmd_generate(const GenerateArgs& a) {
  ps::GenSpec spec;
  if (!a.spec_path.empty()) {
    try {
      spec = ps::gen_spec_from_json(nlohmann::json::parse(ps::read_text_file(a.spec_path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ps::FormatError(std::string("generator spec: ") + e.what());
    }
  }
  if (a.no_filter) spec.filter = false;
  ps::DatasetCounts counts{a.train, a.valid, a.test};
  int copies = a.copies;
  if (a.full_scale) {
    counts = {10000, 1000, 1000};
    copies = 99;
  }
  auto report = ps::build_dataset(spec, counts, copies, a.out, a.seed, a.threads);
  std::printf("attempts,accepted,acceptance_rate,mean_filter_improvement,files\n%d,%d,%.6f,%.6f,%zu\n",
              report.attempts, report.accepted, report.acceptance_rate(), report.mean_kept_improvement,
              report.manifest.graphs.size());
  return 0;
}

// --- optimize ---------------------------------------------------------------

struct OptimizeArgs {
  std::uint64_t seed = 0;
  int threads = ps::default_threads();
  SimOptions sim;
  std::string graph;
  std::string algorithm = "brkga";
  int budget = 5000;
  std::string checkpoint;
  std::string tuned;
  std::string out;
  int oracle_cap = ps::kDefaultOracleOpCap;
  bool omit_wall_time = false;
};

int cmd_optimize(const OptimizeArgs& a) {
  if (!ps::is_algorithm(a.algorithm)) throw ps::UsageError("unknown algorithm '" + a.algorithm + "'");
  if (a.algorithm == "regal" && a.checkpoint.empty()) throw ps::UsageError("algorithm regal needs --checkpoint");
  if (a.algorithm == "tuned_brkga" && a.tuned.empty()) throw ps::UsageError("algorithm tuned_brkga needs --tuned");
  ps::IndexedGraph g(ps::read_graph_json(a.graph));
  ps::AlgorithmOptions opt;
  opt.budget = a.budget;
  opt.threads = a.threads;
  opt.oracle_cap = a.oracle_cap;
  std::optional<ps::Policy> policy;
  if (!a.checkpoint.empty()) policy.emplace(ps::load_policy(a.checkpoint));
  if (policy) opt.policy = &*policy;
  opt.tuned = read_tuned(a.tuned);
  const auto r = ps::run_algorithm(a.algorithm, g, a.sim.config(), a.sim.parsed_task(), a.seed, opt);
  write_output(a.out, ps::solution_to_json(g, a.sim.config(), r, !a.omit_wall_time).dump(1) + "\n");
  std::fprintf(stderr, "objective %.9g (%s), %lld evaluations\n", r.solution.fitness.value,
               r.solution.fitness.feasible ? "feasible" : "infeasible", r.evaluations);
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::uint64_t seed = 0;
  int threads = ps::default_threads();
  SimOptions sim;
  std::string dataset;
  std::string out;
  std::string curve;
  std::string algorithm = "regal";
  ps::TrainConfig cfg;
  ps::PolicyConfig policy;
  std::string node_update = "gru";
  std::string aggregation = "mean";
  int valid_budget = 0;
  int max_valid = 50;
  int grid_sample = 8;
  int tune_budget = 5000;
  int grid_limit = 0;
};

std::vector<ps::GraphInstance> prepare_split(const std::vector<ps::LoadedGraph>& graphs, const ps::SimConfig& sim,
                                             ps::Task task, std::uint64_t seed, int budget, int feature_budget,
                                             int threads) {
  std::vector<ps::GraphInstance> out(graphs.size());
  ps::parallel_for(static_cast<int>(graphs.size()), threads, [&](int, int i) {
    out[i] = ps::prepare_instance(graphs[i].entry.file, graphs[i].graph, sim, task, ps::derive_seed(seed, i), budget,
                                  feature_budget);
  });
  return out;
}

int cmd_train(TrainArgs a) {
  const ps::Manifest manifest = ps::read_manifest(a.dataset);
  const auto train_graphs = ps::load_split(a.dataset, manifest, "train");
  if (train_graphs.empty()) throw ps::UsageError("dataset has no training graphs");
  const ps::SimConfig sim = a.sim.config();
  const ps::Task task = a.sim.parsed_task();

  if (a.algorithm == "tuned_brkga") {
    std::vector<const ps::IndexedGraph*> sample;
    for (int i = 0; i < std::min<int>(a.grid_sample, static_cast<int>(train_graphs.size())); ++i) {
      sample.push_back(train_graphs[i].graph.get());
    }
    auto grid = ps::default_grid();
    if (a.grid_limit > 0 && a.grid_limit < static_cast<int>(grid.size())) grid.resize(a.grid_limit);
    const auto tuned = ps::tuned_brkga_search(sample, sim, task, grid, a.tune_budget, a.seed, a.threads);
    nlohmann::json j = ps::to_json(tuned.point);
    j["grid_index"] = tuned.index;
    j["mean_objective"] = tuned.mean_objective;
    write_output(a.out, j.dump(1) + "\n");
    return 0;
  }
  if (a.algorithm != "regal") throw ps::UsageError("train supports --algorithm regal or tuned_brkga");

  a.policy.devices = sim.devices;
  a.policy.node_features = ps::node_feature_count(sim.devices);
  a.policy.node_update = a.node_update == "mlp" ? ps::NodeUpdate::kMlp : ps::NodeUpdate::kGru;
  if (a.node_update != "mlp" && a.node_update != "gru") throw ps::UsageError("--node-update must be gru or mlp");
  a.policy.aggregation = a.aggregation == "sum" ? ps::Aggregation::kSum : ps::Aggregation::kMean;
  if (a.aggregation != "sum" && a.aggregation != "mean") throw ps::UsageError("--aggregation must be mean or sum");
  a.policy.check();
  a.cfg.threads = a.threads;
  a.cfg.check();

  auto valid_graphs = ps::load_split(a.dataset, manifest, "valid");
  if (static_cast<int>(valid_graphs.size()) > a.max_valid) valid_graphs.resize(a.max_valid);
  const int valid_budget = a.valid_budget > 0 ? a.valid_budget : a.cfg.train_budget;
  const auto train_set = prepare_split(train_graphs, sim, task, ps::derive_seed(a.seed, 1), a.cfg.train_budget,
                                       a.cfg.feature_budget, a.threads);
  const auto valid_set = prepare_split(valid_graphs, sim, task, ps::derive_seed(a.seed, 2), valid_budget,
                                       a.cfg.feature_budget, a.threads);
  ps::Policy policy(a.policy, ps::derive_seed(a.seed, 3));
  auto result = ps::train(policy, train_set, valid_set, a.cfg, ps::derive_seed(a.seed, 4), [&](const ps::CurvePoint& p) {
    if (p.validation_reward) {
      std::fprintf(stderr, "step %d mean_reward %.5f validation_reward %.5f\n", p.step, p.mean_reward,
                   *p.validation_reward);
    }
  });
  ps::Policy best(a.policy, result.best_params);
  nlohmann::json meta = {{"seed", a.seed},
                         {"steps", a.cfg.steps},
                         {"best_step", result.best_step},
                         {"task", std::string(ps::to_string(task))},
                         {"dataset", fs::path(a.dataset).filename().string()}};
  if (result.best_validation > -std::numeric_limits<double>::infinity()) {
    meta["best_validation_reward"] = result.best_validation;
  }
  ps::save_checkpoint(a.out, best, meta);
  if (!a.curve.empty()) ps::write_text_file(a.curve, ps::curve_csv(result.curve));
  return 0;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::uint64_t seed = 0;
  int threads = ps::default_threads();
  SimOptions sim;
  std::string dataset;
  std::string split = "test";
  std::string algorithms;
  int budget = 5000;
  std::string checkpoint;
  std::string tuned;
  std::string out;
  double bin_width = 1.0;
  int oracle_cap = ps::kDefaultOracleOpCap;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const ps::Manifest manifest = ps::read_manifest(a.dataset);
  std::vector<std::string> splits;
  if (a.split == "all") {
    splits = ps::split_names();
  } else {
    splits = split_list(a.split);
  }
  std::vector<std::string> algorithms = split_list(a.algorithms);
  if (algorithms.empty()) {
    algorithms = {"brkga", "local_search", "gp_dfs", "idrs"};
    if (!a.tuned.empty()) algorithms.push_back("tuned_brkga");
    if (!a.checkpoint.empty()) algorithms.push_back("regal");
  }
  for (const auto& alg : algorithms)
    if (!ps::is_algorithm(alg)) throw ps::UsageError("unknown algorithm '" + alg + "'");
  ps::AlgorithmOptions opt;
  opt.budget = a.budget;
  opt.threads = a.threads;
  opt.oracle_cap = a.oracle_cap;
  std::optional<ps::Policy> policy;
  if (!a.checkpoint.empty()) policy.emplace(ps::load_policy(a.checkpoint));
  if (policy) opt.policy = &*policy;
  opt.tuned = read_tuned(a.tuned);
  if (std::find(algorithms.begin(), algorithms.end(), "regal") != algorithms.end() && !policy) {
    throw ps::UsageError("algorithm regal needs --checkpoint");
  }
  if (std::find(algorithms.begin(), algorithms.end(), "tuned_brkga") != algorithms.end() && !opt.tuned) {
    throw ps::UsageError("algorithm tuned_brkga needs --tuned");
  }

  std::vector<ps::EvalGraph> graphs;
  for (const auto& s : splits) {
    if (std::find(ps::split_names().begin(), ps::split_names().end(), s) == ps::split_names().end()) {
      throw ps::UsageError("unknown split '" + s + "'");
    }
    for (auto& lg : ps::load_split(a.dataset, manifest, s)) graphs.push_back({lg.entry.file, s, lg.graph});
  }
  const auto records =
      ps::evaluate_graphs(graphs, algorithms, a.sim.config(), a.sim.parsed_task(), a.seed, opt);
  const auto rows = ps::summarize(records);
  fs::create_directories(a.out);
  ps::write_text_file(fs::path(a.out) / "metrics.csv", ps::metrics_csv(rows));
  ps::write_text_file(fs::path(a.out) / "records.csv", ps::records_csv(records));
  ps::write_text_file(fs::path(a.out) / "histogram.csv", ps::improvement_histogram_csv(records, a.bin_width));
  ps::write_text_file(fs::path(a.out) / "timing.csv", ps::timing_csv(rows));
  std::cout << ps::metrics_csv(rows);
  return 0;
}

// --- inspect ----------------------------------------------------------------

struct InspectArgs {
  std::string graph;
  std::string dataset;
  std::string out;
};

std::string stats_row(const std::string& name, const ps::IndexedGraph& g) {
  const int o = g.op_count();
  std::vector<int> in(o, 0), out(o, 0);
  int control = 0;
  std::int64_t bytes = 0;
  for (const auto& e : g.edges()) {
    ++in[e.consumer];
    ++out[e.producer];
    control += e.control;
  }
  for (int t = 0; t < g.tensor_count(); ++t) bytes += g.size(t);
  double duration = 0.0;
  std::int64_t internal = 0;
  for (int v = 0; v < o; ++v) {
    duration += g.duration(v);
    internal += g.internal_memory(v);
  }
  // Longest path in ops, over a topological order.
  std::vector<int> depth(o, 1), indegree = in, ready;
  for (int v = 0; v < o; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  int longest = o ? 1 : 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    longest = std::max(longest, depth[v]);
    for (int t : g.outputs(v))
      for (int c : g.consumers(t)) {
        depth[c] = std::max(depth[c], depth[v] + 1);
        if (--indegree[c] == 0) ready.push_back(c);
      }
  }
  const int max_in = o ? *std::max_element(in.begin(), in.end()) : 0;
  const int max_out = o ? *std::max_element(out.begin(), out.end()) : 0;
  return name + "," + std::to_string(o) + "," + std::to_string(g.tensor_count()) + "," +
         std::to_string(g.edge_count()) + "," + std::to_string(control) + "," + std::to_string(bytes) + "," +
         std::to_string(internal) + "," + ps::format_number(duration) + "," + std::to_string(max_in) + "," +
         std::to_string(max_out) + "," + std::to_string(longest) + "\n";
}

int cmd_inspect(const InspectArgs& a) {
  if (a.graph.empty() == a.dataset.empty()) throw ps::UsageError("inspect needs exactly one of --graph or --dataset");
  std::string csv =
      "graph,ops,tensors,edges,control_edges,total_tensor_bytes,total_internal_memory,total_duration,max_in_degree,"
      "max_out_degree,longest_path\n";
  if (!a.graph.empty()) {
    csv += stats_row(fs::path(a.graph).filename().string(), ps::IndexedGraph(ps::read_graph_json(a.graph)));
  } else {
    const auto m = ps::read_manifest(a.dataset);
    for (const auto& lg : ps::load_split(a.dataset, m, "")) csv += stats_row(lg.entry.file, *lg.graph);
  }
  write_output(a.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint device placement and scheduling of computation graphs"};
  app.require_subcommand(1);

  auto seed_opt = [](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Seed for every random choice")->required();
  };
  auto threads_opt = [](CLI::App* sub, int& threads) {
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  seed_opt(generate, gen.seed);
  threads_opt(generate, gen.threads);
  generate->add_option("--spec", gen.spec_path, "Generator specification JSON");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--train", gen.train, "Training base graphs")->capture_default_str();
  generate->add_option("--valid", gen.valid, "Validation base graphs")->capture_default_str();
  generate->add_option("--test", gen.test, "Test base graphs")->capture_default_str();
  generate->add_option("--copies", gen.copies, "Augmented copies per base graph")->capture_default_str();
  generate->add_flag("--full-scale", gen.full_scale, "10000/1000/1000 base graphs with 99 copies each");
  generate->add_flag("--no-filter", gen.no_filter, "Keep every generated graph");

  OptimizeArgs optm;
  auto* optimize = app.add_subcommand("optimize", "Optimize one graph");
  seed_opt(optimize, optm.seed);
  threads_opt(optimize, optm.threads);
  optm.sim.attach(optimize);
  optimize->add_option("--graph", optm.graph, "Graph JSON")->required();
  optimize->add_option("--algorithm", optm.algorithm,
                       "brkga | regal | local_search | gp_dfs | tuned_brkga | idrs | oracle")
      ->capture_default_str();
  optimize->add_option("--budget", optm.budget, "Fitness evaluations")->capture_default_str();
  optimize->add_option("--checkpoint", optm.checkpoint, "Policy checkpoint (regal)");
  optimize->add_option("--tuned", optm.tuned, "Tuned parameters JSON (tuned_brkga)");
  optimize->add_option("--out", optm.out, "Solution JSON (default stdout)");
  optimize->add_option("--oracle-cap", optm.oracle_cap, "Largest graph the oracle accepts")->capture_default_str();
  optimize->add_flag("--omit-wall-time", optm.omit_wall_time, "Leave wall_time out of the solution");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a policy, or grid-search BRKGA parameters");
  seed_opt(train, tr.seed);
  threads_opt(train, tr.threads);
  tr.sim.attach(train);
  train->add_option("--dataset", tr.dataset, "Dataset directory")->required();
  train->add_option("--out", tr.out, "Checkpoint (regal) or parameters JSON (tuned_brkga)")->required();
  train->add_option("--algorithm", tr.algorithm, "regal or tuned_brkga")->capture_default_str();
  train->add_option("--curve", tr.curve, "Training curve CSV");
  train->add_option("--steps", tr.cfg.steps)->capture_default_str();
  train->add_option("--minibatch", tr.cfg.minibatch)->capture_default_str();
  train->add_option("--learning-rate", tr.cfg.adam.learning_rate)->capture_default_str();
  train->add_option("--baseline-weight", tr.cfg.baseline_weight)->capture_default_str();
  train->add_option("--clip-norm", tr.cfg.clip_norm)->capture_default_str();
  train->add_option("--train-budget", tr.cfg.train_budget, "Evaluations per reward, features included")
      ->capture_default_str();
  train->add_option("--feature-budget", tr.cfg.feature_budget)->capture_default_str();
  train->add_option("--valid-budget", tr.valid_budget, "Evaluations per validation reward (default: train budget)");
  train->add_option("--validate-every", tr.cfg.validate_every)->capture_default_str();
  train->add_option("--max-valid", tr.max_valid, "Validation graphs used")->capture_default_str();
  train->add_option("--hidden", tr.policy.hidden)->capture_default_str();
  train->add_option("--rounds", tr.policy.rounds)->capture_default_str();
  train->add_option("--node-update", tr.node_update, "gru or mlp")->capture_default_str();
  train->add_option("--aggregation", tr.aggregation, "mean or sum")->capture_default_str();
  train->add_option("--k-place", tr.policy.k_place)->capture_default_str();
  train->add_option("--k-sched", tr.policy.k_sched)->capture_default_str();
  train->add_flag("--crossover-head", tr.policy.crossover_head);
  train->add_flag("--residual", tr.policy.residual);
  train->add_option("--grid-sample", tr.grid_sample, "Training graphs in the grid search")->capture_default_str();
  train->add_option("--grid-limit", tr.grid_limit, "Use only the first N grid points (0 = all 648)")
      ->capture_default_str();
  train->add_option("--tune-budget", tr.tune_budget, "Evaluations per grid-search run")->capture_default_str();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare algorithms on a dataset split");
  seed_opt(evaluate, ev.seed);
  threads_opt(evaluate, ev.threads);
  ev.sim.attach(evaluate);
  evaluate->add_option("--dataset", ev.dataset, "Dataset directory")->required();
  evaluate->add_option("--split", ev.split, "train, valid, test, a comma list, or all")->capture_default_str();
  evaluate->add_option("--algorithms", ev.algorithms, "Comma-separated algorithm names");
  evaluate->add_option("--budget", ev.budget, "Fitness evaluations per graph")->capture_default_str();
  evaluate->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint (regal)");
  evaluate->add_option("--tuned", ev.tuned, "Tuned parameters JSON (tuned_brkga)");
  evaluate->add_option("--out", ev.out, "Output directory for the CSV files")->required();
  evaluate->add_option("--bin-width", ev.bin_width, "Histogram bin width in percent")->capture_default_str();
  evaluate->add_option("--oracle-cap", ev.oracle_cap)->capture_default_str();

  InspectArgs in;
  auto* inspect = app.add_subcommand("inspect", "Print graph statistics as CSV");
  inspect->add_option("--graph", in.graph, "Graph JSON");
  inspect->add_option("--dataset", in.dataset, "Dataset directory");
  inspect->add_option("--out", in.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*optimize) return cmd_optimize(optm);
    if (*train) return cmd_train(tr);
    if (*evaluate) return cmd_evaluate(ev);
    if (*inspect) return cmd_inspect(in);
  } catch (const ps::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const ps::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ps::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
