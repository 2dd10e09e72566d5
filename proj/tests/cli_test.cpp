// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the placesched binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <map>

#include "placesched/checkpoint.hpp"
#include "placesched/dataset.hpp"
#include "placesched/oracle.hpp"
#include "test_graphs.hpp"

namespace placesched {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("placesched_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(PLACESCHED_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_graph(const std::string& name, const ComputationGraph& g) {
    write_graph_json(dir_ / name, g);
    return path(name);
  }

  std::string small_dataset(const std::string& name, int seed = 5) {
    const CliRun r = run("generate --seed " + std::to_string(seed) + " --out " + path(name) +
                      " --train 3 --valid 1 --test 2 --copies 1 --no-filter --threads 1");
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  fs::path dir_;
};

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  }
  return out;
}

TEST_F(CliTest, GenerateIsDeterministicAndNeedsASeed) {
  const std::string a = small_dataset("a");
  EXPECT_TRUE(fs::exists(fs::path(a) / "manifest.json"));
  const std::string b = small_dataset("b");
  EXPECT_EQ(read_tree(a), read_tree(b));
  const CliRun missing = run("generate --out " + path("c"));
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--seed"), std::string::npos);
  const CliRun summary = run("generate --seed 1 --out " + path("d") + " --train 1 --valid 0 --test 0 --no-filter");
  EXPECT_EQ(summary.code, 0);
  EXPECT_NE(summary.out.find("acceptance_rate"), std::string::npos);
}

TEST_F(CliTest, GenerateRejectsBadSpecs) {
  write_text_file(dir_ / "spec.json", R"({"families": ["lattice"]})");
  EXPECT_EQ(run("generate --seed 1 --out " + path("x") + " --spec " + path("spec.json")).code, 2);
  write_text_file(dir_ / "spec.json", "{ not json");
  EXPECT_EQ(run("generate --seed 1 --out " + path("x") + " --spec " + path("spec.json")).code, 2);
  EXPECT_EQ(run("generate --seed 1 --out " + path("x") + " --spec " + path("missing.json")).code, 1);
}

TEST_F(CliTest, OptimizeOracleMatchesExhaustiveMinimum) {
  const ComputationGraph g = testing::Builder()
                                 .op("a", 2).op("b", 3).op("c", 1).op("d", 2)
                                 .tensor("ta", "a", 5).tensor("tb", "b", 5).tensor("tc", "c", 5)
                                 .use("ta", "b").use("ta", "c").use("tb", "d").use("tc", "d")
                                 .build();
  const std::string file = write_graph("four.json", g);
  const CliRun r = run("optimize --seed 1 --algorithm oracle --graph " + file);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const double expected = exhaustive_oracle(IndexedGraph(g), {}, Task::kRuntime).best.value;
  EXPECT_EQ(j.at("objective").get<double>(), expected);
  for (const char* key : {"placement", "schedule", "objective", "evaluations_used", "wall_time"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST_F(CliTest, SolutionFileReproducesItsObjective) {
  Rng rng(3);
  const ComputationGraph g = testing::random_tiny_graph(rng, {6, 8, 8, 0.4, 0.1, true});
  const std::string file = write_graph("g.json", g);
  for (const std::string alg : {"brkga", "local_search", "gp_dfs", "idrs"}) {
    const CliRun r = run("optimize --seed 4 --budget 300 --algorithm " + alg + " --graph " + file);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    IndexedGraph ig(g);
    Placement pl(ig.op_count());
    for (int v = 0; v < ig.op_count(); ++v) pl[v] = j.at("placement").at(ig.op_id(v)).get<int>();
    ExtendedGraph ext(ig, pl, 2);
    std::map<std::string, int> by_name;
    for (int x = 0; x < ext.size(); ++x) by_name[ext.node_name(x)] = x;
    FullSchedule s;
    for (const auto& name : j.at("schedule")) s.push_back(by_name.at(name.get<std::string>()));
    EXPECT_EQ(evaluate_fitness(ig, pl, s, {}, Task::kRuntime).value, j.at("objective").get<double>()) << alg;
    EXPECT_LE(j.at("evaluations_used").get<int>(), 300);
  }
}

TEST_F(CliTest, OptimizeIsDeterministicAcrossThreads) {
  Rng rng(4);
  const std::string file = write_graph("g.json", testing::random_tiny_graph(rng, {6, 8, 8, 0.4, 0.1, true}));
  const CliRun a = run("optimize --seed 9 --budget 700 --omit-wall-time --threads 1 --graph " + file);
  const CliRun b = run("optimize --seed 9 --budget 700 --omit-wall-time --threads 3 --graph " + file);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.find("wall_time"), std::string::npos);
}

TEST_F(CliTest, OptimizeExitCodes) {
  const std::string file = write_graph("chain.json", testing::chain({1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(run("optimize --seed 1 --algorithm regal --graph " + file).code, 2);
  EXPECT_EQ(run("optimize --seed 1 --algorithm tuned_brkga --graph " + file).code, 2);
  EXPECT_EQ(run("optimize --seed 1 --algorithm annealing --graph " + file).code, 2);
  EXPECT_EQ(run("optimize --seed 1 --algorithm oracle --graph " + file).code, 3);
  EXPECT_EQ(run("optimize --seed 1 --graph " + path("missing.json")).code, 1);
  EXPECT_EQ(run("optimize --graph " + file).code, 2);
  EXPECT_EQ(run("optimize --seed 1 --task speed --graph " + file).code, 2);
  write_text_file(dir_ / "bad.json", R"({"ops": [], "tensors": [], "consumers": [], "extra": 1})");
  EXPECT_EQ(run("optimize --seed 1 --graph " + path("bad.json")).code, 2);
  write_text_file(dir_ / "bad.ckpt", "not a checkpoint");
  EXPECT_EQ(run("optimize --seed 1 --algorithm regal --checkpoint " + path("bad.ckpt") + " --graph " + file).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, TrainWritesALoadableCheckpointAndCurve) {
  const std::string ds = small_dataset("ds");
  const std::string common = "train --seed 3 --dataset " + ds + " --steps 4 --validate-every 2 --hidden 8 ";
  CliRun r = run(common + "--threads 1 --out " + path("a.ckpt") + " --curve " + path("a.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run(common + "--threads 2 --out " + path("b.ckpt") + " --curve " + path("b.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(path("a.ckpt")), read_text_file(path("b.ckpt")));
  const std::string curve = read_text_file(path("a.csv"));
  EXPECT_EQ(curve, read_text_file(path("b.csv")));
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 5);
  nlohmann::json meta;
  const Policy p = load_policy(path("a.ckpt"), &meta);
  EXPECT_EQ(p.config().hidden, 8);
  EXPECT_EQ(meta.at("steps").get<int>(), 4);

  // The checkpoint drives regal.
  const auto manifest = read_manifest(ds);
  const std::string graph = (fs::path(ds) / manifest.graphs[0].file).string();
  r = run("optimize --seed 2 --algorithm regal --budget 600 --checkpoint " + path("a.ckpt") + " --graph " + graph);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("evaluations_used").get<int>(), 600);
  EXPECT_EQ(run("optimize --seed 2 --algorithm regal --devices 3 --checkpoint " + path("a.ckpt") + " --graph " +
                graph).code,
            2);
}

TEST_F(CliTest, TuneWritesUsableParameters) {
  const std::string ds = small_dataset("ds");
  CliRun r = run("train --seed 3 --algorithm tuned_brkga --grid-limit 3 --grid-sample 2 --tune-budget 200 --dataset " +
              ds + " --out " + path("tuned.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(read_text_file(path("tuned.json")));
  EXPECT_LT(j.at("grid_index").get<int>(), 3);
  const auto manifest = read_manifest(ds);
  const std::string graph = (fs::path(ds) / manifest.graphs[0].file).string();
  r = run("optimize --seed 2 --algorithm tuned_brkga --budget 300 --tuned " + path("tuned.json") + " --graph " + graph);
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, EvaluateSelfComparisonAndSchema) {
  const std::string ds = small_dataset("ds");
  CliRun r = run("evaluate --seed 1 --budget 300 --algorithms brkga --split all --dataset " + ds + " --out " + path("e1"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string metrics = read_text_file(fs::path(path("e1")) / "metrics.csv");
  EXPECT_EQ(metrics,
            "algorithm,split,mean_improvement_pct,mean_gap_pct,n_graphs,excluded\n"
            "brkga,train,0,0,6,0\nbrkga,valid,0,0,2,0\nbrkga,test,0,0,4,0\n");
  for (const char* f : {"records.csv", "histogram.csv", "timing.csv"}) {
    EXPECT_TRUE(fs::exists(fs::path(path("e1")) / f)) << f;
  }

  const std::string algs = " --algorithms brkga,local_search,gp_dfs,idrs --split test,valid --dataset " + ds;
  r = run("evaluate --seed 1 --budget 300 --threads 1" + algs + " --out " + path("e2"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("evaluate --seed 1 --budget 300 --threads 3" + algs + " --out " + path("e3"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"metrics.csv", "records.csv", "histogram.csv"}) {
    EXPECT_EQ(read_text_file(fs::path(path("e2")) / f), read_text_file(fs::path(path("e3")) / f)) << f;
  }
  const std::string m2 = read_text_file(fs::path(path("e2")) / "metrics.csv");
  EXPECT_EQ(std::count(m2.begin(), m2.end(), '\n'), 1 + 4 * 2);

  EXPECT_EQ(run("evaluate --seed 1 --algorithms regal --dataset " + ds + " --out " + path("e4")).code, 2);
  EXPECT_EQ(run("evaluate --seed 1 --split holdout --dataset " + ds + " --out " + path("e4")).code, 2);
  EXPECT_EQ(run("evaluate --seed 1 --dataset " + path("nothing") + " --out " + path("e4")).code, 1);
}

TEST_F(CliTest, InspectPrintsStatistics) {
  const std::string file = write_graph("chain.json", testing::chain({1, 2, 3}, {4, 5}));
  const CliRun r = run("inspect --graph " + file);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("chain.json,3,2,2,0,9,0,6,1,1,3"), std::string::npos) << r.out;
  const std::string ds = small_dataset("ds");
  const CliRun d = run("inspect --dataset " + ds);
  ASSERT_EQ(d.code, 0);
  EXPECT_EQ(std::count(d.out.begin(), d.out.end(), '\n'), 1 + 12);
  EXPECT_EQ(run("inspect").code, 2);
}

}  // namespace
}  // namespace placesched
