// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "placesched/checkpoint.hpp"
#include "placesched/trainer.hpp"
#include "policy_helpers.hpp"

namespace placesched {
namespace {

using testing::Builder;

PolicyConfig small_config(NodeUpdate update = NodeUpdate::kGru, Aggregation agg = Aggregation::kMean) {
  PolicyConfig c;
  c.hidden = 6;
  c.rounds = 2;
  c.node_update = update;
  c.aggregation = agg;
  return c;
}

TEST(Dequantize, Examples) {
  auto a = dequantize(0, 0, 1);
  EXPECT_DOUBLE_EQ(a.alpha, 0.5);
  EXPECT_DOUBLE_EQ(a.beta, 0.5);
  auto b = dequantize(7, 3, 16);
  EXPECT_NEAR(b.alpha, 1.529412, 5e-7);
  EXPECT_NEAR(b.beta, 1.720588, 5e-7);
  EXPECT_NEAR(b.alpha + b.beta, 3.25, 1e-12);
  EXPECT_THROW(dequantize(2, 0, 2), InvariantError);
}

TEST(Dequantize, MomentsMatch) {
  for (int k : {1, 2, 4, 16}) {
    for (int m = 0; m < k; ++m) {
      for (int v = 0; v < k; ++v) {
        const auto p = dequantize(m, v, k);
        ASSERT_GT(p.alpha, 0.0);
        ASSERT_GT(p.beta, 0.0);
        const double mu = (m + 1.0) / (k + 1.0);
        const double var = mu * (1 - mu) * (v + 1.0) / (k + 1.0);
        const double s = p.alpha + p.beta;
        EXPECT_NEAR(p.alpha / s, mu, 1e-9);
        EXPECT_NEAR(p.alpha * p.beta / (s * s * (s + 1)), var, 1e-9);
      }
    }
  }
}

TEST(Dequantize, Crossover) {
  EXPECT_DOUBLE_EQ(dequantize_crossover(1, 4), 0.75);
  EXPECT_DOUBLE_EQ(dequantize_crossover(3, 4), 1.0 - 1e-9);
  EXPECT_NEAR(dequantize_crossover(0, 1000000), 0.5, 1e-6);
  EXPECT_GT(dequantize_crossover(0, 1000000), 0.5);
}

TEST(Encode, NoRoundsIgnoresTopology) {
  Rng rng(1);
  PolicyConfig cfg = small_config();
  cfg.rounds = 0;
  Policy policy(cfg, 3);
  auto g = testing::random_multigraph(rng, 2, {5, 8, 8, 0.5, 0.1, true});
  AttributedMultigraph bare = g;
  bare.edge_source.clear();
  bare.edge_target.clear();
  bare.edge_tensor.clear();
  bare.edge_features.resize(0, kEdgeFeatureCount);
  auto a = policy.forward(g);
  auto b = policy.forward(bare);
  EXPECT_TRUE(a.tape.value(a.node_state) == b.tape.value(b.node_state));
}

TEST(Encode, RoundsSeeStructure) {
  // Two nodes with identical features: only an edge can tell them apart.
  AttributedMultigraph g;
  g.node_count = 2;
  g.node_features = Matrix::Constant(2, node_feature_count(2), 0.5);
  g.edge_features = Matrix::Constant(1, kEdgeFeatureCount, 0.5);
  g.edge_source = {0};
  g.edge_target = {1};
  g.edge_tensor = {0};
  for (auto update : {NodeUpdate::kGru, NodeUpdate::kMlp}) {
    PolicyConfig with = small_config(update);
    with.rounds = 1;
    PolicyConfig without = with;
    without.rounds = 0;
    Policy p1(with, 5), p0(without, 5);
    auto f1 = p1.forward(g);
    auto f0 = p0.forward(g);
    const Matrix& h1 = f1.tape.value(f1.node_state);
    const Matrix& h0 = f0.tape.value(f0.node_state);
    EXPECT_GT((h1 - h0).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_GT((h1.row(0) - h1.row(1)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Encode, IsolatedNodeIsUnaffectedByTheRest) {
  Rng rng(2);
  Policy policy(small_config(NodeUpdate::kMlp, Aggregation::kSum), 9);
  auto g = testing::random_multigraph(rng, 2, {4, 6, 6, 0.6, 0.1, true});
  AttributedMultigraph alone;
  alone.node_count = 1;
  alone.node_features = g.node_features.topRows(1);
  alone.edge_features.resize(0, kEdgeFeatureCount);
  AttributedMultigraph with = g;
  with.node_count += 1;
  with.node_features.conservativeResize(with.node_count, Eigen::NoChange);
  with.node_features.row(with.node_count - 1) = alone.node_features.row(0);
  auto fa = policy.forward(alone);
  auto fw = policy.forward(with);
  const Matrix& ha = fa.tape.value(fa.node_state);
  const Matrix& hw = fw.tape.value(fw.node_state);
  EXPECT_LT((ha.row(0) - hw.row(with.node_count - 1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Act, UniformHeadGivesSixteenPlacements) {
  PolicyConfig cfg = small_config();
  Policy policy(cfg, 4);
  auto& params = policy.params();
  for (std::size_t i = 0; i < params.names.size(); ++i) {
    if (params.names[i].rfind("policy/head/2/", 0) == 0) params.values[i].setZero();
  }
  AttributedMultigraph g;
  g.node_count = 1;
  g.node_features = Matrix::Constant(1, node_feature_count(2), 0.3);
  g.edge_features.resize(0, kEdgeFeatureCount);
  auto f = policy.forward(g);
  const Matrix& lp = f.tape.value(f.log_probs);
  double placement = 0.0;
  for (int b = 0; b < 4; ++b) placement += lp(0, cfg.block_offset(b));
  EXPECT_NEAR(std::exp(placement), 1.0 / 16.0, 1e-12);
}

TEST(Act, LogProbFactorizes) {
  Rng rng(6);
  PolicyConfig cfg = small_config();
  cfg.k_sched = 3;
  cfg.crossover_head = true;
  Policy policy(cfg, 12);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testing::random_multigraph(rng, 2, {1, 5, 5, 0.5, 0.1, true});
    auto f = policy.forward(g);
    const auto a = policy.act(f, &rng);
    const double lp = f.tape.value(policy.log_prob(f, a))(0, 0);
    EXPECT_LE(lp, 0.0);
    // Independent product of softmax probabilities from the raw logits.
    double product = 1.0;
    const Matrix& logp = f.tape.value(f.log_probs);
    for (int v = 0; v < a.nodes; ++v) {
      for (int b = 0; b < a.blocks; ++b) {
        const auto seg = logp.row(v).segment(cfg.block_offset(b), cfg.block_width(b)).array().exp();
        EXPECT_NEAR(seg.sum(), 1.0, 1e-12);
        product *= seg(a.at(v, b)) / seg.sum();
      }
    }
    product *= std::exp(f.tape.value(f.cross_log_probs)(0, a.crossover));
    EXPECT_NEAR(std::exp(lp), product, 1e-12 * std::max(1.0, product));
  }
}

TEST(Act, ArgmaxIsDeterministic) {
  Rng rng(7);
  Policy policy(small_config(), 1);
  auto g = testing::random_multigraph(rng, 2, {4, 8, 8, 0.4, 0.1, true});
  auto f1 = policy.forward(g);
  auto f2 = policy.forward(g);
  EXPECT_EQ(policy.act(f1, nullptr), policy.act(f2, nullptr));
}

TEST(Act, DisabledGroupsAreUniformAndUnscored) {
  Rng rng(8);
  PolicyConfig cfg = small_config();
  cfg.place_actions = false;
  Policy policy(cfg, 2);
  auto raw = testing::random_tiny_graph(rng, {3, 6, 6, 0.5, 0.1, true});
  IndexedGraph g(raw);
  auto mg = to_multigraph(g, Task::kRuntime, 2);
  auto f = policy.forward(mg);
  auto a = policy.act(f, &rng);
  for (int v = 0; v < a.nodes; ++v) EXPECT_EQ(a.at(v, 0), -1);
  const ChromosomeLayout layout(g, 2);
  auto prop = to_proposals(a, cfg, layout, pinned_node(g, Task::kRuntime));
  for (int v = 0; v < layout.ops; ++v) {
    EXPECT_EQ(prop.alpha[layout.affinity(v, 1)], 1.0);
    EXPECT_NE(prop.alpha[layout.priority(v)], 1.0);
  }
}

TEST(Proposals, LayoutAndTransfers) {
  auto g = IndexedGraph(testing::chain({1, 2, 3}));
  PolicyConfig cfg;
  Policy policy(cfg, 3);
  auto f = policy.forward(to_multigraph(g, Task::kRuntime, 2));
  Rng rng(1);
  auto a = policy.act(f, &rng);
  const ChromosomeLayout layout(g, 2);
  auto prop = to_proposals(a, cfg, layout, 2);
  EXPECT_EQ(prop.size(), 3u * 2 + 3 + 2u * 2);
  EXPECT_TRUE(prop.well_formed());
  for (int t = 0; t < 2; ++t) {
    for (int dev = 0; dev < 2; ++dev) {
      EXPECT_EQ(prop.alpha[layout.transfer(t, dev)], 1.0);
      EXPECT_EQ(prop.beta[layout.transfer(t, dev)], 1.0);
    }
  }
  const auto bp = dequantize(a.at(0, 0), a.at(0, 1), cfg.k_place);
  EXPECT_EQ(prop.alpha[layout.affinity(0, 0)], bp.alpha);
  EXPECT_EQ(prop.alpha[layout.affinity(2, 0)], 1.0);  // pinned
}

TEST(Baseline, PermutationInvariantAndMeanPooled) {
  Rng rng(10);
  PolicyConfig cfg = small_config();
  Policy policy(cfg, 8);
  auto g = testing::random_multigraph(rng, 2, {5, 9, 9, 0.4, 0.1, true});
  auto f = policy.forward(g);
  for (int trial = 0; trial < 10; ++trial) {
    auto pg = testing::permute(g, testing::random_permutation(g.node_count, rng), rng);
    auto pf = policy.forward(pg);
    EXPECT_NEAR(policy.baseline_value(pf), policy.baseline_value(f), 1e-12);
  }

  cfg.rounds = 0;
  Policy flat(cfg, 8);
  AttributedMultigraph doubled = g;
  doubled.node_count *= 2;
  doubled.node_features.resize(doubled.node_count, g.node_features.cols());
  doubled.node_features << g.node_features, g.node_features;
  auto a = flat.forward(g);
  auto b = flat.forward(doubled);
  EXPECT_NEAR(flat.baseline_value(a), flat.baseline_value(b), 1e-12);
}

TEST(Checkpoint, RoundTripIsLossless) {
  PolicyConfig cfg = small_config(NodeUpdate::kMlp, Aggregation::kSum);
  cfg.crossover_head = true;
  cfg.residual = true;
  Policy policy(cfg, 21);
  const std::string bytes = serialize_checkpoint({cfg, policy.params(), {{"step", 7}}});
  Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(to_json(back.config), to_json(cfg));
  EXPECT_EQ(back.params.names, policy.params().names);
  EXPECT_TRUE(back.params.flatten() == policy.params().flatten());
  EXPECT_EQ(back.metadata.at("step"), 7);

  Checkpoint f32 = parse_checkpoint(serialize_checkpoint({cfg, policy.params(), {}}, Dtype::kFloat32));
  EXPECT_LT((f32.params.flatten() - policy.params().flatten()).cwiseAbs().maxCoeff(), 1e-6);

  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(parse_checkpoint("XXXXXXXX" + bytes.substr(8)), FormatError);
  EXPECT_THROW(parse_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, ByteLayoutPrefix) {
  PolicyConfig cfg = small_config();
  Policy policy(cfg, 1);
  const std::string bytes = serialize_checkpoint({cfg, policy.params(), {}});
  EXPECT_EQ(bytes.substr(0, 8), "PSCHCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(bytes[16 + 4], '{');
}

TEST(PolicyConfig, JsonErrors) {
  EXPECT_THROW(policy_config_from_json({{"hidden", "wide"}}), FormatError);
  EXPECT_THROW(policy_config_from_json({{"aggregation", "max"}}), FormatError);
  EXPECT_THROW(policy_config_from_json({{"hidden", 0}}), InvariantError);
  EXPECT_EQ(policy_config_from_json({{"devices", 3}}).node_features, 12);
}

}  // namespace
}  // namespace placesched
