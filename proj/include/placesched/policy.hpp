// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "placesched/brkga.hpp"
#include "placesched/features.hpp"
#include "placesched/tape.hpp"

namespace placesched {

enum class Aggregation { kSum, kMean };
enum class NodeUpdate { kMlp, kGru };

struct PolicyConfig {
  int node_features = node_feature_count(2);
  int edge_features = kEdgeFeatureCount;
  int hidden = 32;
  int rounds = 2;
  int devices = 2;
  int k_place = 2;
  int k_sched = 16;
  Aggregation aggregation = Aggregation::kMean;
  NodeUpdate node_update = NodeUpdate::kGru;
  bool residual = false;
  bool crossover_head = false;
  int k_cross = 4;
  bool place_actions = true;
  bool sched_actions = true;

  /// Categorical blocks per node: (m, v) for each device, then (m, v) for
  /// the schedule priority.
  int blocks() const { return 2 * (devices + 1); }
  int block_width(int b) const { return b < 2 * devices ? k_place : k_sched; }
  int block_offset(int b) const { return b < 2 * devices ? b * k_place : 2 * devices * k_place + (b - 2 * devices) * k_sched; }
  int head_width() const { return 2 * devices * k_place + 2 * k_sched; }
  bool block_enabled(int b) const { return b < 2 * devices ? place_actions : sched_actions; }

  void check() const {
    if (hidden <= 0 || rounds < 0 || devices < 1 || k_place < 1 || k_sched < 1 || k_cross < 1 ||
        node_features != node_feature_count(devices) || edge_features != kEdgeFeatureCount) {
      throw InvariantError("inconsistent policy configuration");
    }
  }
};

inline nlohmann::json to_json(const PolicyConfig& c) {
  return {{"node_features", c.node_features},
          {"edge_features", c.edge_features},
          {"hidden", c.hidden},
          {"rounds", c.rounds},
          {"devices", c.devices},
          {"k_place", c.k_place},
          {"k_sched", c.k_sched},
          {"aggregation", c.aggregation == Aggregation::kSum ? "sum" : "mean"},
          {"node_update", c.node_update == NodeUpdate::kMlp ? "mlp" : "gru"},
          {"residual", c.residual},
          {"crossover_head", c.crossover_head},
          {"k_cross", c.k_cross},
          {"place_actions", c.place_actions},
          {"sched_actions", c.sched_actions}};
}

/// Missing keys keep their defaults; present keys must be well typed.
inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("devices", c.devices);
    c.node_features = node_feature_count(c.devices);
    get("node_features", c.node_features);
    get("edge_features", c.edge_features);
    get("hidden", c.hidden);
    get("rounds", c.rounds);
    get("k_place", c.k_place);
    get("k_sched", c.k_sched);
    get("residual", c.residual);
    get("crossover_head", c.crossover_head);
    get("k_cross", c.k_cross);
    get("place_actions", c.place_actions);
    get("sched_actions", c.sched_actions);
    if (j.contains("aggregation")) {
      const auto a = j.at("aggregation").get<std::string>();
      if (a != "sum" && a != "mean") throw FormatError("aggregation must be \"sum\" or \"mean\"");
      c.aggregation = a == "sum" ? Aggregation::kSum : Aggregation::kMean;
    }
    if (j.contains("node_update")) {
      const auto u = j.at("node_update").get<std::string>();
      if (u != "mlp" && u != "gru") throw FormatError("node_update must be \"mlp\" or \"gru\"");
      c.node_update = u == "mlp" ? NodeUpdate::kMlp : NodeUpdate::kGru;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("policy configuration: ") + e.what());
  }
  c.check();
  return c;
}

/// Named parameter arrays, addressable as one flat vector.
struct Parameters {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  int add(std::string name, Matrix value) {
    names.push_back(std::move(name));
    values.push_back(std::move(value));
    return static_cast<int>(values.size()) - 1;
  }
  Eigen::Index count() const {
    Eigen::Index n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd flat(count());
    Eigen::Index at = 0;
    for (const auto& v : values) {
      flat.segment(at, v.size()) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      at += v.size();
    }
    return flat;
  }
  void assign(const Eigen::VectorXd& flat) {
    if (flat.size() != count()) throw InvariantError("flat parameter vector has the wrong length");
    Eigen::Index at = 0;
    for (auto& v : values) {
      Eigen::Map<Eigen::VectorXd>(v.data(), v.size()) = flat.segment(at, v.size());
      at += v.size();
    }
  }
  /// Offset of array i in the flat vector.
  Eigen::Index offset(int i) const {
    Eigen::Index at = 0;
    for (int k = 0; k < i; ++k) at += values[k].size();
    return at;
  }
};

/// Per-node quantized choices, row-major [node][block], plus an optional
/// per-graph crossover choice. Disabled blocks hold -1.
struct ActionAssignment {
  int nodes = 0;
  int blocks = 0;
  std::vector<int> choice;
  int crossover = -1;

  int at(int v, int b) const { return choice[static_cast<std::size_t>(v) * blocks + b]; }
  int& at(int v, int b) { return choice[static_cast<std::size_t>(v) * blocks + b]; }
  friend bool operator==(const ActionAssignment&, const ActionAssignment&) = default;
};

struct BetaParams {
  double alpha;
  double beta;
};

/// Quantized (mean, variance) level pair to Beta parameters.
inline BetaParams dequantize(int m, int v, int k) {
  if (k < 1 || m < 0 || m >= k || v < 0 || v >= k) throw InvariantError("quantized level out of range");
  const double mu = (m + 1.0) / (k + 1.0);
  const double var = mu * (1.0 - mu) * (v + 1.0) / (k + 1.0);
  const double beta = mu * (1.0 - mu) * (1.0 - mu) / var - 1.0 + mu;
  return {beta * mu / (1.0 - mu), beta};
}

inline double dequantize_crossover(int c, int k) {
  if (k < 1 || c < 0 || c >= k) throw InvariantError("quantized crossover level out of range");
  return std::min(0.5 * (1.0 + (c + 1.0) / k), 1.0 - 1e-9);
}

/// Mutant distributions for BRKGA from a policy action. Transfer genes and
/// disabled action groups stay uniform; the pinned op's affinities are
/// irrelevant because the decoder forces it onto the first device.
inline ProposalSet to_proposals(const ActionAssignment& a, const PolicyConfig& cfg, const ChromosomeLayout& layout,
                                int pinned_op) {
  if (a.nodes != layout.ops || a.blocks != cfg.blocks() || layout.devices != cfg.devices) {
    throw InvariantError("action assignment does not cover the graph");
  }
  ProposalSet p = ProposalSet::uniform(layout.size());
  auto set = [&](std::size_t gene, int v, int slot, int k) {
    const int b = 2 * slot;
    if (!cfg.block_enabled(b)) return;
    const BetaParams bp = dequantize(a.at(v, b), a.at(v, b + 1), k);
    p.alpha[gene] = bp.alpha;
    p.beta[gene] = bp.beta;
  };
  for (int v = 0; v < layout.ops; ++v) {
    if (v != pinned_op) {
      for (int dev = 0; dev < layout.devices; ++dev) set(layout.affinity(v, dev), v, dev, cfg.k_place);
    }
    set(layout.priority(v), v, layout.devices, cfg.k_sched);
  }
  return p;
}

/// Graph network policy with a separate graph network baseline.
///
/// Each encoder computes h0 = MLP_n(x_v), h_e = MLP_e(x_e) and, for T rounds,
/// forward and reverse edge messages from [h_src, h_dst, h_e]; node v
/// aggregates its incoming forward and outgoing reverse messages (sum, or
/// mean over its degree) and updates with an MLP or a GRU cell, optionally
/// residually. Edge states are not updated.
class Policy {
 public:
  using Var = Tape::Var;

  Policy(PolicyConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.check();
    Rng rng = substream(seed, 0x706f6c);
    policy_enc_ = make_encoder("policy", rng);
    heads_ = make_mlp("policy/head", cfg_.hidden, cfg_.head_width(), rng);
    if (cfg_.crossover_head) cross_ = make_mlp("policy/crossover", cfg_.hidden, cfg_.k_cross, rng);
    baseline_enc_ = make_encoder("baseline", rng);
    mlp_g_ = make_mlp("baseline/g", cfg_.hidden, cfg_.hidden, rng);
    mlp_b_ = make_mlp("baseline/b", cfg_.hidden, 1, rng);
  }

  /// Rebuilds a policy around existing parameter arrays (checkpoint load).
  Policy(PolicyConfig cfg, const Parameters& params) : Policy(cfg, 0) {
    if (params.names != params_.names) throw FormatError("checkpoint arrays do not match the architecture");
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      if (params.values[i].rows() != params_.values[i].rows() || params.values[i].cols() != params_.values[i].cols()) {
        throw FormatError("checkpoint array " + params.names[i] + " has the wrong shape");
      }
    }
    params_ = params;
  }

  const PolicyConfig& config() const { return cfg_; }
  const Parameters& params() const { return params_; }
  Parameters& params() { return params_; }

  template <typename S>
  struct BasicForward {
    BasicTape<S> tape;
    Var node_state = -1;  // policy encoder output, n x H
    Var log_probs = -1;   // n x head_width, log-softmax per block
    Var cross_log_probs = -1;
    Var baseline = -1;  // 1 x 1
    Var baseline_state = -1;
    int nodes = 0;
  };
  using Forward = BasicForward<double>;

  /// Runs both encoders and the heads. S = double for training; other
  /// scalar types evaluate the same network at a different precision.
  template <typename S = double>
  BasicForward<S> forward(const AttributedMultigraph& g) const {
    if (g.node_features.cols() != cfg_.node_features || g.edge_features.cols() != cfg_.edge_features) {
      throw InvariantError("multigraph feature widths do not match the policy");
    }
    BasicForward<S> f;
    f.nodes = g.node_count;
    BasicTape<S>& t = f.tape;
    std::vector<Var> p(params_.values.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = t.leaf(params_.values[i].template cast<S>(), static_cast<int>(i));
    }
    const Var x = t.leaf(MatrixOf<S>(g.node_features.cast<S>()));
    const Var xe = t.leaf(MatrixOf<S>(g.edge_features.cast<S>()));

    f.node_state = encode(t, p, policy_enc_, g, x, xe);
    std::vector<int> blocks;
    for (int b = 0; b < cfg_.blocks(); ++b) blocks.push_back(cfg_.block_width(b));
    f.log_probs = t.log_softmax_blocks(mlp(t, p, heads_, f.node_state), blocks);
    if (cfg_.crossover_head) {
      f.cross_log_probs = t.log_softmax_blocks(mlp(t, p, cross_, t.mean_rows(f.node_state)), {cfg_.k_cross});
    }
    f.baseline_state = encode(t, p, baseline_enc_, g, x, xe);
    f.baseline = mlp(t, p, mlp_b_, t.mean_rows(mlp(t, p, mlp_g_, f.baseline_state)));
    return f;
  }

  /// Samples every enabled categorical, or takes its mode when `rng` is null
  /// (lowest level on ties).
  ActionAssignment act(const Forward& f, Rng* rng) const {
    ActionAssignment a;
    a.nodes = f.nodes;
    a.blocks = cfg_.blocks();
    a.choice.assign(static_cast<std::size_t>(a.nodes) * a.blocks, -1);
    const Matrix& lp = f.tape.value(f.log_probs);
    for (int v = 0; v < a.nodes; ++v) {
      for (int b = 0; b < a.blocks; ++b) {
        if (!cfg_.block_enabled(b)) continue;
        a.at(v, b) = choose(lp.row(v).segment(cfg_.block_offset(b), cfg_.block_width(b)), rng);
      }
    }
    if (cfg_.crossover_head) a.crossover = choose(f.tape.value(f.cross_log_probs).row(0), rng);
    return a;
  }

  /// Adds log p(a | G) to the tape as a 1 x 1 node.
  template <typename S>
  Var log_prob(BasicForward<S>& f, const ActionAssignment& a) const {
    std::vector<std::pair<int, int>> cells;
    for (int v = 0; v < a.nodes; ++v) {
      for (int b = 0; b < a.blocks; ++b) {
        if (cfg_.block_enabled(b)) cells.emplace_back(v, cfg_.block_offset(b) + a.at(v, b));
      }
    }
    Var lp = f.tape.pick_sum(f.log_probs, std::move(cells));
    if (cfg_.crossover_head) lp = f.tape.add(lp, f.tape.pick_sum(f.cross_log_probs, {{0, a.crossover}}));
    return lp;
  }

  template <typename S>
  S baseline_value(const BasicForward<S>& f) const {
    return f.tape.value(f.baseline)(0, 0);
  }

  /// Flat parameter gradient after back-propagating the given seeds.
  Eigen::VectorXd gradient(Forward& f, const std::vector<std::pair<Var, Matrix>>& seeds) const {
    f.tape.backward(seeds);
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(params_.count());
    Eigen::Index at = 0;
    std::vector<Eigen::Index> offsets(params_.values.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      offsets[i] = at;
      at += params_.values[i].size();
    }
    for (Var v = 0; v < f.tape.size(); ++v) {
      const int pi = f.tape.param_of(v);
      if (pi < 0 || f.tape.grad(v).size() == 0) continue;
      const Matrix& g = f.tape.grad(v);
      flat.segment(offsets[pi], g.size()) += Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    }
    return flat;
  }

 private:
  struct Mlp {
    std::vector<int> weights;
    std::vector<int> biases;
  };
  struct Gru {
    int wz, uz, bz, wr, ur, br, wn, un, bn, bhn;
  };
  struct Encoder {
    Mlp node_in, edge_in, msg, msg_rev, update;
    Gru gru{};
  };

  Matrix init_uniform(int rows, int cols, int fan_in, Rng& rng) const {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * s;
    return m;
  }

  Mlp make_mlp(const std::string& name, int in, int out, Rng& rng) {
    Mlp m;
    const int widths[] = {in, cfg_.hidden, cfg_.hidden, out};
    for (int l = 0; l < 3; ++l) {
      const std::string pre = name + "/" + std::to_string(l);
      m.weights.push_back(params_.add(pre + "/w", init_uniform(widths[l], widths[l + 1], widths[l], rng)));
      m.biases.push_back(params_.add(pre + "/b", init_uniform(1, widths[l + 1], widths[l], rng)));
    }
    return m;
  }

  Encoder make_encoder(const std::string& name, Rng& rng) {
    const int h = cfg_.hidden;
    Encoder e;
    e.node_in = make_mlp(name + "/node_in", cfg_.node_features, h, rng);
    e.edge_in = make_mlp(name + "/edge_in", cfg_.edge_features, h, rng);
    e.msg = make_mlp(name + "/msg", 3 * h, h, rng);
    e.msg_rev = make_mlp(name + "/msg_rev", 3 * h, h, rng);
    if (cfg_.node_update == NodeUpdate::kMlp) {
      e.update = make_mlp(name + "/update", 2 * h, h, rng);
    } else {
      auto add = [&](const char* n, int rows) {
        return params_.add(name + "/gru/" + n, init_uniform(rows, h, h, rng));
      };
      e.gru = {add("wz", h), add("uz", h), add("bz", 1), add("wr", h), add("ur", h),
               add("br", 1), add("wn", h), add("un", h), add("bn", 1), add("bhn", 1)};
    }
    return e;
  }

  template <typename S>
  static Var mlp(BasicTape<S>& t, const std::vector<Var>& p, const Mlp& m, Var x) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      x = t.add_bias(t.matmul(x, p[m.weights[l]]), p[m.biases[l]]);
      if (l + 1 < m.weights.size()) x = t.relu(x);
    }
    return x;
  }

  template <typename S>
  Var encode(BasicTape<S>& t, const std::vector<Var>& p, const Encoder& e, const AttributedMultigraph& g, Var x,
             Var xe) const {
    const int n = g.node_count;
    Var h = mlp(t, p, e.node_in, x);
    if (cfg_.rounds == 0) return h;
    const Var he = mlp(t, p, e.edge_in, xe);
    typename BasicTape<S>::Vector inv_degree = BasicTape<S>::Vector::Ones(n);
    if (cfg_.aggregation == Aggregation::kMean) {
      Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < g.edge_count(); ++i) {
        deg[g.edge_source[i]] += 1.0;
        deg[g.edge_target[i]] += 1.0;
      }
      for (int v = 0; v < n; ++v) inv_degree[v] = deg[v] > 0 ? S(1) / S(deg[v]) : S(1);
    }
    for (int r = 0; r < cfg_.rounds; ++r) {
      const Var in = t.concat_cols({t.gather_rows(h, g.edge_source), t.gather_rows(h, g.edge_target), he});
      const Var fwd = t.scatter_add_rows(mlp(t, p, e.msg, in), g.edge_target, n);
      const Var rev = t.scatter_add_rows(mlp(t, p, e.msg_rev, in), g.edge_source, n);
      Var agg = t.add(fwd, rev);
      if (cfg_.aggregation == Aggregation::kMean) agg = t.scale_rows(agg, inv_degree);
      Var u;
      if (cfg_.node_update == NodeUpdate::kMlp) {
        u = mlp(t, p, e.update, t.concat_cols({h, agg}));
      } else {
        const Gru& c = e.gru;
        auto lin = [&](int w, Var a) { return t.matmul(a, p[w]); };
        const Var z = t.sigmoid(t.add_bias(t.add(lin(c.wz, agg), lin(c.uz, h)), p[c.bz]));
        const Var rr = t.sigmoid(t.add_bias(t.add(lin(c.wr, agg), lin(c.ur, h)), p[c.br]));
        const Var cand = t.tanh(t.add(t.add_bias(lin(c.wn, agg), p[c.bn]), t.mul(rr, t.add_bias(lin(c.un, h), p[c.bhn]))));
        u = t.add(cand, t.mul(z, t.add(h, t.affine(cand, S(-1), S(0)))));
      }
      h = cfg_.residual ? t.add(h, u) : u;
    }
    return h;
  }

  static int choose(const RowVector& log_probs, Rng* rng) {
    const int k = static_cast<int>(log_probs.size());
    if (rng == nullptr) {
      int best = 0;
      for (int i = 1; i < k; ++i)
        if (log_probs[i] > log_probs[best]) best = i;
      return best;
    }
    double u = uniform01(*rng);
    for (int i = 0; i < k; ++i) {
      u -= std::exp(log_probs[i]);
      if (u < 0) return i;
    }
    return k - 1;
  }

  PolicyConfig cfg_;
  Parameters params_;
  Encoder policy_enc_;
  Mlp heads_;
  Mlp cross_;
  Encoder baseline_enc_;
  Mlp mlp_g_;
  Mlp mlp_b_;
};

}  // namespace placesched
