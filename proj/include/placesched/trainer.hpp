// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "placesched/parallel.hpp"
#include "placesched/policy.hpp"

namespace placesched {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-4;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (m_.size() != params.size()) {
      m_ = Eigen::VectorXd::Zero(params.size());
      v_ = Eigen::VectorXd::Zero(params.size());
      t_ = 0;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long long t_ = 0;
};

/// Scales `g` down to L2 norm `max_norm` if it is longer. Returns the norm
/// before clipping.
inline double clip_global_norm(Eigen::VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (max_norm > 0 && norm > max_norm) g *= max_norm / norm;
  return norm;
}

struct TrainConfig {
  int minibatch = 4;
  double clip_norm = 10.0;
  AdamConfig adam;
  double baseline_weight = 1e-4;
  int steps = 2000;
  int train_budget = 1000;
  int eval_budget = 5000;  // uniform BRKGA; the policy gets eval_budget - feature_budget
  int feature_budget = kFeatureBudget;
  int validate_every = 100;
  int threads = 1;
  BrkgaParams brkga;

  void check() const {
    if (minibatch < 1 || steps < 0 || !(clip_norm >= 0) || !(baseline_weight >= 0) ||
        !(adam.learning_rate >= 0) || train_budget < feature_budget + brkga.population ||
        eval_budget < feature_budget + brkga.population) {
      throw InvariantError("inconsistent training configuration");
    }
  }
};

/// A graph prepared for repeated reward computations at one budget: its
/// multigraph with BRKGA features and the uniform BRKGA reference objective.
struct GraphInstance {
  std::string id;
  std::shared_ptr<const IndexedGraph> graph;
  SimConfig config;
  Task task = Task::kRuntime;
  std::uint64_t seed = 0;
  int budget = 0;
  int feature_budget = kFeatureBudget;
  AttributedMultigraph features;
  Fitness uniform;  // o_s: uniform BRKGA with the full budget
  long long uniform_calls = 0;
  long long feature_calls = 0;
};

inline GraphInstance prepare_instance(std::string id, std::shared_ptr<const IndexedGraph> graph,
                                      const SimConfig& config, Task task, std::uint64_t seed, int budget,
                                      int feature_budget = kFeatureBudget, const BrkgaParams& brkga = {}) {
  GraphInstance inst;
  inst.id = std::move(id);
  inst.graph = std::move(graph);
  inst.config = config;
  inst.task = task;
  inst.seed = seed;
  inst.budget = budget;
  inst.feature_budget = feature_budget;

  GraphProblem feature_problem(*inst.graph, config, task);
  const BrkgaNodeFeatures bf = brkga_features(feature_problem, derive_seed(seed, 1), feature_budget, brkga);
  inst.feature_calls = feature_problem.calls();
  inst.features = to_multigraph(*inst.graph, task, config.devices, bf);

  GraphProblem uniform_problem(*inst.graph, config, task);
  BrkgaParams p = brkga;
  p.budget = budget;
  inst.uniform = run_brkga(uniform_problem, ProposalSet::uniform(uniform_problem.layout().size()), p,
                           derive_seed(seed, 2))
                     .best_fitness;
  inst.uniform_calls = uniform_problem.calls();
  return inst;
}

struct RewardRecord {
  std::string graph_id;
  double log_prob = 0.0;
  Fitness policy;   // o_a
  Fitness uniform;  // o_s
  double reward = -1.0;
  double baseline = 0.0;
  bool degenerate = false;  // excluded from gradients
  long long policy_calls = 0;
  long long uniform_calls = 0;
};

/// r = -o_a / o_s. Degenerate when o_s is zero or either run is infeasible;
/// the reward is then -1 and the record carries no learning signal.
inline double reward_from(const Fitness& policy, const Fitness& uniform, bool* degenerate = nullptr) {
  const bool bad = !policy.feasible || !uniform.feasible || uniform.value == 0.0;
  if (degenerate) *degenerate = bad;
  return bad ? -1.0 : -policy.value / uniform.value;
}

/// BRKGA run with the policy's proposals on the remaining budget. The
/// feature evaluations were spent when the instance was prepared.
inline RewardRecord compute_reward(const GraphInstance& inst, const ActionAssignment& action, const PolicyConfig& cfg,
                                   const BrkgaParams& brkga = {}) {
  GraphProblem problem(*inst.graph, inst.config, inst.task);
  BrkgaParams p = brkga;
  p.budget = inst.budget - inst.feature_budget;
  if (cfg.crossover_head) p.elite_bias = dequantize_crossover(action.crossover, cfg.k_cross);
  const ProposalSet proposals = to_proposals(action, cfg, problem.layout(), problem.pinned_op());
  RewardRecord rec;
  rec.graph_id = inst.id;
  rec.policy = run_brkga(problem, proposals, p, derive_seed(inst.seed, 3)).best_fitness;
  rec.uniform = inst.uniform;
  rec.policy_calls = inst.feature_calls + problem.calls();
  rec.uniform_calls = inst.uniform_calls;
  if (rec.policy_calls != rec.uniform_calls) {
    throw InvariantError("budget parity violated for " + inst.id + ": policy path made " +
                         std::to_string(rec.policy_calls) + " fitness calls, uniform path " +
                         std::to_string(rec.uniform_calls));
  }
  rec.reward = reward_from(rec.policy, rec.uniform, &rec.degenerate);
  return rec;
}

/// Seeds for the REINFORCE + baseline loss of one graph in a batch of
/// `batch` graphs: L = -(r - sg(b)) log p / B + w (b - r)^2 / B.
inline std::vector<std::pair<Tape::Var, Matrix>> loss_seeds(Tape::Var log_prob, Tape::Var baseline, double reward,
                                                            double baseline_value, double weight, int batch) {
  Matrix gl(1, 1), gb(1, 1);
  gl(0, 0) = -(reward - baseline_value) / batch;
  gb(0, 0) = 2.0 * weight * (baseline_value - reward) / batch;
  return {{log_prob, gl}, {baseline, gb}};
}

inline double loss_value(double log_prob, double reward, double baseline_value, double weight, int batch) {
  return (-(reward - baseline_value) * log_prob + weight * (baseline_value - reward) * (baseline_value - reward)) /
         batch;
}

struct CurvePoint {
  int step = 0;
  double mean_reward = 0.0;
  double baseline_loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> validation_reward;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  double best_validation = -std::numeric_limits<double>::infinity();
  int best_step = -1;
  Parameters best_params;
};

/// Mean greedy-action reward over the given instances.
inline double mean_greedy_reward(const Policy& policy, const std::vector<GraphInstance>& data, int threads,
                                 const BrkgaParams& brkga = {}, std::vector<RewardRecord>* records = nullptr) {
  std::vector<RewardRecord> rec(data.size());
  parallel_for(static_cast<int>(data.size()), threads, [&](int, int i) {
    auto f = policy.forward(data[i].features);
    rec[i] = compute_reward(data[i], policy.act(f, nullptr), policy.config(), brkga);
  });
  double sum = 0.0;
  for (const auto& r : rec) sum += r.reward;
  if (records) *records = rec;
  return data.empty() ? 0.0 : sum / static_cast<double>(data.size());
}

/// Contextual-bandit REINFORCE: one sampled action per graph per step.
/// Minibatches cycle through seeded shuffles of the training set.
inline TrainResult train(Policy& policy, const std::vector<GraphInstance>& train_set,
                         const std::vector<GraphInstance>& valid_set, const TrainConfig& cfg, std::uint64_t seed,
                         const std::function<void(const CurvePoint&)>& on_step = {}) {
  cfg.check();
  if (train_set.empty()) throw InvariantError("empty training set");
  TrainResult result;
  Adam adam(cfg.adam);
  Eigen::VectorXd theta = policy.params().flatten();
  std::vector<int> order;
  std::size_t cursor = 0;
  int epoch = 0;
  auto next_graph = [&]() {
    if (cursor == order.size()) {
      order.resize(train_set.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng = substream(seed, 0x7368, epoch++);
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<int> batch(cfg.minibatch);
    for (int& b : batch) b = next_graph();
    std::vector<Eigen::VectorXd> grads(batch.size());
    std::vector<RewardRecord> recs(batch.size());
    parallel_for(static_cast<int>(batch.size()), cfg.threads, [&](int, int slot) {
      const GraphInstance& inst = train_set[batch[slot]];
      auto f = policy.forward(inst.features);
      Rng rng = substream(seed, 0x6163, step, slot);
      const ActionAssignment a = policy.act(f, &rng);
      const Tape::Var lp = policy.log_prob(f, a);
      RewardRecord r = compute_reward(inst, a, policy.config(), cfg.brkga);
      r.log_prob = f.tape.value(lp)(0, 0);
      r.baseline = policy.baseline_value(f);
      if (r.degenerate) {
        grads[slot] = Eigen::VectorXd::Zero(policy.params().count());
      } else {
        grads[slot] = policy.gradient(
            f, loss_seeds(lp, f.baseline, r.reward, r.baseline, cfg.baseline_weight, cfg.minibatch));
      }
      recs[slot] = std::move(r);
    });
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    CurvePoint pt;
    pt.step = step + 1;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      g += grads[i];
      pt.mean_reward += recs[i].reward / cfg.minibatch;
      pt.baseline_loss += (recs[i].baseline - recs[i].reward) * (recs[i].baseline - recs[i].reward) / cfg.minibatch;
    }
    if (!g.allFinite()) throw InvariantError("non-finite gradient at step " + std::to_string(step + 1));
    pt.grad_norm = clip_global_norm(g, cfg.clip_norm);
    adam.step(theta, g);
    policy.params().assign(theta);

    const bool validate = cfg.validate_every > 0 && !valid_set.empty() &&
                          ((step + 1) % cfg.validate_every == 0 || step + 1 == cfg.steps);
    if (validate) {
      pt.validation_reward = mean_greedy_reward(policy, valid_set, cfg.threads, cfg.brkga);
      if (*pt.validation_reward > result.best_validation) {
        result.best_validation = *pt.validation_reward;
        result.best_step = step + 1;
        result.best_params = policy.params();
      }
    }
    result.curve.push_back(pt);
    if (on_step) on_step(pt);
  }
  if (result.best_step < 0) {
    result.best_params = policy.params();
    result.best_step = cfg.steps;
  }
  return result;
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,mean_reward,baseline_loss,grad_norm,validation_reward\n";
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,", p.step, p.mean_reward, p.baseline_loss, p.grad_norm);
    out += buf;
    if (p.validation_reward) {
      std::snprintf(buf, sizeof(buf), "%.9g", *p.validation_reward);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace placesched
