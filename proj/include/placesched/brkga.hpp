// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "placesched/common.hpp"
#include "placesched/sim.hpp"

namespace placesched {

using Chromosome = std::vector<double>;

/// Index arithmetic for the random-key encoding:
/// [op-device affinities (o*d)] ++ [op priorities (o)] ++ [tensor-device
/// transfer priorities (t*d)].
struct ChromosomeLayout {
  int ops = 0;
  int tensors = 0;
  int devices = 1;

  ChromosomeLayout() = default;
  ChromosomeLayout(int o, int t, int d) : ops(o), tensors(t), devices(d) {}
  ChromosomeLayout(const IndexedGraph& g, int d) : ChromosomeLayout(g.op_count(), g.tensor_count(), d) {}

  std::size_t size() const {
    return static_cast<std::size_t>(ops) * devices + ops + static_cast<std::size_t>(tensors) * devices;
  }
  std::size_t affinity(int op, int dev) const { return static_cast<std::size_t>(op) * devices + dev; }
  std::size_t priority(int op) const { return static_cast<std::size_t>(ops) * devices + op; }
  std::size_t transfer(int tensor, int dev) const {
    return static_cast<std::size_t>(ops) * (devices + 1) + static_cast<std::size_t>(tensor) * devices + dev;
  }
};

/// Per-gene Beta(alpha, beta) mutant distributions. (1, 1) is uniform.
struct ProposalSet {
  std::vector<double> alpha;
  std::vector<double> beta;

  static ProposalSet uniform(std::size_t n) { return {std::vector<double>(n, 1.0), std::vector<double>(n, 1.0)}; }
  static ProposalSet constant(std::size_t n, double a, double b) {
    return {std::vector<double>(n, a), std::vector<double>(n, b)};
  }
  std::size_t size() const { return alpha.size(); }
  bool well_formed() const {
    if (alpha.size() != beta.size()) return false;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      if (!(std::isfinite(alpha[i]) && alpha[i] > 0 && std::isfinite(beta[i]) && beta[i] > 0)) return false;
    }
    return true;
  }
};

namespace detail {

// log of a Gamma(shape, 1) variate; shapes below 1 use the boost
// G(a) = G(a + 1) * U^(1/a) so tiny shapes do not underflow to zero.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape)(rng));
  const double x = std::gamma_distribution<double>(shape + 1.0)(rng);
  const double u = 1.0 - uniform01(rng);
  return std::log(x) + std::log(u) / shape;
}

}  // namespace detail

inline double sample_beta(double alpha, double beta, Rng& rng) {
  if (alpha == 1.0 && beta == 1.0) return uniform01(rng);
  const double lx = detail::log_gamma_variate(alpha, rng);
  const double ly = detail::log_gamma_variate(beta, rng);
  const double v = 1.0 / (1.0 + std::exp(ly - lx));
  return std::isnan(v) ? 0.5 : v;
}

inline Chromosome sample_mutant(const ProposalSet& proposals, Rng& rng) {
  Chromosome c(proposals.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = sample_beta(proposals.alpha[i], proposals.beta[i], rng);
  return c;
}

/// Parameterized uniform crossover: each gene comes from the elite parent
/// with probability `elite_bias`.
inline Chromosome crossover(std::span<const double> elite, std::span<const double> nonelite,
                            double elite_bias, Rng& rng) {
  Chromosome child(elite.size());
  for (std::size_t i = 0; i < child.size(); ++i) {
    child[i] = uniform01(rng) < elite_bias ? elite[i] : nonelite[i];
  }
  return child;
}

struct BrkgaParams {
  int population = 100;
  int elites = 15;
  int children = 70;
  double elite_bias = 0.7;
  int populations = 1;
  int budget = 5000;  // fitness evaluations

  int mutants() const { return population - elites - children; }

  void check() const {
    if (population < 2 || elites < 1 || children < 0 || elites >= population ||
        elites + children > population || populations < 1 || budget < 0 ||
        !(elite_bias >= 0.5 && elite_bias <= 1.0)) {
      throw InvariantError("inconsistent BRKGA parameters");
    }
  }
};

/// Evaluates a batch of chromosomes; out[i] receives the fitness of batch[i].
using BatchFitness = std::function<void(std::span<const Chromosome> batch, std::span<Fitness> out)>;

struct Population {
  std::vector<Chromosome> members;  // best first
  std::vector<Fitness> fitness;
};

struct EvolutionState {
  std::vector<Population> populations;
  int generation = 0;
  int evaluations = 0;
  bool exhausted = false;
  Chromosome best;
  Fitness best_fitness = Fitness::worst();
  std::vector<Fitness> history;  // best-so-far after each generation
  std::vector<Fitness> best_at;  // best-so-far at each requested checkpoint
};

/// Biased random-key GA with per-gene beta mutant distributions.
///
/// Randomness for slot j of generation g in population p comes from the
/// substream (seed, p, g, j) alone, so the chromosomes examined are a prefix
/// of an unbounded run regardless of budget or thread count. When the budget
/// cannot cover a whole generation, the affordable prefix is still evaluated
/// (and may improve the best-so-far), but the generation is not installed.
class Brkga {
 public:
  Brkga(BrkgaParams params, ProposalSet proposals, BatchFitness fitness, std::uint64_t seed,
        std::vector<int> checkpoints = {})
      : params_(params),
        proposals_(std::move(proposals)),
        fitness_(std::move(fitness)),
        seed_(seed),
        checkpoints_(std::move(checkpoints)) {
    params_.check();
    if (!proposals_.well_formed()) throw InvariantError("malformed proposal set");
    std::sort(checkpoints_.begin(), checkpoints_.end());
  }

  EvolutionState initialize() const {
    EvolutionState state;
    state.populations.resize(params_.populations);
    for (int p = 0; p < params_.populations && !state.exhausted; ++p) {
      std::vector<Chromosome> fresh;
      fresh.reserve(params_.population);
      for (int j = 0; j < params_.population; ++j) {
        Rng rng = substream(seed_, p, 0, j);
        fresh.push_back(sample_mutant(proposals_, rng));
      }
      auto fit = evaluate(state, fresh);
      install(state.populations[p], std::move(fresh), std::move(fit));
    }
    state.history.push_back(state.best_fitness);
    return state;
  }

  /// Advances every population by one generation. Returns false once the
  /// budget is exhausted.
  bool evolve_generation(EvolutionState& state) const {
    if (state.exhausted) return false;
    const int g = state.generation + 1;
    const int pi = params_.population;
    const int pe = params_.elites;
    int completed = 0;
    for (int p = 0; p < params_.populations; ++p) {
      Population& pop = state.populations[p];
      std::vector<Chromosome> fresh;
      fresh.reserve(pi - pe);
      for (int j = 0; j < pi - pe; ++j) {
        Rng rng = substream(seed_, p, g, j);
        if (j < params_.children) {
          const auto& elite = pop.members[uniform_index(rng, pe)];
          const auto& other = pop.members[pe + uniform_index(rng, pi - pe)];
          fresh.push_back(crossover(elite, other, params_.elite_bias, rng));
        } else {
          fresh.push_back(sample_mutant(proposals_, rng));
        }
      }
      const std::size_t wanted = fresh.size();
      auto fit = evaluate(state, fresh);
      if (fit.size() < wanted) break;
      std::vector<Chromosome> members(pop.members.begin(), pop.members.begin() + pe);
      std::vector<Fitness> scores(pop.fitness.begin(), pop.fitness.begin() + pe);
      members.insert(members.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
      scores.insert(scores.end(), fit.begin(), fit.end());
      install(pop, std::move(members), std::move(scores));
      completed = p + 1;
      if (state.exhausted) break;
    }
    if (completed == params_.populations) state.generation = g;
    state.history.push_back(state.best_fitness);
    return !state.exhausted;
  }

  EvolutionState run() const {
    EvolutionState state = initialize();
    while (evolve_generation(state)) {
    }
    return state;
  }

  const BrkgaParams& params() const { return params_; }

 private:
  // Evaluates the affordable prefix of `batch`; marks the state exhausted if
  // the whole batch did not fit (or the budget is now spent).
  std::vector<Fitness> evaluate(EvolutionState& state, std::vector<Chromosome>& batch) const {
    const int remaining = params_.budget - state.evaluations;
    const int count = std::clamp(static_cast<int>(batch.size()), 0, std::max(0, remaining));
    std::vector<Fitness> out(count);
    if (count > 0) fitness_(std::span<const Chromosome>(batch.data(), count), out);
    for (int i = 0; i < count; ++i) {
      ++state.evaluations;
      if (out[i] < state.best_fitness || state.best.empty()) {
        state.best_fitness = out[i];
        state.best = batch[i];
      }
      while (state.best_at.size() < checkpoints_.size() &&
             checkpoints_[state.best_at.size()] == state.evaluations) {
        state.best_at.push_back(state.best_fitness);
      }
    }
    if (count < static_cast<int>(batch.size()) || state.evaluations >= params_.budget) {
      state.exhausted = true;
    }
    if (count < static_cast<int>(batch.size())) {
      batch.resize(count);
      out.resize(count);
    }
    return out;
  }

  static void install(Population& pop, std::vector<Chromosome> members, std::vector<Fitness> scores) {
    std::vector<int> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });
    pop.members.clear();
    pop.fitness.clear();
    for (int i : order) {
      pop.members.push_back(std::move(members[i]));
      pop.fitness.push_back(scores[i]);
    }
  }

  BrkgaParams params_;
  ProposalSet proposals_;
  BatchFitness fitness_;
  std::uint64_t seed_;
  std::vector<int> checkpoints_;
};

}  // namespace placesched
