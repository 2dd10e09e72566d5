// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite differences of the per-graph training loss with the sampled
// action, the reward and the advantage's baseline value frozen.

#pragma once

#include <algorithm>
#include <cmath>

#include "placesched/trainer.hpp"
#include "test_graphs.hpp"

namespace placesched::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  Eigen::Index worst = -1;
  Eigen::Index coordinates = 0;
  double analytic_norm = 0.0;
};

/// Relative error |a - n| / max(|a|, |n|); coordinates where both are below
/// `floor` in magnitude use `floor` as the denominator.
inline GradCheckResult gradient_check(Policy& policy, const AttributedMultigraph& g, std::uint64_t seed,
                                      double reward, double weight, int batch, double h = 1e-5,
                                      double floor = 1e-8) {
  Rng rng(seed);
  auto f = policy.forward(g);
  const ActionAssignment action = policy.act(f, &rng);
  const Tape::Var lp = policy.log_prob(f, action);
  const double b0 = policy.baseline_value(f);
  const Eigen::VectorXd analytic = policy.gradient(f, loss_seeds(lp, f.baseline, reward, b0, weight, batch));

  // The perturbed losses are evaluated in extended precision so that
  // coordinates with gradients near 1e-8 are not lost in double rounding of
  // an O(10) loss. The step h is applied to the 64-bit parameters.
  using Wide = long double;
  auto loss_at = [&](const Eigen::VectorXd& theta) {
    policy.params().assign(theta);
    auto ff = policy.template forward<Wide>(g);
    const Wide logp = ff.tape.value(policy.log_prob(ff, action))(0, 0);
    const Wide b = policy.baseline_value(ff);
    return (-(Wide(reward) - Wide(b0)) * logp + Wide(weight) * (b - Wide(reward)) * (b - Wide(reward))) / batch;
  };
  const Eigen::VectorXd theta = policy.params().flatten();
  GradCheckResult out;
  out.coordinates = theta.size();
  out.analytic_norm = analytic.norm();
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const auto up = loss_at(probe);
    probe[i] = theta[i] - h;
    const auto down = loss_at(probe);
    probe[i] = theta[i];
    const double numeric = static_cast<double>((up - down) / (Wide(theta[i] + h) - Wide(theta[i] - h)));
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst = i;
    }
  }
  policy.params().assign(theta);
  return out;
}

/// 3-node graph used by the gradient checks.
inline AttributedMultigraph three_node_multigraph() {
  IndexedGraph g(three_op_example());
  BrkgaNodeFeatures bf{{{0.7, 0.3}, {0.25, 0.75}, {0.6, 0.4}}, {0.1, 0.55, 0.9}};
  return to_multigraph(g, Task::kRuntime, 2, bf);
}

}  // namespace placesched::testing
