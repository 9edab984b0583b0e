#pragma once

#include <vector>

#include "evade/rng.hpp"

namespace evade {

/// Small explicit MDP <S, A, P, R>. Used as a value-iteration oracle in
/// tests and by the `oracle` CLI subcommand; never part of the planning path.
struct TabularMdp {
  int state_count = 0;
  int action_count = 0;
  std::vector<double> transition;  // [s][a][s'] row-major
  std::vector<double> reward;      // [s][a]

  double p(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * action_count + a) * state_count + next];
  }
  double& p(int s, int a, int next) {
    return transition[(static_cast<std::size_t>(s) * action_count + a) * state_count + next];
  }
  double r(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * action_count + a];
  }
  double& r(int s, int a) {
    return reward[static_cast<std::size_t>(s) * action_count + a];
  }

  /// Throws ValidationError unless every P(.|s,a) is a distribution
  /// (entries >= 0, row sums within 1e-9 of 1).
  void validate() const;
};

/// Random dense MDP with Dirichlet-free row normalization; rewards in [0, 1].
TabularMdp random_mdp(int states, int actions, Rng& rng);

/// Optimal state values via value iteration. Stops once the max-norm
/// Bellman residual is at most `tolerance`.
std::vector<double> value_iteration(const TabularMdp& mdp, double gamma,
                                    double tolerance);

/// One application of the Bellman optimality operator.
std::vector<double> bellman_backup(const TabularMdp& mdp, double gamma,
                                   const std::vector<double>& values);

}  // namespace evade
