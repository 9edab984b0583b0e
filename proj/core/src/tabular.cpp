#include "evade/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evade/errors.hpp"

namespace evade {

void TabularMdp::validate() const {
  if (state_count < 1 || action_count < 1) {
    throw ValidationError("tabular MDP needs at least one state and action");
  }
  if (std::ssize(transition) !=
          static_cast<std::ptrdiff_t>(state_count) * action_count * state_count ||
      std::ssize(reward) != static_cast<std::ptrdiff_t>(state_count) * action_count) {
    throw ValidationError("tabular MDP array sizes do not match state/action counts");
  }
  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      double sum = 0.0;
      for (int next = 0; next < state_count; ++next) {
        const double prob = p(s, a, next);
        if (prob < 0.0) {
          throw ValidationError("negative transition probability");
        }
        sum += prob;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("transition row does not sum to 1");
      }
    }
  }
}

TabularMdp random_mdp(int states, int actions, Rng& rng) {
  TabularMdp mdp;
  mdp.state_count = states;
  mdp.action_count = actions;
  mdp.transition.resize(static_cast<std::size_t>(states) * actions * states);
  mdp.reward.resize(static_cast<std::size_t>(states) * actions);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      double sum = 0.0;
      for (int next = 0; next < states; ++next) {
        const double w = uniform01(rng) + 1e-3;
        mdp.p(s, a, next) = w;
        sum += w;
      }
      for (int next = 0; next < states; ++next) {
        mdp.p(s, a, next) /= sum;
      }
      mdp.r(s, a) = uniform01(rng);
    }
  }
  return mdp;
}

std::vector<double> bellman_backup(const TabularMdp& mdp, double gamma,
                                   const std::vector<double>& values) {
  std::vector<double> out(static_cast<std::size_t>(mdp.state_count));
  for (int s = 0; s < mdp.state_count; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.action_count; ++a) {
      double q = mdp.r(s, a);
      for (int next = 0; next < mdp.state_count; ++next) {
        q += gamma * mdp.p(s, a, next) * values[static_cast<std::size_t>(next)];
      }
      best = std::max(best, q);
    }
    out[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

std::vector<double> value_iteration(const TabularMdp& mdp, double gamma,
                                    double tolerance) {
  mdp.validate();
  if (tolerance <= 0.0) {
    throw ContractViolation("tolerance must be positive");
  }
  if (gamma < 0.0 || gamma > 1.0) {
    throw ContractViolation("gamma must lie in [0, 1]");
  }

  std::vector<double> values(static_cast<std::size_t>(mdp.state_count), 0.0);
  // Contraction bound: residual(V_{k+1}) <= gamma * ||V_{k+1} - V_k||_inf,
  // so iterating until the sweep delta is <= tolerance/gamma guarantees the
  // returned table's Bellman residual is within tolerance.
  const double target = gamma > 0.0 ? tolerance / gamma : tolerance;
  constexpr int kMaxSweeps = 1'000'000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    std::vector<double> next = bellman_backup(mdp, gamma, values);
    double delta = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      delta = std::max(delta, std::abs(next[i] - values[i]));
    }
    values = std::move(next);
    if (delta <= target) {
      return values;
    }
  }
  throw ValidationError("value iteration did not converge (gamma too close to 1?)");
}

}  // namespace evade
