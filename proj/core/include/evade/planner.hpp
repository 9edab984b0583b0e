#pragma once

#include <span>
#include <vector>

#include "evade/bandit.hpp"
#include "evade/mmdp.hpp"

namespace evade {

/// Per-decision simulation budget. A decision runs floor(n_budget / horizon)
/// rollouts of at most `horizon` steps each.
struct PlannerBudget {
  int n_budget = 0;
  int horizon = 1;

  int iterations() const { return n_budget / horizon; }
  void validate() const;
};

/// n x h matrix of individual actions, one row per agent.
struct JointPlan {
  int agents = 0;
  int horizon = 0;
  std::vector<int> actions;  // row-major [agent][depth]

  JointPlan() = default;
  JointPlan(int agents_, int horizon_)
      : agents(agents_), horizon(horizon_),
        actions(static_cast<std::size_t>(agents_) * horizon_, 0) {}

  int at(int agent, int depth) const {
    return actions[static_cast<std::size_t>(agent) * horizon + depth];
  }
  int& at(int agent, int depth) {
    return actions[static_cast<std::size_t>(agent) * horizon + depth];
  }
  void set_row(int agent, std::span<const int> plan);
  std::vector<int> joint_action_at(int depth) const;
};

/// Terminal-value estimate consulted at the end of each rollout. Must be
/// pure: evaluation never mutates planner state.
class ValueOracle {
 public:
  virtual ~ValueOracle() = default;
  virtual double evaluate(const FeatureVector& features) const = 0;
};

/// Baseline oracle: plain discounted-return planning.
class ZeroOracle final : public ValueOracle {
 public:
  double evaluate(const FeatureVector&) const override { return 0.0; }
};

/// How simulated returns feed back into the MAB stacks.
enum class BanditUpdateMode {
  FullReturn,   // full-plan return pushed at every depth
  ReturnToGo,   // depth d receives the return from step d onward
};

struct RolloutResult {
  std::vector<double> rewards;
  bool truncated_early = false;
  double bootstrap = 0.0;   // oracle value of the final state (0 if truncated)
  double plan_return = 0.0; // discounted rewards + gamma^h * bootstrap
};

/// Simulates the joint plan in the sandbox (stopping at terminal states),
/// then scores it with the oracle's terminal-value estimate.
RolloutResult rollout(GenerativeModel& sandbox, const JointPlan& plan, double gamma,
                      const ValueOracle& oracle, Rng& rng);

/// Centralized joint-policy search: n fresh MAB stacks sample a joint plan
/// per iteration, a single sandbox rollout scores it, and the shared return
/// updates every stack. select_rngs supplies one Thompson stream per agent.
std::vector<int> dice_decide(const GenerativeModel& root, const PlannerBudget& budget,
                             double gamma, const ValueOracle& oracle,
                             BanditUpdateMode mode, std::span<Rng> select_rngs,
                             Rng& rollout_rng);

/// Decentralized variant: each agent keeps a private stack and simulates the
/// broadcast joint plan in its own sandbox with its own rollout stream, so
/// simulation outcomes (and hence stack contents) may diverge across agents.
std::vector<int> doolp_decide(const GenerativeModel& root, const PlannerBudget& budget,
                              double gamma, const ValueOracle& oracle,
                              BanditUpdateMode mode, std::span<Rng> select_rngs,
                              std::span<Rng> rollout_rngs);

}  // namespace evade
