#include "evade/planner.hpp"

#include "evade/errors.hpp"

namespace evade {

void PlannerBudget::validate() const {
  if (horizon < 1) {
    throw ConfigError("planning horizon must be >= 1");
  }
  if (iterations() < 1) {
    throw ConfigError("budget allows zero rollouts (n_budget / horizon < 1)");
  }
}

void JointPlan::set_row(int agent, std::span<const int> plan) {
  for (int d = 0; d < horizon; ++d) {
    at(agent, d) = plan[static_cast<std::size_t>(d)];
  }
}

std::vector<int> JointPlan::joint_action_at(int depth) const {
  std::vector<int> joint(static_cast<std::size_t>(agents));
  for (int i = 0; i < agents; ++i) {
    joint[static_cast<std::size_t>(i)] = at(i, depth);
  }
  return joint;
}

RolloutResult rollout(GenerativeModel& sandbox, const JointPlan& plan, double gamma,
                      const ValueOracle& oracle, Rng& rng) {
  RolloutResult result;
  result.rewards.reserve(static_cast<std::size_t>(plan.horizon));
  for (int depth = 0; depth < plan.horizon; ++depth) {
    const StepOutcome outcome = sandbox.step(plan.joint_action_at(depth), rng);
    result.rewards.push_back(outcome.reward);
    if (outcome.terminal) {
      result.truncated_early = true;
      break;
    }
  }
  const DiscountSpec spec{gamma, plan.horizon};
  if (!result.truncated_early) {
    result.bootstrap = oracle.evaluate(sandbox.encode());
  }
  result.plan_return =
      evade_return(result.rewards, spec, result.bootstrap, result.truncated_early);
  return result;
}

namespace {

struct DecisionState {
  std::vector<MabStack> stacks;
  JointPlan joint_plan;
};

DecisionState make_decision_state(const GenerativeModel& root, const PlannerBudget& budget) {
  budget.validate();
  DecisionState state;
  const int n = root.agent_count();
  state.stacks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    state.stacks.emplace_back(budget.horizon, root.action_count());
  }
  state.joint_plan = JointPlan(n, budget.horizon);
  return state;
}

void apply_update(MabStack& stack, std::span<const int> plan, const RolloutResult& result,
                  double gamma, BanditUpdateMode mode) {
  if (mode == BanditUpdateMode::FullReturn) {
    stack.update(plan, result.plan_return);
  } else {
    const DiscountSpec spec{gamma, stack.depth()};
    const std::vector<double> to_go =
        suffix_returns(result.rewards, spec, result.bootstrap, result.truncated_early);
    stack.update_per_depth(plan, to_go);
  }
}

std::vector<int> greedy_joint_action(const DecisionState& state) {
  std::vector<int> joint;
  joint.reserve(state.stacks.size());
  for (const auto& stack : state.stacks) {
    joint.push_back(stack.greedy_action());
  }
  return joint;
}

}  // namespace

std::vector<int> dice_decide(const GenerativeModel& root, const PlannerBudget& budget,
                             double gamma, const ValueOracle& oracle,
                             BanditUpdateMode mode, std::span<Rng> select_rngs,
                             Rng& rollout_rng) {
  DecisionState state = make_decision_state(root, budget);
  const int n = root.agent_count();
  if (std::ssize(select_rngs) != n) {
    throw ContractViolation("dice_decide needs one selection rng per agent");
  }
  std::vector<std::vector<int>> plans(static_cast<std::size_t>(n));
  for (int iter = 0; iter < budget.iterations(); ++iter) {
    for (int i = 0; i < n; ++i) {
      plans[static_cast<std::size_t>(i)] =
          state.stacks[static_cast<std::size_t>(i)].sample_plan(select_rngs[static_cast<std::size_t>(i)]);
      state.joint_plan.set_row(i, plans[static_cast<std::size_t>(i)]);
    }
    auto sandbox = root.clone();
    const RolloutResult result = rollout(*sandbox, state.joint_plan, gamma, oracle, rollout_rng);
    for (int i = 0; i < n; ++i) {
      apply_update(state.stacks[static_cast<std::size_t>(i)], plans[static_cast<std::size_t>(i)],
                   result, gamma, mode);
    }
  }
  return greedy_joint_action(state);
}

std::vector<int> doolp_decide(const GenerativeModel& root, const PlannerBudget& budget,
                              double gamma, const ValueOracle& oracle,
                              BanditUpdateMode mode, std::span<Rng> select_rngs,
                              std::span<Rng> rollout_rngs) {
  DecisionState state = make_decision_state(root, budget);
  const int n = root.agent_count();
  if (std::ssize(select_rngs) != n || std::ssize(rollout_rngs) != n) {
    throw ContractViolation("doolp_decide needs per-agent selection and rollout rngs");
  }
  std::vector<std::vector<int>> plans(static_cast<std::size_t>(n));
  for (int iter = 0; iter < budget.iterations(); ++iter) {
    // Lockstep round: sample, broadcast all plans, then each agent simulates
    // the assembled joint plan privately and updates only its own stack.
    for (int i = 0; i < n; ++i) {
      plans[static_cast<std::size_t>(i)] =
          state.stacks[static_cast<std::size_t>(i)].sample_plan(select_rngs[static_cast<std::size_t>(i)]);
      state.joint_plan.set_row(i, plans[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < n; ++i) {
      auto sandbox = root.clone();
      const RolloutResult result =
          rollout(*sandbox, state.joint_plan, gamma, oracle, rollout_rngs[static_cast<std::size_t>(i)]);
      apply_update(state.stacks[static_cast<std::size_t>(i)], plans[static_cast<std::size_t>(i)],
                   result, gamma, mode);
    }
  }
  return greedy_joint_action(state);
}

}  // namespace evade
