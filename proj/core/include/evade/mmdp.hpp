#pragma once

#include <memory>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "evade/rng.hpp"

namespace evade {

/// Discount factor and lookahead horizon shared by planners and the learner.
struct DiscountSpec {
  double gamma = 0.95;
  int horizon = 1;

  void validate() const;
};

/// Discounted h-step return: sum_k gamma^k * rewards[k]. The reward sequence
/// may be shorter than the horizon (truncated episodes) but never longer.
double discounted_return(std::span<const double> rewards, const DiscountSpec& spec);

/// Discounted return plus the bootstrap term gamma^h * terminal_value.
/// When the simulated plan ended inside the horizon (truncated_early) the
/// bootstrap is suppressed: a terminal state has no future value.
double evade_return(std::span<const double> rewards, const DiscountSpec& spec,
                    double terminal_value, bool truncated_early);

/// Suffix returns G_d for every depth d in [0, horizon): the discounted
/// return computed from step d onward, bootstrapped like evade_return.
/// Depths at or past an early terminal receive 0.
std::vector<double> suffix_returns(std::span<const double> rewards,
                                   const DiscountSpec& spec,
                                   double terminal_value, bool truncated_early);

/// One-step TD error: v_s - (reward + gamma * v_next), with v_next treated
/// as 0 for terminal transitions.
double td_error(double v_s, double reward, double gamma, double v_next, bool terminal);

/// Number of open-loop joint plans: action_count^(horizon * agent_count), exact.
boost::multiprecision::cpp_int joint_plan_count(int action_count, int horizon,
                                                int agent_count);

/// Flat state encoding handed to the value function. Layout is defined by
/// the environment that produced it.
using FeatureVector = std::vector<double>;

/// One stored transition (s_t, a_t, s_{t+1}, r_t).
struct ExperienceSample {
  FeatureVector state_features;
  std::vector<int> joint_action;
  FeatureVector next_state_features;
  double reward = 0.0;
  bool terminal = false;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminal = false;
};

/// Generative-model contract used for simulation-based planning. clone()
/// snapshots the current state into an independent sandbox; stepping a
/// sandbox never touches the state it was cloned from, and transitions are
/// distributed identically to the real environment's.
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual std::unique_ptr<GenerativeModel> clone() const = 0;
  virtual StepOutcome step(std::span<const int> joint_action, Rng& rng) = 0;
  virtual FeatureVector encode() const = 0;
  virtual int agent_count() const = 0;
  virtual int action_count() const = 0;
};

}  // namespace evade
