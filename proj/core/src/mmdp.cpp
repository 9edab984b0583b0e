#include "evade/mmdp.hpp"

#include <cmath>

#include "evade/errors.hpp"

namespace evade {

void DiscountSpec::validate() const {
  if (gamma < 0.0 || gamma > 1.0) {
    throw ContractViolation("discount factor must lie in [0, 1]");
  }
  if (horizon < 1) {
    throw ContractViolation("horizon must be >= 1");
  }
}

double discounted_return(std::span<const double> rewards, const DiscountSpec& spec) {
  spec.validate();
  if (std::ssize(rewards) > spec.horizon) {
    throw ContractViolation("reward sequence longer than horizon");
  }
  double sum = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    sum += weight * r;
    weight *= spec.gamma;
  }
  return sum;
}

double evade_return(std::span<const double> rewards, const DiscountSpec& spec,
                    double terminal_value, bool truncated_early) {
  double g = discounted_return(rewards, spec);
  if (!truncated_early) {
    g += std::pow(spec.gamma, spec.horizon) * terminal_value;
  }
  return g;
}

std::vector<double> suffix_returns(std::span<const double> rewards,
                                   const DiscountSpec& spec,
                                   double terminal_value, bool truncated_early) {
  spec.validate();
  const auto len = std::ssize(rewards);
  if (len > spec.horizon) {
    throw ContractViolation("reward sequence longer than horizon");
  }
  std::vector<double> out(static_cast<std::size_t>(spec.horizon), 0.0);
  double running = truncated_early
                       ? 0.0
                       : std::pow(spec.gamma, spec.horizon - len) * terminal_value;
  for (auto d = len - 1; d >= 0; --d) {
    running = rewards[static_cast<std::size_t>(d)] + spec.gamma * running;
    out[static_cast<std::size_t>(d)] = running;
  }
  return out;
}

double td_error(double v_s, double reward, double gamma, double v_next, bool terminal) {
  const double bootstrap = terminal ? 0.0 : gamma * v_next;
  return v_s - (reward + bootstrap);
}

boost::multiprecision::cpp_int joint_plan_count(int action_count, int horizon,
                                                int agent_count) {
  if (action_count < 1 || horizon < 1 || agent_count < 1) {
    throw ContractViolation("joint_plan_count arguments must be >= 1");
  }
  const unsigned exponent =
      static_cast<unsigned>(horizon) * static_cast<unsigned>(agent_count);
  return boost::multiprecision::pow(boost::multiprecision::cpp_int(action_count),
                                    exponent);
}

}  // namespace evade
