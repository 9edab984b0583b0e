#include "evade/adam.hpp"

#include <cmath>

#include "evade/errors.hpp"

namespace evade {

AdamOptimizer::AdamOptimizer(std::size_t param_count)
    : first_(param_count, 0.0), second_(param_count, 0.0) {}

void AdamOptimizer::step(std::span<const nn::ParamBlock> blocks, const AdamConfig& config) {
  std::size_t total = 0;
  for (const auto& block : blocks) {
    total += block.size;
  }
  if (total != first_.size()) {
    throw ContractViolation("parameter layout does not match optimizer state");
  }

  ++steps_;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(steps_));

  std::size_t offset = 0;
  for (const auto& block : blocks) {
    for (std::size_t i = 0; i < block.size; ++i) {
      const double g = block.grads[i];
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient");
      }
      double& m = first_[offset + i];
      double& v = second_[offset + i];
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g * g;
      block.values[i] -= config.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + config.epsilon);
    }
    offset += block.size;
  }
}

void AdamOptimizer::restore(std::span<const double> first, std::span<const double> second,
                            std::uint64_t steps) {
  if (first.size() != first_.size() || second.size() != second_.size()) {
    throw ContractViolation("moment size mismatch");
  }
  first_.assign(first.begin(), first.end());
  second_.assign(second.begin(), second.end());
  steps_ = steps;
}

}  // namespace evade
