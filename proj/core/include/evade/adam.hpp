#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evade/nn.hpp"

namespace evade {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected ADAM over a fixed parameter layout. Moments persist across
/// steps and survive checkpointing.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t param_count);

  /// One update over the blocks, which must cover exactly the parameter
  /// layout the optimizer was sized for. Throws TrainingError on non-finite
  /// gradients.
  void step(std::span<const nn::ParamBlock> blocks, const AdamConfig& config);

  std::uint64_t step_count() const { return steps_; }
  std::size_t param_count() const { return first_.size(); }

  std::span<const double> first_moments() const { return first_; }
  std::span<const double> second_moments() const { return second_; }
  void restore(std::span<const double> first, std::span<const double> second,
               std::uint64_t steps);

 private:
  std::vector<double> first_, second_;
  std::uint64_t steps_ = 0;
};

}  // namespace evade
