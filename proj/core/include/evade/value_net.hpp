#pragma once

#include <iosfwd>
#include <optional>

#include "evade/adam.hpp"
#include "evade/mmdp.hpp"
#include "evade/nn.hpp"
#include "evade/planner.hpp"

namespace evade {

struct TrainerConfig {
  double learning_rate = 0.001;
  double gamma = 0.95;
  int minibatch_size = 64;
  std::uint64_t target_sync_period = 5000;  // gradient steps between target syncs
  std::size_t warmup_samples = 5000;
  int gradient_steps_per_env_step = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
  void validate() const;

  bool operator==(const TrainerConfig&) const = default;
};

/// Online value approximator with mirrored target parameters. The target
/// network changes only through sync_target(), which runs automatically
/// every target_sync_period gradient steps.
class ValueNet {
 public:
  /// Seeded fan-in initialization; the target starts as a copy.
  ValueNet(const nn::ArchitectureDescriptor& descriptor, Rng& init_rng);
  /// All-zero parameters (predicts 0 everywhere).
  explicit ValueNet(const nn::ArchitectureDescriptor& descriptor);

  double predict(std::span<const double> features, bool use_target = false) const;

  /// One TD(0) regression step: targets r + gamma * V_target(s') (r alone on
  /// terminal samples, target held fixed), mean-squared-error loss, a single
  /// ADAM update. Returns the pre-update loss.
  double train_minibatch(std::span<const ExperienceSample* const> batch,
                         const TrainerConfig& config);

  void sync_target();
  std::uint64_t gradient_steps() const { return gradient_steps_; }

  nn::Network& online() { return online_; }
  const nn::Network& online() const { return online_; }
  const nn::Network& target() const { return target_; }
  const nn::ArchitectureDescriptor& descriptor() const { return online_.descriptor(); }

  /// Flat binary checkpoint: descriptor, both parameter sets, optimizer
  /// moments, step counters. Round-trips bit-exactly.
  void save(std::ostream& out) const;
  static ValueNet load(std::istream& in);

 private:
  nn::Network online_;
  nn::Network target_;
  AdamOptimizer adam_;
  std::uint64_t gradient_steps_ = 0;
};

/// Planner-side view of the learner: Eq.-style terminal-value estimates from
/// the online parameters.
class NetOracle final : public ValueOracle {
 public:
  explicit NetOracle(const ValueNet& net) : net_(&net) {}
  double evaluate(const FeatureVector& features) const override {
    return net_->predict(features, false);
  }

 private:
  const ValueNet* net_;
};

}  // namespace evade
