#include "evade/value_net.hpp"

#include <cstring>
#include <istream>
#include <ostream>

#include "evade/errors.hpp"

namespace evade {

void TrainerConfig::validate() const {
  if (learning_rate <= 0.0 || minibatch_size < 1 || target_sync_period < 1 ||
      gradient_steps_per_env_step < 0 || adam_epsilon <= 0.0) {
    throw ConfigError("trainer hyperparameters must be positive");
  }
  if (gamma < 0.0 || gamma > 1.0) {
    throw ConfigError("trainer gamma must lie in [0, 1]");
  }
}

ValueNet::ValueNet(const nn::ArchitectureDescriptor& descriptor, Rng& init_rng)
    : online_(descriptor), target_(descriptor), adam_(online_.param_count()) {
  online_.init_params(init_rng);
  target_.copy_params_from(online_);
}

ValueNet::ValueNet(const nn::ArchitectureDescriptor& descriptor)
    : online_(descriptor), target_(descriptor), adam_(online_.param_count()) {}

double ValueNet::predict(std::span<const double> features, bool use_target) const {
  return use_target ? target_.forward(features) : online_.forward(features);
}

double ValueNet::train_minibatch(std::span<const ExperienceSample* const> batch,
                                 const TrainerConfig& config) {
  if (batch.empty()) {
    throw ContractViolation("empty training minibatch");
  }
  config.validate();

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  online_.zero_grad();
  double loss = 0.0;
  for (const ExperienceSample* sample : batch) {
    double target = sample->reward;
    if (!sample->terminal) {
      target += config.gamma * target_.forward(sample->next_state_features);
    }
    const double prediction = online_.forward(sample->state_features);
    const double err = prediction - target;
    loss += err * err;
    online_.backward(2.0 * err * inv_batch);
  }
  loss *= inv_batch;

  const auto blocks = online_.param_blocks();
  adam_.step(blocks, config.adam());

  ++gradient_steps_;
  if (gradient_steps_ % config.target_sync_period == 0) {
    sync_target();
  }
  return loss;
}

void ValueNet::sync_target() { target_.copy_params_from(online_); }

namespace {

constexpr char kMagic[8] = {'E', 'V', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  write_u64(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t count = read_u64(in);
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  return values;
}

}  // namespace

void ValueNet::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  const std::string arch = online_.descriptor().to_json();
  write_u64(out, arch.size());
  out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  write_doubles(out, online_.flat_params());
  write_doubles(out, target_.flat_params());
  write_doubles(out, adam_.first_moments());
  write_doubles(out, adam_.second_moments());
  write_u64(out, adam_.step_count());
  write_u64(out, gradient_steps_);
  if (!out) {
    throw ValidationError("checkpoint write failed");
  }
}

ValueNet ValueNet::load(std::istream& in) {
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a value-net checkpoint");
  }
  const std::uint64_t arch_len = read_u64(in);
  std::string arch(arch_len, '\0');
  in.read(arch.data(), static_cast<std::streamsize>(arch_len));

  ValueNet net(nn::ArchitectureDescriptor::from_json(arch));
  net.online_.set_flat_params(read_doubles(in));
  net.target_.set_flat_params(read_doubles(in));
  const auto first = read_doubles(in);
  const auto second = read_doubles(in);
  const std::uint64_t adam_steps = read_u64(in);
  net.adam_.restore(first, second, adam_steps);
  net.gradient_steps_ = read_u64(in);
  if (!in) {
    throw ValidationError("truncated value-net checkpoint");
  }
  return net;
}

}  // namespace evade
