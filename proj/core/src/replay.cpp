#include "evade/replay.hpp"

#include "evade/errors.hpp"

namespace evade {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw ContractViolation("replay capacity must be >= 1");
  }
  ring_.reserve(capacity);
}

void ReplayBuffer::push(ExperienceSample sample) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(sample));
  } else {
    ring_[head_] = std::move(sample);
    head_ = (head_ + 1) % capacity_;
  }
}

const ExperienceSample& ReplayBuffer::at(std::size_t index) const {
  if (index >= ring_.size()) {
    throw ContractViolation("replay index out of range");
  }
  return ring_[(head_ + index) % ring_.size()];
}

std::vector<const ExperienceSample*> ReplayBuffer::sample_batch(Rng& rng,
                                                                std::size_t count) const {
  if (ring_.empty()) {
    throw ContractViolation("cannot sample from an empty replay buffer");
  }
  std::vector<const ExperienceSample*> batch;
  batch.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    batch.push_back(&ring_[uniform_below(rng, ring_.size())]);
  }
  return batch;
}

}  // namespace evade
