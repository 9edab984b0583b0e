#pragma once

#include <vector>

#include "evade/mmdp.hpp"
#include "evade/rng.hpp"

namespace evade {

/// Fixed-capacity FIFO of experience samples with uniform minibatch
/// sampling over the current contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(ExperienceSample sample);

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Oldest-first indexing.
  const ExperienceSample& at(std::size_t index) const;

  /// Uniform sample with replacement.
  std::vector<const ExperienceSample*> sample_batch(Rng& rng, std::size_t count) const;

 private:
  std::vector<ExperienceSample> ring_;
  std::size_t head_ = 0;  // index of the oldest element once full
  std::size_t capacity_;
};

}  // namespace evade
