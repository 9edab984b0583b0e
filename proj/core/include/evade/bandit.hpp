#pragma once

#include <span>
#include <vector>

#include "evade/rng.hpp"

namespace evade {

/// Fixed-capacity FIFO of the most recent local returns. Inserting into a
/// full buffer evicts the oldest value.
class SlidingWindowBuffer {
 public:
  explicit SlidingWindowBuffer(int capacity = 10);

  void push(double value);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }

  double mean() const;
  /// Sample standard deviation (k-1 denominator); 0 for fewer than 2 values.
  double sample_sd() const;

 private:
  std::vector<double> values_;  // ring, oldest at head_
  int head_ = 0;
  int size_ = 0;
  int capacity_;
};

/// Multi-armed bandit over the individual action set, one sliding-window
/// return buffer per arm.
class Mab {
 public:
  explicit Mab(int arm_count, int window_capacity = 10);

  /// Thompson sampling with a Gaussian return model (unknown mean and
  /// variance, Jeffreys prior): for arms with k >= 2 observations the draw is
  /// mean + t_{k-1} * sd / sqrt(k). Arms with fewer than 2 observations are
  /// forced first, fewest observations ahead, random among equals. Exact
  /// argmax ties are broken uniformly at random.
  int thompson_select(Rng& rng);

  /// Arm with the highest buffer mean; unobserved arms rank below all
  /// observed ones, ties go to the lowest index. Throws when every buffer is
  /// empty.
  int greedy_arm() const;

  void record(int arm, double value);
  int arm_count() const { return static_cast<int>(arms_.size()); }
  const SlidingWindowBuffer& arm(int index) const { return arms_[static_cast<std::size_t>(index)]; }

 private:
  std::vector<SlidingWindowBuffer> arms_;
};

/// Open-loop plan distribution: one bandit per plan depth. Sampling one arm
/// per depth yields a plan of `depth()` individual actions.
class MabStack {
 public:
  MabStack(int depth, int arm_count, int window_capacity = 10);

  std::vector<int> sample_plan(Rng& rng);

  /// Default update: pushes the full-plan return into every depth's chosen arm.
  void update(std::span<const int> plan, double plan_return);
  /// Return-to-go update: depth d receives returns[d].
  void update_per_depth(std::span<const int> plan, std::span<const double> returns);

  /// Greedy root decision from the depth-0 bandit.
  int greedy_action() const;

  int depth() const { return static_cast<int>(bandits_.size()); }
  Mab& bandit(int d) { return bandits_[static_cast<std::size_t>(d)]; }
  const Mab& bandit(int d) const { return bandits_[static_cast<std::size_t>(d)]; }

 private:
  std::vector<Mab> bandits_;
};

}  // namespace evade
