#include "evade/bandit.hpp"

#include <cmath>
#include <limits>

#include "evade/errors.hpp"

namespace evade {

SlidingWindowBuffer::SlidingWindowBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw ContractViolation("window capacity must be >= 1");
  }
  values_.assign(static_cast<std::size_t>(capacity), 0.0);
}

void SlidingWindowBuffer::push(double value) {
  if (size_ < capacity_) {
    values_[static_cast<std::size_t>((head_ + size_) % capacity_)] = value;
    ++size_;
  } else {
    values_[static_cast<std::size_t>(head_)] = value;
    head_ = (head_ + 1) % capacity_;
  }
}

double SlidingWindowBuffer::mean() const {
  if (size_ == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (int i = 0; i < size_; ++i) {
    sum += values_[static_cast<std::size_t>((head_ + i) % capacity_)];
  }
  return sum / size_;
}

double SlidingWindowBuffer::sample_sd() const {
  if (size_ < 2) {
    return 0.0;
  }
  const double m = mean();
  double ss = 0.0;
  for (int i = 0; i < size_; ++i) {
    const double d = values_[static_cast<std::size_t>((head_ + i) % capacity_)] - m;
    ss += d * d;
  }
  return std::sqrt(ss / (size_ - 1));
}

Mab::Mab(int arm_count, int window_capacity) {
  if (arm_count < 1) {
    throw ContractViolation("bandit needs at least one arm");
  }
  arms_.reserve(static_cast<std::size_t>(arm_count));
  for (int i = 0; i < arm_count; ++i) {
    arms_.emplace_back(window_capacity);
  }
}

namespace {

int pick_uniform(const std::vector<int>& candidates, Rng& rng) {
  return candidates[uniform_below(rng, candidates.size())];
}

}  // namespace

int Mab::thompson_select(Rng& rng) {
  // Forced exploration: arms still below 2 observations, fewest first.
  std::vector<int> under;
  int min_count = std::numeric_limits<int>::max();
  for (int a = 0; a < arm_count(); ++a) {
    const int count = arms_[static_cast<std::size_t>(a)].size();
    if (count >= 2) {
      continue;
    }
    if (count < min_count) {
      min_count = count;
      under.clear();
    }
    if (count == min_count) {
      under.push_back(a);
    }
  }
  if (!under.empty()) {
    return pick_uniform(under, rng);
  }

  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> best_arms;
  for (int a = 0; a < arm_count(); ++a) {
    const auto& buffer = arms_[static_cast<std::size_t>(a)];
    const int k = buffer.size();
    const double sd = buffer.sample_sd();
    double draw = buffer.mean();
    if (sd > 0.0) {
      std::student_t_distribution<double> t(static_cast<double>(k - 1));
      draw += t(rng) * sd / std::sqrt(static_cast<double>(k));
    }
    if (draw > best) {
      best = draw;
      best_arms.assign(1, a);
    } else if (draw == best) {
      best_arms.push_back(a);
    }
  }
  return best_arms.size() == 1 ? best_arms.front() : pick_uniform(best_arms, rng);
}

int Mab::greedy_arm() const {
  int best_arm = -1;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < arm_count(); ++a) {
    const auto& buffer = arms_[static_cast<std::size_t>(a)];
    if (buffer.empty()) {
      continue;
    }
    const double m = buffer.mean();
    if (m > best_mean) {
      best_mean = m;
      best_arm = a;
    }
  }
  if (best_arm < 0) {
    throw ContractViolation("greedy arm requested from a bandit with no observations");
  }
  return best_arm;
}

void Mab::record(int arm, double value) {
  if (arm < 0 || arm >= arm_count()) {
    throw ContractViolation("arm index out of range");
  }
  arms_[static_cast<std::size_t>(arm)].push(value);
}

MabStack::MabStack(int depth, int arm_count, int window_capacity) {
  if (depth < 1) {
    throw ContractViolation("stack depth must be >= 1");
  }
  bandits_.reserve(static_cast<std::size_t>(depth));
  for (int d = 0; d < depth; ++d) {
    bandits_.emplace_back(arm_count, window_capacity);
  }
}

std::vector<int> MabStack::sample_plan(Rng& rng) {
  std::vector<int> plan(static_cast<std::size_t>(depth()));
  for (int d = 0; d < depth(); ++d) {
    plan[static_cast<std::size_t>(d)] = bandits_[static_cast<std::size_t>(d)].thompson_select(rng);
  }
  return plan;
}

void MabStack::update(std::span<const int> plan, double plan_return) {
  if (std::ssize(plan) != depth()) {
    throw ContractViolation("plan length does not match stack depth");
  }
  for (int d = 0; d < depth(); ++d) {
    bandits_[static_cast<std::size_t>(d)].record(plan[static_cast<std::size_t>(d)], plan_return);
  }
}

void MabStack::update_per_depth(std::span<const int> plan, std::span<const double> returns) {
  if (std::ssize(plan) != depth() || std::ssize(returns) != depth()) {
    throw ContractViolation("plan/return length does not match stack depth");
  }
  for (int d = 0; d < depth(); ++d) {
    bandits_[static_cast<std::size_t>(d)].record(plan[static_cast<std::size_t>(d)],
                                                 returns[static_cast<std::size_t>(d)]);
  }
}

int MabStack::greedy_action() const { return bandits_.front().greedy_arm(); }

}  // namespace evade
