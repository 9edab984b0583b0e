#include <doctest.h>

#include <array>
#include <cmath>

#include "evade/bandit.hpp"
#include "evade/errors.hpp"

using namespace evade;

TEST_CASE("sliding window keeps only the most recent values") {
  SlidingWindowBuffer buffer(10);
  for (int i = 0; i < 11; ++i) {
    buffer.push(static_cast<double>(i));
  }
  CHECK(buffer.size() == 10);
  CHECK(buffer.mean() == doctest::Approx((1 + 2 + 3 + 4 + 5 + 6 + 7 + 8 + 9 + 10) / 10.0));
}

TEST_CASE("window mean equals the mean of the last ten pushes exactly") {
  SlidingWindowBuffer buffer(10);
  std::vector<double> values;
  for (int i = 0; i < 25; ++i) {
    const double v = 0.37 * i - 2.0;
    buffer.push(v);
    values.push_back(v);
  }
  double sum = 0.0;
  for (std::size_t i = values.size() - 10; i < values.size(); ++i) {
    sum += values[i];
  }
  CHECK(buffer.mean() == sum / 10.0);
}

TEST_CASE("sample sd is zero below two observations") {
  SlidingWindowBuffer buffer(10);
  CHECK(buffer.sample_sd() == 0.0);
  buffer.push(3.0);
  CHECK(buffer.sample_sd() == 0.0);
  buffer.push(5.0);
  CHECK(buffer.sample_sd() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("single-arm bandits always select arm 0") {
  Mab mab(1);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    CHECK(mab.thompson_select(rng) == 0);
    mab.record(0, 1.0);
  }
}

TEST_CASE("unobserved arms are explored before sampled ones") {
  Mab mab(2);
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    mab.record(1, 4.0);
  }
  CHECK(mab.thompson_select(rng) == 0);  // empty arm goes first
  mab.record(0, 0.0);
  CHECK(mab.thompson_select(rng) == 0);  // still below two observations
}

TEST_CASE("forced exploration visits every arm twice before posterior draws") {
  Mab mab(6);
  Rng rng(3);
  std::array<int, 6> counts{};
  for (int round = 0; round < 12; ++round) {
    const int arm = mab.thompson_select(rng);
    mab.record(arm, 0.0);
    ++counts[static_cast<std::size_t>(arm)];
  }
  for (int arm = 0; arm < 6; ++arm) {
    CHECK(counts[static_cast<std::size_t>(arm)] == 2);
  }
}

TEST_CASE("a clearly better arm dominates the posterior draws") {
  Mab mab(2);
  for (int i = 0; i < 5; ++i) {
    mab.record(0, 10.0);
    mab.record(1, 0.0);
  }
  Rng rng(4);
  int wins = 0;
  for (int i = 0; i < 10000; ++i) {
    wins += mab.thompson_select(rng) == 0;
  }
  CHECK(wins >= 9900);
}

TEST_CASE("thompson selection is equivariant under a constant shift") {
  Mab base(3);
  Mab shifted(3);
  const double shift = 17.5;
  Rng fill(5);
  for (int arm = 0; arm < 3; ++arm) {
    for (int i = 0; i < 4 + arm; ++i) {
      const double v = uniform01(fill) * 3.0;
      base.record(arm, v);
      shifted.record(arm, v + shift);
    }
  }
  Rng rng_a(99), rng_b(99);
  for (int i = 0; i < 200; ++i) {
    CHECK(base.thompson_select(rng_a) == shifted.thompson_select(rng_b));
  }
}

TEST_CASE("greedy arm follows buffer means with deterministic tie-breaks") {
  Mab mab(6);
  mab.record(0, 0.1);
  mab.record(1, 0.9);
  mab.record(2, 0.3);
  CHECK(mab.greedy_arm() == 1);

  Mab tie(6);
  tie.record(2, 0.5);
  tie.record(4, 0.5);
  CHECK(tie.greedy_arm() == 2);

  Mab empty(6);
  CHECK_THROWS_AS(empty.greedy_arm(), ContractViolation);
}

TEST_CASE("greedy arm is invariant under increasing affine maps") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    Mab base(4);
    Mab mapped(4);
    const double a = 0.1 + uniform01(rng) * 5.0;
    const double b = uniform01(rng) * 20.0 - 10.0;
    for (int arm = 0; arm < 4; ++arm) {
      const int count = 1 + static_cast<int>(uniform_below(rng, 10));
      for (int i = 0; i < count; ++i) {
        const double v = uniform01(rng) * 8.0 - 4.0;
        base.record(arm, v);
        mapped.record(arm, a * v + b);
      }
    }
    CHECK(base.greedy_arm() == mapped.greedy_arm());
  }
}

TEST_CASE("stationary two-arm bandit picks the better arm at least 80 percent") {
  int passing_seeds = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Mab mab(2);
    Rng rng(seed * 7919 + 1);
    int better = 0;
    for (int round = 0; round < 200; ++round) {
      const int arm = mab.thompson_select(rng);
      mab.record(arm, arm == 0 ? 1.0 : 0.0);
      better += arm == 0;
    }
    passing_seeds += better >= 160;
  }
  CHECK(passing_seeds == 20);
}

TEST_CASE("plans have one entry per depth") {
  MabStack stack(4, 6);
  Rng rng(7);
  const auto plan = stack.sample_plan(rng);
  CHECK(plan.size() == 4);
  for (int arm : plan) {
    CHECK(arm >= 0);
    CHECK(arm < 6);
  }
}

TEST_CASE("stack updates touch exactly one arm per depth") {
  MabStack stack(2, 6);
  const std::vector<int> plan = {3, 1};
  stack.update(plan, 2.5);
  for (int d = 0; d < 2; ++d) {
    for (int arm = 0; arm < 6; ++arm) {
      const int expected = (d == 0 && arm == 3) || (d == 1 && arm == 1) ? 1 : 0;
      CHECK(stack.bandit(d).arm(arm).size() == expected);
    }
  }
  CHECK(stack.bandit(0).arm(3).mean() == 2.5);

  const std::vector<int> wrong_length = {1};
  CHECK_THROWS_AS(stack.update(wrong_length, 1.0), ContractViolation);
}

TEST_CASE("eleven updates of one arm keep only the ten most recent returns") {
  MabStack stack(1, 6);
  const std::vector<int> plan = {2};
  for (int i = 0; i <= 10; ++i) {
    stack.update(plan, static_cast<double>(i));
  }
  CHECK(stack.bandit(0).arm(2).size() == 10);
  CHECK(stack.bandit(0).arm(2).mean() == doctest::Approx(5.5));
}

TEST_CASE("per-depth updates place the return-to-go at each depth") {
  MabStack stack(3, 6);
  const std::vector<int> plan = {0, 5, 2};
  const std::vector<double> to_go = {1.0, 0.5, -0.25};
  stack.update_per_depth(plan, to_go);
  CHECK(stack.bandit(0).arm(0).mean() == 1.0);
  CHECK(stack.bandit(1).arm(5).mean() == 0.5);
  CHECK(stack.bandit(2).arm(2).mean() == -0.25);
}

TEST_CASE("a dominant stack samples the dominant plan") {
  MabStack stack(4, 6);
  for (int d = 0; d < 4; ++d) {
    for (int arm = 0; arm < 6; ++arm) {
      for (int i = 0; i < 10; ++i) {
        stack.bandit(d).record(arm, arm == 2 ? 10.0 : 0.0);
      }
    }
  }
  Rng rng(8);
  int dominant = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto plan = stack.sample_plan(rng);
    dominant += plan == std::vector<int>{2, 2, 2, 2};
  }
  CHECK(dominant >= 950);
}

TEST_CASE("fresh stacks sample uniformly over the whole plan space") {
  MabStack stack(2, 6);
  Rng rng(9);
  std::array<int, 36> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto plan = stack.sample_plan(rng);
    ++counts[static_cast<std::size_t>(plan[0] * 6 + plan[1])];
  }
  const double expected = draws / 36.0;
  double chi2 = 0.0;
  for (int cell = 0; cell < 36; ++cell) {
    const double d = counts[static_cast<std::size_t>(cell)] - expected;
    chi2 += d * d / expected;
    CHECK(counts[static_cast<std::size_t>(cell)] > 0);  // every plan reachable
  }
  // 99th percentile of chi-squared with 35 degrees of freedom.
  CHECK(chi2 <= 57.342);
}

TEST_CASE("greedy stack action requires at least one observation") {
  MabStack stack(3, 6);
  CHECK_THROWS_AS(stack.greedy_action(), ContractViolation);
  stack.update(std::vector<int>{4, 0, 1}, 3.0);
  CHECK(stack.greedy_action() == 4);
}
