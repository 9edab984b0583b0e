#pragma once

#include <cstdint>
#include <random>

namespace evade {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent seed values.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named random streams. Every stochastic component draws from its own
/// stream derived from (master seed, stream, run, episode, step, agent);
/// nothing shares a generator across roles.
enum class Stream : std::uint64_t {
  LayoutShuffle = 1,
  EnvInit = 2,
  EnvStep = 3,
  PlannerSelect = 4,
  PlannerRollout = 5,
  LearnerInit = 6,
  ReplaySample = 7,
  WarmupEnvInit = 8,
  WarmupEnvStep = 9,
  WarmupPlannerSelect = 10,
  WarmupPlannerRollout = 11,
  GradCheck = 12,
  OracleMdp = 13,
};

struct SeedCtx {
  std::uint64_t run = 0;
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::uint64_t agent = 0;
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    const SeedCtx& ctx = {}) {
  std::uint64_t s = mix64(master ^ 0x5851f42d4c957f2dULL);
  s = mix64(s ^ static_cast<std::uint64_t>(stream));
  s = mix64(s ^ ctx.run);
  s = mix64(s ^ ctx.episode);
  s = mix64(s ^ ctx.step);
  s = mix64(s ^ ctx.agent);
  return s;
}

inline Rng make_rng(std::uint64_t master, Stream stream, const SeedCtx& ctx = {}) {
  return Rng(derive_seed(master, stream, ctx));
}

/// Uniform integer in [0, n) via 128-bit multiply-shift. Stable across
/// standard libraries, unlike std::uniform_int_distribution.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(rng()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace evade
