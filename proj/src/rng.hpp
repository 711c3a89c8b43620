#pragma once

#include <array>
#include <cstdint>

namespace rmcl {

std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256++ seeded through splitmix64. The generator is fixed so that a
// given seed produces the same stream on every platform. Sub-streams for
// independent work (per-row Monte Carlo, negative sampling, ...) come from
// fork(tag), which depends only on (seed, tag), never on how much of the
// parent stream has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // 53-bit uniform in [0, 1).
  double next_double();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased uniform integer in [0, n), n >= 1 (Lemire multiply-shift with
  // rejection).
  std::uint64_t next_below(std::uint64_t n);
  // Standard Cauchy deviate: tan(pi * (u - 1/2)).
  double next_cauchy();

  Rng fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::array<std::uint64_t, 4> state() const { return s_; }
  void restore(std::uint64_t seed, const std::array<std::uint64_t, 4>& state);

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace rmcl
