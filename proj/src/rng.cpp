#include "rng.hpp"

#include <cmath>

#include "common.hpp"

namespace rmcl {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + next_double() * (hi - lo);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw config_error("Rng::next_below: n must be >= 1");
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::next_cauchy() {
  // u in (0,1) to keep tan finite; 0 maps to the same deviate as 0.5.
  double u = next_double();
  if (u == 0.0) u = 0.5;
  return std::tan(3.14159265358979323846 * (u - 0.5));
}

Rng Rng::fork(std::uint64_t tag) const {
  std::uint64_t t = tag;
  const std::uint64_t mixed_tag = splitmix64(t);
  std::uint64_t s = seed_ ^ mixed_tag;
  return Rng(splitmix64(s));
}

void Rng::restore(std::uint64_t seed,
                  const std::array<std::uint64_t, 4>& state) {
  seed_ = seed;
  s_ = state;
}

}  // namespace rmcl
