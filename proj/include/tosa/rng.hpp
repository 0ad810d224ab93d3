#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace tosa {

// SplitMix64 finalizer. Used for seed derivation and counter-based draws.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a list of integer tags,
// e.g. derive_seed(master, {k, replicate, episode}).
inline std::uint64_t derive_seed(std::uint64_t parent,
                                 std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(parent);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

// Maps 64 random bits to [0, 1) with 53-bit resolution.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Sequential random stream. Distributions are implemented here rather than
// through <random> distributions so draws are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return to_unit(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Exp(1), i.e. |beta|^2 for beta ~ CN(0,1).
  double exponential() { return -std::log1p(-uniform()); }
  // Uniform integer in [0, n). Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// Stateless stream addressed by an integer counter: draw(i) depends only on
// (key, i). Lets a dropped TTI consume no randomness.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key = 0) : key_(key) {}

  double uniform(std::uint64_t counter) const noexcept {
    return to_unit(mix64(key_ ^ mix64(counter)));
  }
  double exponential(std::uint64_t counter) const noexcept {
    return -std::log1p(-uniform(counter));
  }
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace tosa
