#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace expnet {

// Every random quantity in the library is drawn from a stream whose seed is a
// hash of (base seed, tag, indices...). Results therefore depend only on the
// key, never on evaluation order.
// xoshiro256** seeded by splitmix64. Cheap to construct, which matters
// because estimators open one stream per (draw, source) pair.
class Stream {
 public:
  using result_type = std::uint64_t;
  explicit Stream(std::uint64_t seed);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

enum class StreamTag : std::uint64_t {
  kTopology = 1,
  kCapacity,
  kPlacement,
  kStatistics,
  kArrivals,
  kFeatures,
  kGradientArrivals,
  kGradientFeatures,
  kGroundTruth,
  kNoise,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Stream::Stream(std::uint64_t seed) {
  for (auto& word : s_) {
    seed += 0x9e3779b97f4a7c15ULL;
    word = splitmix64(seed);
  }
}

std::uint64_t stream_key(std::uint64_t seed, StreamTag tag,
                         std::initializer_list<std::uint64_t> indices = {});

inline Stream make_stream(std::uint64_t seed, StreamTag tag,
                          std::initializer_list<std::uint64_t> indices = {}) {
  return Stream(stream_key(seed, tag, indices));
}

inline double uniform01(Stream& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Stream& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Smallest k with P[Poisson(mean) <= k] > u. Monotone in both mean and u, so
// sharing u across two means couples the draws (common random numbers).
int poisson_inverse_cdf(double mean, double u);

double poisson_pmf(int n, double mean);

// P[Poisson(mean) >= n]
double poisson_upper_tail(int n, double mean);

}  // namespace expnet
