#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace auditfair {

// Deterministic RNG used everywhere seeded behavior is required.
//
// The generator is SplitMix64. We do not use <random> distributions because
// their output is implementation-defined; every draw here is specified by
// this file alone, so results are reproducible across platforms and builds.
//
// Streams: every consumer derives its own named stream from a base seed via
// rng_stream(seed, name, index). Two streams with different (name, index)
// never share state, which keeps parallel workers independent of scheduling.
class Rng {
 public:
  explicit Rng(uint64_t state) : state_(state) {
    // decorrelate trivially related seeds
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // uniform in [0, n), unbiased via rejection
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0ull - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return unit() < p; }

  // index into cumulative weights (first bucket whose cumsum exceeds the draw)
  size_t categorical(const std::vector<double>& cumulative) {
    double u = unit() * cumulative.back();
    size_t i = 0;
    while (i + 1 < cumulative.size() && u >= cumulative[i]) ++i;
    return i;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<size_t> permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  // k distinct values from [0, n), partial Fisher-Yates
  std::vector<size_t> sample_distinct(size_t n, size_t k) {
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline Rng rng_stream(uint64_t seed, std::string_view name, uint64_t index = 0) {
  uint64_t s = seed;
  s ^= fnv1a(name) + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
  s ^= (index + 1) * 0xd1b54a32d192ed03ull;
  return Rng(s);
}

}  // namespace auditfair
