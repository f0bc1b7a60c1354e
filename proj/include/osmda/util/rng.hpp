#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "osmda/util/hash.hpp"

namespace osmda::util {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Maps 64 random bits to [0, 1) using the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based uniform draw keyed by (seed, stage, a, b). The value depends
// only on the key, so results are independent of iteration order and of how
// work is split across threads.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t stage,
                            std::string_view a, std::string_view b) noexcept {
  std::uint64_t h = splitmix64(seed ^ splitmix64(stage));
  h = splitmix64(h ^ fnv1a64(a));
  h = splitmix64(h ^ (fnv1a64(b) + 0x632be59bd9b4e019ULL));
  return to_unit(h);
}

// Sequential generator with portable draws (std distributions are not
// specified bit-for-bit across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return to_unit(engine_()); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace osmda::util
