// rng.hpp — deterministic seed derivation and samplers.
//
// Every randomized stage derives its own seed from (master seed, stage tag,
// unit index), so results are reproducible and independent of scheduling.
// Samplers are written out explicitly rather than taken from <random>
// distributions, whose algorithms are implementation-defined.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace ctrl::rng {

// splitmix64 finalizer
constexpr uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive(uint64_t seed, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return mix(seed ^ mix(h));
}

inline uint64_t derive(uint64_t seed, std::string_view tag, uint64_t index) {
  return mix(derive(seed, tag) + 0x9e3779b97f4a7c15ull * (index + 1));
}

inline uint64_t derive(uint64_t seed, std::string_view tag, std::string_view id) {
  return derive(derive(seed, tag), id);
}

inline uint64_t derive(uint64_t seed, std::string_view tag, std::string_view id, uint64_t index) {
  return derive(derive(seed, tag, id), "#", index);
}

class Engine {
public:
  explicit Engine(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    require(n > 0, errc::internal, "rng: below(0)");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // standard normal via Box-Muller (no cached second value)
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Marsaglia-Tsang gamma sampler
  double gamma(double shape, double scale) {
    require(shape > 0.0 && scale > 0.0, errc::invalid_argument, "rng: gamma requires positive shape and scale");
    if (shape < 1.0) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from {0, ..., n-1}, in draw order
  std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k) {
    require(k >= 0 && k <= n, errc::invalid_argument, "rng: sample size exceeds population");
    std::vector<int64_t> pool(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
      size_t j = static_cast<size_t>(below(static_cast<uint64_t>(n - i)));
      out.push_back(pool[j]);
      std::swap(pool[j], pool[static_cast<size_t>(n - i - 1)]);
    }
    return out;
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace ctrl::rng
