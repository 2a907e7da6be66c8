#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace g2p2 {

// Deterministic random source. All distributions are implemented on top of
// the raw mt19937_64 stream so that sequences are reproducible across
// standard-library implementations, not just across runs.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled so every value is equally likely.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t rem = (0 - un) % un;  // 2^64 mod n
    const std::uint64_t bound = 0 - rem;
    std::uint64_t r = gen_();
    while (r >= bound && rem != 0) r = gen_();
    return static_cast<std::size_t>(r % un);
  }

  // Box-Muller; the paired value is cached.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Normal resampled until |z| <= 2 sigma.
  double truncated_normal(double mean, double stddev) {
    double z = normal();
    while (std::fabs(z) > 2.0) z = normal();
    return mean + stddev * z;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct elements drawn uniformly from pool, in draw order.
  // Returns the whole pool (copied) when k >= pool size.
  template <class T>
  std::vector<T> sample_without_replacement(const std::vector<T>& pool, std::size_t k) {
    std::vector<T> items(pool);
    if (k >= items.size()) return items;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(items.size() - i);
      std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
  }

private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace g2p2
