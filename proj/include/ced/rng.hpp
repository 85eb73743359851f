#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ced::rng {

// Seeded RNG with hand-rolled distribution adapters. mt19937_64's raw output
// sequence is pinned by the standard; the std:: distributions are not, so we
// avoid them to keep seeded runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1) with 53 random bits
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // uniform integer in [0, n), rejection-sampled to avoid modulo bias
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return next_unit() < p; }

  // Knuth's product-of-uniforms method; fine for the desk-scale lambdas here
  std::size_t poisson(double lambda) {
    const double l = std::exp(-lambda);
    std::size_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_unit();
    } while (p > l);
    return k - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ced::rng
