#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ogl {

/// Deterministic random source. All draws are defined purely in terms of the
/// mt19937_64 output stream, so identical seeds give identical sequences on
/// every platform and standard library (the std:: distributions make no such
/// guarantee and are avoided on purpose).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution. Never returns 1.0.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int_range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller (one value per call, second discarded).
  double normal();

  double exponential(double mean) ;

  /// Poisson count. Knuth product method; normal approximation for large
  /// lambda where the product would underflow.
  int poisson(double lambda);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

/// Seed fan-out: one master seed plus a component name (and optional indices)
/// yields an independent stream per component, so adding a consumer does not
/// perturb the draws seen by the others.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t a, std::uint64_t b = 0);

}  // namespace ogl
