#include "ogl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ogl {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x > limit);
  return x % n;
}

double Rng::normal() {
  // u1 in (0,1]: shift away from zero so log() is safe.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential(double mean) {
  if (mean <= 0.0) throw std::invalid_argument("exponential: mean must be positive");
  return -mean * std::log(1.0 - uniform01());
}

int Rng::poisson(double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be nonnegative");
  if (lambda == 0.0) return 0;
  if (lambda > 500.0) {
    double x = std::round(lambda + std::sqrt(lambda) * normal());
    return x < 0.0 ? 0 : static_cast<int>(x);
  }
  const double threshold = std::exp(-lambda);
  int k = 0;
  double prod = uniform01();
  while (prod > threshold) {
    ++k;
    prod *= uniform01();
  }
  return k;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
  return splitmix64(master ^ fnv1a64(component));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(component));
  h = splitmix64(h ^ splitmix64(a));
  return splitmix64(h ^ splitmix64(b ^ 0x5851f42d4c957f2dULL));
}

}  // namespace ogl
