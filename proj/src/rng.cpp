#include "traitscore/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace traitscore {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n < 2) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (n - 1);
  for (;;) {
    const std::uint64_t x = next_u64();
    const std::uint64_t r = x % n;
    if (x - r <= limit) return r;
  }
}

double Rng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_real(double lo, double hi) {
  return lo + (hi - lo) * uniform_real();
}

double Rng::normal(double mean, double sd) {
  double u1 = uniform_real();
  const double u2 = uniform_real();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 14695981039346656037ULL;  // FNV-1a 64
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(base ^ h);
}

}  // namespace traitscore
