#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace traitscore {

// All randomness in the pipeline flows through this engine. std::mt19937_64
// is standard-defined, but the std distributions and std::shuffle are not,
// so the draws below are pinned by hand to keep every output byte-stable
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased draw from [0, n) via modulo rejection.
  std::uint64_t uniform_index(std::uint64_t n);

  // [0, 1) with 53 random bits.
  double uniform_real();

  // Uniform on [lo, hi).
  double uniform_real(double lo, double hi);

  // Box-Muller, cosine branch only (two draws consumed per call).
  double normal(double mean, double sd);

  // Fisher-Yates, high index down.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Child seed for an isolated random stream, keyed by a purpose tag.
// Distinct tags give independent streams from one run-level seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace traitscore
