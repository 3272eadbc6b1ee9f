#include "traitscore/features.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "traitscore/kernels.hpp"

namespace traitscore {
namespace {

// The one pinned string hash: FNV-1a 64 seeded by mixing hash_seed into the
// offset basis. Bucket from the low bits, sign from the top bit.
std::uint64_t hash_bytes(std::string_view s, std::uint64_t seed, char tag) {
  std::uint64_t h = 14695981039346656037ULL ^
                    (seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
  h ^= static_cast<unsigned char>(tag);
  h *= 1099511628211ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void bump(FeatureVector& v, std::uint64_t h) {
  const std::size_t bucket = h % v.size();
  v[bucket] += (h >> 63) ? -1.0 : 1.0;
}

}  // namespace

void FeatureConfig::validate() const {
  if (dim < 8) throw std::invalid_argument("features: dim must be >= 8");
  if (char_ngram < 2)
    throw std::invalid_argument("features: char_ngram must be >= 2");
}

FeatureVector featurize(std::string_view text, const FeatureConfig& cfg) {
  cfg.validate();
  FeatureVector v(static_cast<std::size_t>(cfg.dim), 0.0);
  if (text.empty()) return v;

  std::string lower(text);
  for (char& c : lower)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  const std::size_t n = static_cast<std::size_t>(cfg.char_ngram);
  if (lower.size() >= n) {
    for (std::size_t i = 0; i + n <= lower.size(); ++i)
      bump(v, hash_bytes(std::string_view(lower).substr(i, n), cfg.hash_seed,
                         'c'));
  }

  if (cfg.use_word_unigrams) {
    std::size_t start = std::string::npos;
    for (std::size_t i = 0; i <= lower.size(); ++i) {
      const bool is_space =
          i == lower.size() ||
          std::isspace(static_cast<unsigned char>(lower[i]));
      if (!is_space && start == std::string::npos) start = i;
      if (is_space && start != std::string::npos) {
        bump(v, hash_bytes(std::string_view(lower).substr(start, i - start),
                           cfg.hash_seed, 'w'));
        start = std::string::npos;
      }
    }
  }

  const double norm_sq = kern::active().dot(v.data(), v.data(), v.size());
  if (norm_sq > 0.0)
    kern::active().scale(v.data(), 1.0 / std::sqrt(norm_sq), v.size());
  return v;
}

}  // namespace traitscore
