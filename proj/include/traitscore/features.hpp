#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace traitscore {

struct FeatureConfig {
  int dim = 256;
  int char_ngram = 3;
  bool use_word_unigrams = true;
  std::uint64_t hash_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

using FeatureVector = std::vector<double>;

// Lowercased character n-grams plus (optionally) word unigrams, signed-hashed
// into cfg.dim buckets, then L2-normalized. Empty or feature-free text maps
// to the zero vector. Pure function of (text, cfg).
FeatureVector featurize(std::string_view text, const FeatureConfig& cfg);

}  // namespace traitscore
