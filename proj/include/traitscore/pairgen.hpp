#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace traitscore {

struct GapBucket {
  std::string name;  // e.g. ">=3", "2-3", "1-2"
  double lo;         // inclusive
  double hi;         // exclusive; infinity for the open top bucket
};

struct PairPolicy {
  double min_gap = 1.0;
  double usage_target = 5.0;  // mean comparisons per document
  std::vector<GapBucket> buckets;  // sampled round-robin in this order
  double subsample_fraction = 1.0;  // (0, 1]; the smaller setting uses 0.5

  static PairPolicy defaults();
  void validate() const;
  // Matching bucket name for a gap, or "none" when no bucket covers it.
  std::string bucket_of(double gap) const;
};

// One ordered comparison; a carries the higher label.
struct Pair {
  std::string a_id;
  std::string b_id;
  double gap = 0.0;          // y_a - y_b, always >= 0
  std::string bucket;        // bucket name or "fallback"
  bool is_fallback = false;
};

struct PairSet {
  std::vector<Pair> pairs;
  std::vector<std::string> uncovered;  // docs with no positive-gap partner
  bool shortfall = false;  // fill phase ran out of admissible pairs
  std::vector<std::string> participating_ids;  // post-subsample doc universe
};

struct PairReport {
  std::vector<std::string> violations;
  std::map<std::string, int> usage;         // doc -> comparison count
  std::map<std::string, int> bucket_counts; // bucket name -> pairs
  int fallback_count = 0;
  int uncovered_count = 0;
};

using LabeledDoc = std::pair<std::string, double>;  // (doc_id, label)

// Two-phase construction: a greedy coverage pass so every document that can
// be paired participates at least once, then bucket-stratified sampling until
// ceil(usage_target * n / 2) pairs exist, relaxing the per-doc usage cap when
// the capped universe is exhausted. Deterministic per (docs, policy, seed).
PairSet generate_pairs(const std::vector<LabeledDoc>& docs,
                       const PairPolicy& policy, std::uint64_t seed);

PairReport validate_pairs(const PairSet& pairs,
                          const std::vector<LabeledDoc>& docs,
                          const PairPolicy& policy);

struct PairCacheMeta {
  std::string trait;
  std::uint64_t run_seed = 0;
  std::string source_split;  // train | val | pairtest
  PairPolicy policy;
};

// One record per line plus a '#'-prefixed metadata header tracing how the
// cache was constructed.
void save_pair_cache(const std::string& path, const PairSet& set,
                     const PairCacheMeta& meta);
PairSet load_pair_cache(const std::string& path, PairCacheMeta* meta = nullptr);

}  // namespace traitscore
