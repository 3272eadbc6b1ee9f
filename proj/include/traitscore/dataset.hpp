#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace traitscore {

// One scorable text with per-trait labels on the 0.5 grid in [1, 5].
struct Document {
  std::string doc_id;
  std::string text;
  std::map<std::string, double> labels;  // trait -> score

  double label(const std::string& trait) const;  // throws if absent
};

struct Corpus {
  std::vector<Document> docs;  // unique doc_ids, stable order
  std::vector<std::string> trait_names;

  const Document& by_id(const std::string& doc_id) const;
  std::vector<std::string> ids() const;
};

// Fixed document-to-fold assignment.
struct FoldMap {
  std::map<std::string, std::string> assignment;  // doc_id -> fold label
  std::vector<std::string> fold_labels;           // ordered, e.g. A..E

  std::vector<std::string> ids_in_fold(const std::string& fold) const;
  std::vector<std::string> ids_not_in_fold(const std::string& fold) const;
};

// Document-level 80/10/10 partition of one run's training folds.
struct Stage1Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> pairtest_ids;
};

// Parameters behind a synthetic corpus, kept for test oracles.
struct SynthParams {
  std::vector<std::string> trait_names;
  std::vector<std::string> signal_tokens;  // one per trait
  double label_intercept = 1.0;
  double label_slope = 24.0;  // label = intercept + slope * token frequency
  double noise_sd = 0.0;
  int min_tokens = 40;
  int max_tokens = 80;
  int filler_vocab = 47;
};

// CSV with header: id column, text column, one column per requested trait.
// Defaults match the public distribution: text_id, full_text, <traits...>.
Corpus load_documents(const std::string& path,
                      const std::vector<std::string>& trait_names,
                      const std::string& id_column = "text_id",
                      const std::string& text_column = "full_text");

void save_documents(const std::string& path, const Corpus& corpus,
                    const std::string& id_column = "text_id",
                    const std::string& text_column = "full_text");

// Seeded shuffle + round-robin over fold labels A, B, C, ...
FoldMap make_fold_map(const std::vector<std::string>& doc_ids, int n_folds,
                      std::uint64_t seed);

void save_fold_map(const std::string& path, const FoldMap& map);
FoldMap load_fold_map(const std::string& path);

// Planted-score corpus: per trait, the label is an exact affine function of
// one signal token's realized frequency, plus optional Gaussian noise, then
// clipped to [1, 5] and snapped to the 0.5 grid.
std::pair<Corpus, SynthParams> synth_corpus(
    int n_docs, std::uint64_t seed, double noise_sd,
    const std::vector<std::string>& trait_names = {"grammar", "vocabulary",
                                                   "syntax"});

// Seeded shuffle then contiguous cut: val and pairtest get floor(N/10) each,
// train the remainder. Throws if fewer than 10 documents.
Stage1Split split_stage1(const std::vector<std::string>& training_fold_ids,
                         std::uint64_t seed);

}  // namespace traitscore
