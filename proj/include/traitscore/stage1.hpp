#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "traitscore/features.hpp"
#include "traitscore/net.hpp"
#include "traitscore/pairgen.hpp"

namespace traitscore {

using FeatureTable = std::map<std::string, FeatureVector>;

struct Stage1Hyperparams {
  double lr = 2e-4;
  double weight_decay = 0.01;
  int batch_size = 4;
  int max_epochs = 10;  // 1 in the one-epoch setting
  int patience = 3;
  double min_delta = 5e-4;
};

struct Stage1EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct Stage1Diagnostics {
  double val_acc = 0.0;   // at the selected epoch
  double val_loss = 0.0;  // at the selected epoch
  double pairtest_acc = 0.0;
  double pairtest_loss = 0.0;
  int best_epoch = 0;  // 1-based
};

// Everything Stage 2 consumes: the validation-selected ranker, frozen
// per-document embeddings computed with exactly that trunk, and diagnostics.
struct Stage1Artifact {
  PairwiseModel model;
  std::map<std::string, std::vector<double>> embeddings;
  std::vector<Stage1EpochStats> history;
  Stage1Diagnostics diagnostics;
  SeedLineage seeds;
};

struct Stage1Inputs {
  const FeatureTable* features = nullptr;   // covers every referenced doc
  std::vector<std::string> embed_ids;       // docs to embed after selection
  const PairSet* train_pairs = nullptr;
  const PairSet* val_pairs = nullptr;
  const PairSet* pairtest_pairs = nullptr;  // optional
};

// Fraction of pairs scored strictly positive in canonical orientation.
double pair_accuracy(const PairwiseModel& m, const PairSet& pairs,
                     const FeatureTable& features);

double mean_pair_loss(const PairwiseModel& m, const PairSet& pairs,
                      const FeatureTable& features);

// Minibatch AdamW with per-epoch seeded shuffles and validation-accuracy
// early stopping; restores the best snapshot before computing pair-test
// metrics and embeddings. `initial` overrides the seeded init when given.
Stage1Artifact train_stage1(const Stage1Inputs& in, const Stage1Hyperparams& hp,
                            std::uint64_t run_seed, std::size_t feat_dim,
                            std::size_t trunk_dim,
                            const PairwiseModel* initial = nullptr);

void save_stage1_artifact(const std::string& dir, const Stage1Artifact& a);
Stage1Artifact load_stage1_artifact(const std::string& dir);

}  // namespace traitscore
