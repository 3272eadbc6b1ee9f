#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traitscore/net.hpp"
#include "traitscore/stage1.hpp"

namespace traitscore {

enum class TransferFamily { baseline, warm_start, fusion };
enum class PairSetSize { small, large };
enum class StageDuration { standard, one_epoch };

// One of the 9 evaluated settings: the absolute-only baseline plus the
// 2x2x2 factorial of family x pair-set size x pairwise-stage duration.
struct VariantSpec {
  TransferFamily family = TransferFamily::baseline;
  PairSetSize pair_set = PairSetSize::small;    // ignored for baseline
  StageDuration duration = StageDuration::standard;  // ignored for baseline

  std::string name() const;
  bool uses_artifact() const { return family != TransferFamily::baseline; }

  static VariantSpec parse(const std::string& name);
  // Canonical order: baseline, then warm-start rows, then fusion rows,
  // each family ordered small/std, small/1ep, large/std, large/1ep.
  static const std::vector<VariantSpec>& all();

  bool operator==(const VariantSpec&) const = default;
};

struct Stage2Hyperparams {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 4;
  int max_epochs = 15;
  int patience = 4;
  double min_delta = 5e-4;
};

// The trainable scorer plus, when fusing, the frozen embedding table the
// forward pass looks up. The table never receives gradient.
struct Stage2Model {
  AbsoluteModel net;
  std::map<std::string, std::vector<double>> frozen;
};

struct LabeledExample {
  std::string doc_id;
  double y = 0.0;
};

struct Stage2EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_qwk = 0.0;
};

struct Stage2TrainOutcome {
  Stage2Model model;  // validation-selected
  double val_qwk = 0.0;
  int best_epoch = 0;
  double clip_lo = 1.0;  // observed training-label range
  double clip_hi = 5.0;
  std::vector<Stage2EpochStats> history;
  SeedLineage seeds;
};

// baseline: fresh seeded trunk + fresh head (input width d).
// warm_start: trunk copied from the artifact, fresh head (width d).
// fusion: warm-start trunk, fresh head (width 2d), frozen table from the
// artifact embeddings. The head init stream does not depend on the family,
// so baseline and warm-start differ only in the trunk values.
Stage2Model build_stage2(const VariantSpec& variant,
                         const Stage1Artifact* artifact, std::size_t feat_dim,
                         std::size_t trunk_dim, std::uint64_t run_seed);

// Frozen embeddings for ids outside the artifact table, computed with the
// artifact's selected trunk (documents get their embedding once, at the
// start of the absolute stage).
std::map<std::string, std::vector<double>> compute_frozen_embeddings(
    const Stage1Artifact& artifact, const std::vector<std::string>& ids,
    const FeatureTable& features);

// L1 minibatch training with validation-QWK early stopping. Throws
// degenerate_input_error when the validation fold has a single distinct
// label (QWK undefined there).
Stage2TrainOutcome train_stage2(Stage2Model model,
                                const std::vector<LabeledExample>& train,
                                const std::vector<LabeledExample>& val,
                                const FeatureTable& features,
                                const Stage2Hyperparams& hp,
                                std::uint64_t run_seed);

// Deterministic forward pass; fusion looks up the frozen table and throws
// naming any missing doc_id.
std::map<std::string, double> predict(const Stage2Model& model,
                                      const std::vector<std::string>& ids,
                                      const FeatureTable& features);

// Clamp to [clip_lo, clip_hi], round to the nearest 0.5 step (half-up at
// exact midpoints), and re-clamp.
double discretize(double pred, double clip_lo, double clip_hi);
std::vector<double> discretize(const std::vector<double>& preds,
                               double clip_lo, double clip_hi);

}  // namespace traitscore
