#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "traitscore/dataset.hpp"
#include "traitscore/features.hpp"
#include "traitscore/pairgen.hpp"
#include "traitscore/stage1.hpp"
#include "traitscore/stage2.hpp"

namespace traitscore {

// The full experiment description; every run is a pure function of this.
struct ProtocolConfig {
  std::vector<std::string> traits = {"grammar", "vocabulary", "syntax"};
  // Ordered held-out-fold -> seed co-rotation map.
  std::vector<std::pair<std::string, std::uint64_t>> fold_seeds = {
      {"A", 42}, {"B", 48}, {"C", 54}, {"D", 60}, {"E", 36}};
  std::vector<VariantSpec> variants = VariantSpec::all();

  FeatureConfig features;
  std::size_t trunk_dim = 64;
  Stage1Hyperparams stage1;
  Stage2Hyperparams stage2;
  PairPolicy pair_policy = PairPolicy::defaults();  // the large setting
  double small_fraction = 0.5;  // subsample for the small pair set

  std::string documents_path;
  std::string fold_map_path;
  std::string out_dir;

  std::uint64_t seed_for_fold(const std::string& fold) const;

  // Canonical text form. Paths are excluded from the semantic hash so the
  // same experiment in a different directory resumes cleanly.
  std::string to_text(bool include_paths) const;
  std::string semantic_hash() const;

  static ProtocolConfig from_text(std::string_view text);
  static ProtocolConfig from_file(const std::string& path);
};

// One (trait, fold, variant) outcome; stage-1 diagnostics are absent for the
// baseline.
struct RunRecord {
  std::string trait;
  std::string fold;
  std::uint64_t seed = 0;
  VariantSpec variant;
  double test_qwk = 0.0;
  double val_qwk = 0.0;
  int best_epoch = 0;
  bool has_stage1 = false;
  double s1_val_acc = 0.0;
  double s1_val_loss = 0.0;
  double s1_pairtest_acc = 0.0;
  double s1_pairtest_loss = 0.0;
  int s1_best_epoch = 0;
  std::string artifact_id;
};

struct ResultTable {
  std::vector<RunRecord> records;

  const RunRecord* find(const std::string& trait, const std::string& fold,
                        const std::string& variant) const;
  const RunRecord& at(const std::string& trait, const std::string& fold,
                      const std::string& variant) const;  // throws if absent
};

void save_results(const std::string& path, const ResultTable& table,
                  const std::string& config_hash);
ResultTable load_results(const std::string& path,
                         std::string* config_hash = nullptr);

// ---- orchestration ----

struct MatrixOptions {
  int jobs = 1;
  bool quiet = false;
};

// Runs every (trait, fold, variant) cell that is not already recorded in
// out_dir/results.tsv: per (trait, fold) this derives the co-rotated seed,
// builds the document split, generates/reuses pair caches, trains the four
// stage-1 artifacts, then trains and evaluates all variants on the held-out
// fold. Record order in the results file is canonical regardless of --jobs.
ResultTable run_matrix(const ProtocolConfig& cfg, const Corpus& corpus,
                       const FoldMap& folds, const MatrixOptions& opts = {});

// ---- aggregate analyses ----

struct VariantSummary {
  double min = 0.0;
  double max = 0.0;
  double std_pop = 0.0;  // population std over the trait-fold runs
};

struct TraitMeansResult {
  // mean QWK across folds, keyed (trait, variant name)
  std::map<std::pair<std::string, std::string>, double> mean;
  std::map<std::string, VariantSummary> per_variant;  // over all runs
  // Best transfer variant selected per (trait, fold) row.
  VariantSummary best_transfer;
  double best_transfer_mean_gain = 0.0;  // mean(best transfer - baseline)
  int best_transfer_wins = 0;            // rows where best transfer > baseline
};

TraitMeansResult trait_means(const ResultTable& table,
                             const ProtocolConfig& cfg);

struct BestVariantFreq {
  std::map<std::string, int> counts;  // variant name -> times best
  // All co-winners per (trait, fold) row, for transparency on ties.
  std::vector<std::tuple<std::string, std::string, std::vector<std::string>>>
      row_winners;
};

// Row maxima over the variant axis; exact ties are assigned to exactly one
// variant by the pinned precedence (baseline first, then canonical order).
BestVariantFreq best_variant_freq(const ResultTable& table,
                                  const ProtocolConfig& cfg);

enum class VaryAxis { duration, pair_set };

struct PairedComparisonResult {
  double mean_delta = 0.0;  // first condition minus second
  int wins = 0;             // first condition strictly higher
  int ties = 0;             // exactly equal test QWK
  int losses = 0;
  int n = 0;
};

// vary = duration: one-epoch vs standard at fixed (family, pair_set).
// vary = pair_set: large vs small at fixed (family, duration).
PairedComparisonResult paired_comparison(const ResultTable& table,
                                         const ProtocolConfig& cfg,
                                         VaryAxis vary, TransferFamily family,
                                         PairSetSize fixed_size,
                                         StageDuration fixed_duration);

enum class Stage1Diag { pairtest_acc, val_acc, val_loss, best_epoch };

struct CorrelationResult {
  double pearson = 0.0;
  double spearman = 0.0;
  int n = 0;
};

// Association between a stage-1 diagnostic and stage-2 test QWK over the
// transfer-setting records; trait empty means overall scope.
CorrelationResult stage1_stage2_correlation(const ResultTable& table,
                                            Stage1Diag diagnostic,
                                            const std::string& trait = "");

std::string diag_name(Stage1Diag d);
Stage1Diag parse_diag(const std::string& name);

}  // namespace traitscore
