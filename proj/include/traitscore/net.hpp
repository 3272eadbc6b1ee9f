#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace traitscore {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

// Shared encoder: embedding = ReLU(W^T x + b), projecting feature space
// (rows of W) down to the trunk width (cols of W).
struct TrunkWeights {
  Matrix W;               // in_dim x out_dim
  std::vector<double> b;  // out_dim

  std::size_t in_dim() const { return W.rows; }
  std::size_t out_dim() const { return W.cols; }
};

// Bias-free by construction: there is no bias field to learn, which is what
// guarantees delta(a,b) = -delta(b,a) exactly.
struct UtilityHead {
  std::vector<double> u;
};

// 2-layer ReLU MLP with hidden size floor(d_in/2), scalar output.
struct RegressionHead {
  Matrix W1;               // d_in x hidden
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  std::size_t in_dim() const { return W1.rows; }
  std::size_t hidden_dim() const { return W1.cols; }
};

struct PairwiseModel {
  TrunkWeights trunk;
  UtilityHead head;
};

// fusion: the head consumes [trunk output || frozen stage-1 embedding]; the
// frozen half receives no gradient.
struct AbsoluteModel {
  TrunkWeights trunk;
  RegressionHead head;
  bool fusion = false;
};

// ---- forward pieces ----

void trunk_forward(const TrunkWeights& t, std::span<const double> x,
                   std::vector<double>& preact, std::vector<double>& h);
std::vector<double> trunk_forward(const TrunkWeights& t,
                                  std::span<const double> x);

double delta(const UtilityHead& head, std::span<const double> h_a,
             std::span<const double> h_b);

// log(1 + exp(-d)), evaluated as max(0,-d) + log1p(exp(-|d|)).
double pairwise_loss(double d);
// dL/dd = -sigmoid(-d), overflow-free on both tails.
double pairwise_loss_ddelta(double d);

double l1_loss(double pred, double y);

// Head forward for an already-assembled head input (trunk output, with the
// frozen embedding concatenated when fusing).
double regression_forward(const RegressionHead& head,
                          std::span<const double> head_in,
                          std::vector<double>& z1, std::vector<double>& hid);

// ---- batches and gradients ----

struct PairExample {
  std::span<const double> x_a;  // canonical order: a carries the higher label
  std::span<const double> x_b;
};

struct AbsExample {
  std::span<const double> x;
  std::span<const double> frozen;  // empty unless the model fuses
  double y = 0.0;
};

struct PairwiseGrads {
  TrunkWeights trunk;  // same shapes, holding gradients
  UtilityHead head;
};

struct AbsoluteGrads {
  TrunkWeights trunk;
  RegressionHead head;
};

PairwiseGrads zeros_like(const PairwiseModel& m);
AbsoluteGrads zeros_like(const AbsoluteModel& m);

// Mean-reduced exact gradients over the batch; returns the mean loss. The
// shared trunk accumulates contributions from both branches of each pair.
double grad_pairwise(const PairwiseModel& m, std::span<const PairExample> batch,
                     PairwiseGrads& out);

// Mean-reduced exact L1 subgradients (0 at pred == y). Frozen embedding
// inputs receive no gradient by construction.
double grad_absolute(const AbsoluteModel& m, std::span<const AbsExample> batch,
                     AbsoluteGrads& out);

// ---- optimizer ----

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One trainable array and its gradient; decay is off for bias vectors.
struct ParamView {
  double* p;
  const double* g;
  std::size_t n;
  bool decay;
};

std::vector<ParamView> param_views(PairwiseModel& m, const PairwiseGrads& g);
std::vector<ParamView> param_views(AbsoluteModel& m, const AbsoluteGrads& g);

class AdamWState {
 public:
  AdamWState(AdamWConfig cfg, const std::vector<ParamView>& shapes);

  // Decoupled weight decay, bias-corrected moments.
  void step(const std::vector<ParamView>& params);

  std::uint64_t steps_taken() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// ---- gradient checking ----

// Central finite differences over every parameter against the analytic
// gradient already stored in `params`; returns the worst relative error.
// loss_fn must re-evaluate the batch loss at the current parameter values.
double grad_check(const std::vector<ParamView>& params,
                  const std::function<double()>& loss_fn, double epsilon);

double grad_check_pairwise(PairwiseModel& m, std::span<const PairExample> batch,
                           double epsilon);
double grad_check_absolute(AbsoluteModel& m, std::span<const AbsExample> batch,
                           double epsilon);

// ---- early stopping ----

// Maximizes the monitored metric. Improvement means metric > best + min_delta
// (strict); the stored snapshot always matches the best recorded value.
template <typename Snapshot>
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  // Returns false once the non-improvement streak exceeds patience.
  bool update(double metric, const Snapshot& snapshot, int epoch) {
    if (!has_best_ || metric > best_ + min_delta_) {
      best_ = metric;
      best_snapshot_ = snapshot;
      best_epoch_ = epoch;
      has_best_ = true;
      streak_ = 0;
      return true;
    }
    ++streak_;
    return streak_ <= patience_;
  }

  bool has_best() const { return has_best_; }
  double best_metric() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  const Snapshot& best_snapshot() const { return best_snapshot_; }

 private:
  int patience_;
  double min_delta_;
  bool has_best_ = false;
  double best_ = 0.0;
  int best_epoch_ = -1;
  int streak_ = 0;
  Snapshot best_snapshot_{};
};

// ---- initialization ----

// Seeded uniform in +-sqrt(6/(fan_in+fan_out)); biases and moments start at
// zero. Weight vectors count as single-column matrices.
Matrix init_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);
std::vector<double> init_weight_vector(std::size_t n, std::uint64_t seed);

TrunkWeights init_trunk(std::size_t in_dim, std::size_t out_dim,
                        std::uint64_t seed);
UtilityHead init_utility(std::size_t d, std::uint64_t seed);
RegressionHead init_regression(std::size_t d_in, std::uint64_t seed);

// ---- checkpoint I/O (versioned binary, bit-exact round trip) ----

struct SeedLineage {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
};

void save_pairwise_checkpoint(const std::string& path, const PairwiseModel& m,
                              const SeedLineage& seeds);
PairwiseModel load_pairwise_checkpoint(const std::string& path,
                                       SeedLineage* seeds = nullptr);

void save_absolute_checkpoint(const std::string& path, const AbsoluteModel& m,
                              const SeedLineage& seeds);
AbsoluteModel load_absolute_checkpoint(const std::string& path,
                                       SeedLineage* seeds = nullptr);

}  // namespace traitscore
