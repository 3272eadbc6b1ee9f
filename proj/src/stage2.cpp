#include "traitscore/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "traitscore/metrics.hpp"
#include "traitscore/rng.hpp"

namespace traitscore {

std::string VariantSpec::name() const {
  if (family == TransferFamily::baseline) return "baseline";
  std::string s = family == TransferFamily::warm_start ? "warm" : "fusion";
  s += pair_set == PairSetSize::small ? "_small" : "_large";
  s += duration == StageDuration::standard ? "_std" : "_1ep";
  return s;
}

VariantSpec VariantSpec::parse(const std::string& name) {
  for (const VariantSpec& v : all())
    if (v.name() == name) return v;
  // Family-only shorthands keep their default axes; the caller labels them.
  if (name == "warm_start" || name == "warm")
    return {TransferFamily::warm_start, PairSetSize::small,
            StageDuration::standard};
  if (name == "fusion")
    return {TransferFamily::fusion, PairSetSize::small,
            StageDuration::standard};
  throw std::invalid_argument("unknown variant: " + name);
}

const std::vector<VariantSpec>& VariantSpec::all() {
  static const std::vector<VariantSpec> variants = [] {
    std::vector<VariantSpec> v;
    v.push_back({TransferFamily::baseline, PairSetSize::small,
                 StageDuration::standard});
    for (TransferFamily fam :
         {TransferFamily::warm_start, TransferFamily::fusion})
      for (PairSetSize size : {PairSetSize::small, PairSetSize::large})
        for (StageDuration dur :
             {StageDuration::standard, StageDuration::one_epoch})
          v.push_back({fam, size, dur});
    return v;
  }();
  return variants;
}

Stage2Model build_stage2(const VariantSpec& variant,
                         const Stage1Artifact* artifact, std::size_t feat_dim,
                         std::size_t trunk_dim, std::uint64_t run_seed) {
  if (variant.uses_artifact() && !artifact)
    throw std::invalid_argument("variant '" + variant.name() +
                                "' requires a stage-1 artifact");
  if (!variant.uses_artifact() && artifact)
    throw std::invalid_argument("baseline takes no stage-1 artifact");

  const std::uint64_t head_seed = derive_seed(run_seed, "stage2.head");
  Stage2Model m;
  switch (variant.family) {
    case TransferFamily::baseline:
      m.net.trunk = init_trunk(feat_dim, trunk_dim,
                               derive_seed(run_seed, "stage2.trunk"));
      m.net.head = init_regression(trunk_dim, head_seed);
      m.net.fusion = false;
      break;
    case TransferFamily::warm_start:
      m.net.trunk = artifact->model.trunk;
      m.net.head = init_regression(trunk_dim, head_seed);
      m.net.fusion = false;
      break;
    case TransferFamily::fusion:
      m.net.trunk = artifact->model.trunk;
      m.net.head = init_regression(2 * trunk_dim, head_seed);
      m.net.fusion = true;
      m.frozen = artifact->embeddings;
      break;
  }
  if (m.net.trunk.in_dim() != feat_dim || m.net.trunk.out_dim() != trunk_dim)
    throw std::invalid_argument("build_stage2: artifact trunk shape mismatch");
  return m;
}

std::map<std::string, std::vector<double>> compute_frozen_embeddings(
    const Stage1Artifact& artifact, const std::vector<std::string>& ids,
    const FeatureTable& features) {
  std::map<std::string, std::vector<double>> out;
  for (const std::string& id : ids) {
    auto it = artifact.embeddings.find(id);
    if (it != artifact.embeddings.end()) {
      out[id] = it->second;
      continue;
    }
    auto f = features.find(id);
    if (f == features.end())
      throw std::runtime_error("compute_frozen_embeddings: no features for " +
                               id);
    out[id] = trunk_forward(artifact.model.trunk, f->second);
  }
  return out;
}

namespace {

std::span<const double> frozen_of(const Stage2Model& m, const std::string& id) {
  auto it = m.frozen.find(id);
  if (it == m.frozen.end())
    throw std::runtime_error("fusion model: doc_id " + id +
                             " missing from the frozen embedding table");
  return it->second;
}

double predict_one(const Stage2Model& m, const std::string& id,
                   const FeatureTable& features, std::vector<double>& scratch1,
                   std::vector<double>& scratch2) {
  auto f = features.find(id);
  if (f == features.end())
    throw std::runtime_error("predict: no features for doc_id " + id);
  std::vector<double> h = trunk_forward(m.net.trunk, f->second);
  if (m.net.fusion) {
    const auto frozen = frozen_of(m, id);
    h.insert(h.end(), frozen.begin(), frozen.end());
  }
  return regression_forward(m.net.head, h, scratch1, scratch2);
}

}  // namespace

std::map<std::string, double> predict(const Stage2Model& model,
                                      const std::vector<std::string>& ids,
                                      const FeatureTable& features) {
  std::map<std::string, double> out;
  std::vector<double> s1, s2;
  for (const std::string& id : ids)
    out[id] = predict_one(model, id, features, s1, s2);
  return out;
}

double discretize(double pred, double clip_lo, double clip_hi) {
  if (clip_lo > clip_hi)
    throw std::invalid_argument("discretize: clip_lo > clip_hi");
  if (!on_half_grid(clip_lo) || !on_half_grid(clip_hi))
    throw std::invalid_argument("discretize: clip bounds must sit on the grid");
  const double clipped = std::clamp(pred, clip_lo, clip_hi);
  return std::clamp(snap_half_up(clipped), clip_lo, clip_hi);
}

std::vector<double> discretize(const std::vector<double>& preds,
                               double clip_lo, double clip_hi) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (double p : preds) out.push_back(discretize(p, clip_lo, clip_hi));
  return out;
}

Stage2TrainOutcome train_stage2(Stage2Model model,
                                const std::vector<LabeledExample>& train,
                                const std::vector<LabeledExample>& val,
                                const FeatureTable& features,
                                const Stage2Hyperparams& hp,
                                std::uint64_t run_seed) {
  if (train.empty()) throw std::invalid_argument("train_stage2: empty train set");
  if (val.empty()) throw std::invalid_argument("train_stage2: empty val set");

  std::set<double> distinct_val;
  for (const LabeledExample& e : val) distinct_val.insert(e.y);
  if (distinct_val.size() < 2)
    throw degenerate_input_error(
        "train_stage2: validation fold has a single distinct label; QWK is "
        "undefined for model selection");

  Stage2TrainOutcome out;
  out.clip_lo = train.front().y;
  out.clip_hi = train.front().y;
  for (const LabeledExample& e : train) {
    out.clip_lo = std::min(out.clip_lo, e.y);
    out.clip_hi = std::max(out.clip_hi, e.y);
  }

  const std::uint64_t shuffle_seed = derive_seed(run_seed, "stage2.shuffle");
  out.seeds.entries = {{"run", run_seed}, {"stage2.shuffle", shuffle_seed}};

  AbsoluteGrads grads = zeros_like(model.net);
  AdamWConfig opt_cfg;
  opt_cfg.lr = hp.lr;
  opt_cfg.weight_decay = hp.weight_decay;
  AdamWState opt(opt_cfg, param_views(model.net, grads));

  EarlyStopper<AbsoluteModel> stopper(hp.patience, hp.min_delta);
  Rng shuffle_rng(shuffle_seed);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const GridSpec grid{1.0, 5.0};
  std::vector<std::string> val_ids;
  std::vector<double> val_truth;
  for (const LabeledExample& e : val) {
    val_ids.push_back(e.doc_id);
    val_truth.push_back(e.y);
  }

  std::vector<AbsExample> batch;
  const std::size_t bs = static_cast<std::size_t>(hp.batch_size);
  static const std::vector<double> kNoFrozen;

  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(bs, order.size() - done);
      batch.clear();
      for (std::size_t i = 0; i < take; ++i) {
        const LabeledExample& e = train[order[done + i]];
        auto f = features.find(e.doc_id);
        if (f == features.end())
          throw std::runtime_error("train_stage2: no features for " + e.doc_id);
        batch.push_back({f->second,
                         model.net.fusion ? frozen_of(model, e.doc_id)
                                          : std::span<const double>(kNoFrozen),
                         e.y});
      }
      const double batch_loss = grad_absolute(model.net, batch, grads);
      loss_sum += batch_loss * static_cast<double>(take);
      opt.step(param_views(model.net, grads));
      done += take;
    }

    const auto val_pred = predict(model, val_ids, features);
    std::vector<double> pred_grid;
    pred_grid.reserve(val_ids.size());
    for (const std::string& id : val_ids)
      pred_grid.push_back(discretize(val_pred.at(id), out.clip_lo, out.clip_hi));
    const double val_qwk = qwk(val_truth, pred_grid, grid);

    out.history.push_back(
        {epoch, loss_sum / static_cast<double>(train.size()), val_qwk});
    if (!stopper.update(val_qwk, model.net, epoch)) break;
  }

  model.net = stopper.best_snapshot();
  out.model = std::move(model);
  out.val_qwk = stopper.best_metric();
  out.best_epoch = stopper.best_epoch();
  return out;
}

}  // namespace traitscore
