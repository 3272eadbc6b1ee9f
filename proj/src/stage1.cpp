#include "traitscore/stage1.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "traitscore/rng.hpp"
#include "traitscore/textio.hpp"

namespace traitscore {
namespace {

const FeatureVector& feat_of(const FeatureTable& features,
                             const std::string& id) {
  auto it = features.find(id);
  if (it == features.end())
    throw std::runtime_error("no features for doc_id " + id);
  return it->second;
}

struct Snapshot {
  PairwiseModel model;
  double val_loss = 0.0;
};

}  // namespace

double pair_accuracy(const PairwiseModel& m, const PairSet& pairs,
                     const FeatureTable& features) {
  if (pairs.pairs.empty())
    throw std::invalid_argument("pair_accuracy: empty pair set");
  std::size_t hits = 0;
  for (const Pair& p : pairs.pairs) {
    const auto h_a = trunk_forward(m.trunk, feat_of(features, p.a_id));
    const auto h_b = trunk_forward(m.trunk, feat_of(features, p.b_id));
    if (delta(m.head, h_a, h_b) > 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.pairs.size());
}

double mean_pair_loss(const PairwiseModel& m, const PairSet& pairs,
                      const FeatureTable& features) {
  if (pairs.pairs.empty())
    throw std::invalid_argument("mean_pair_loss: empty pair set");
  double sum = 0.0;
  for (const Pair& p : pairs.pairs) {
    const auto h_a = trunk_forward(m.trunk, feat_of(features, p.a_id));
    const auto h_b = trunk_forward(m.trunk, feat_of(features, p.b_id));
    sum += pairwise_loss(delta(m.head, h_a, h_b));
  }
  return sum / static_cast<double>(pairs.pairs.size());
}

Stage1Artifact train_stage1(const Stage1Inputs& in, const Stage1Hyperparams& hp,
                            std::uint64_t run_seed, std::size_t feat_dim,
                            std::size_t trunk_dim,
                            const PairwiseModel* initial) {
  if (!in.features) throw std::invalid_argument("train_stage1: no features");
  if (!in.train_pairs || in.train_pairs->pairs.empty())
    throw std::invalid_argument("train_stage1: empty train pair set");
  if (!in.val_pairs || in.val_pairs->pairs.empty())
    throw std::invalid_argument("train_stage1: empty validation pair set");
  if (hp.max_epochs < 1)
    throw std::invalid_argument("train_stage1: max_epochs must be >= 1");

  const std::uint64_t trunk_seed = derive_seed(run_seed, "stage1.trunk");
  const std::uint64_t head_seed = derive_seed(run_seed, "stage1.head");
  const std::uint64_t shuffle_seed = derive_seed(run_seed, "stage1.shuffle");

  Stage1Artifact art;
  art.seeds.entries = {{"run", run_seed},
                       {"stage1.trunk", trunk_seed},
                       {"stage1.head", head_seed},
                       {"stage1.shuffle", shuffle_seed}};

  PairwiseModel model;
  if (initial) {
    model = *initial;
  } else {
    model.trunk = init_trunk(feat_dim, trunk_dim, trunk_seed);
    model.head = init_utility(trunk_dim, head_seed);
  }

  PairwiseGrads grads = zeros_like(model);
  AdamWConfig opt_cfg;
  opt_cfg.lr = hp.lr;
  opt_cfg.weight_decay = hp.weight_decay;
  AdamWState opt(opt_cfg, param_views(model, grads));

  EarlyStopper<Snapshot> stopper(hp.patience, hp.min_delta);
  Rng shuffle_rng(shuffle_seed);

  const std::vector<Pair>& train = in.train_pairs->pairs;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<PairExample> batch;
  const std::size_t bs = static_cast<std::size_t>(hp.batch_size);

  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(bs, order.size() - done);
      batch.clear();
      for (std::size_t i = 0; i < take; ++i) {
        const Pair& p = train[order[done + i]];
        batch.push_back(
            {feat_of(*in.features, p.a_id), feat_of(*in.features, p.b_id)});
      }
      const double batch_loss = grad_pairwise(model, batch, grads);
      loss_sum += batch_loss * static_cast<double>(take);
      opt.step(param_views(model, grads));
      done += take;
    }

    Stage1EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.val_acc = pair_accuracy(model, *in.val_pairs, *in.features);
    art.history.push_back(stats);

    const double val_loss = mean_pair_loss(model, *in.val_pairs, *in.features);
    if (!stopper.update(stats.val_acc, Snapshot{model, val_loss}, epoch)) break;
  }

  art.model = stopper.best_snapshot().model;
  art.diagnostics.val_acc = stopper.best_metric();
  art.diagnostics.val_loss = stopper.best_snapshot().val_loss;
  art.diagnostics.best_epoch = stopper.best_epoch();
  if (in.pairtest_pairs && !in.pairtest_pairs->pairs.empty()) {
    art.diagnostics.pairtest_acc =
        pair_accuracy(art.model, *in.pairtest_pairs, *in.features);
    art.diagnostics.pairtest_loss =
        mean_pair_loss(art.model, *in.pairtest_pairs, *in.features);
  }

  std::vector<std::string> embed_ids = in.embed_ids;
  std::sort(embed_ids.begin(), embed_ids.end());
  for (const std::string& id : embed_ids)
    art.embeddings[id] = trunk_forward(art.model.trunk, feat_of(*in.features, id));
  return art;
}

void save_stage1_artifact(const std::string& dir, const Stage1Artifact& a) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_pairwise_checkpoint(dir + "/checkpoint.bin", a.model, a.seeds);

  std::ostringstream emb;
  for (const auto& [id, e] : a.embeddings) {
    emb << csv_escape(id);
    for (double v : e) emb << '\t' << fmt_double(v);
    emb << '\n';
  }
  write_text_file(dir + "/embeddings.tsv", emb.str());

  std::ostringstream hist;
  hist << "epoch\ttrain_loss\tval_acc\n";
  for (const Stage1EpochStats& s : a.history)
    hist << s.epoch << '\t' << fmt_double(s.train_loss) << '\t'
         << fmt_double(s.val_acc) << '\n';
  write_text_file(dir + "/history.tsv", hist.str());

  std::ostringstream diag;
  diag << "val_acc = " << fmt_double(a.diagnostics.val_acc) << '\n'
       << "val_loss = " << fmt_double(a.diagnostics.val_loss) << '\n'
       << "pairtest_acc = " << fmt_double(a.diagnostics.pairtest_acc) << '\n'
       << "pairtest_loss = " << fmt_double(a.diagnostics.pairtest_loss) << '\n'
       << "best_epoch = " << a.diagnostics.best_epoch << '\n';
  write_text_file(dir + "/diagnostics.txt", diag.str());
}

Stage1Artifact load_stage1_artifact(const std::string& dir) {
  Stage1Artifact a;
  a.model = load_pairwise_checkpoint(dir + "/checkpoint.bin", &a.seeds);

  for (const std::string& line : split(read_text_file(dir + "/embeddings.tsv"), '\n')) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() < 2)
      throw std::runtime_error("artifact " + dir + ": bad embeddings row");
    std::vector<double> e;
    e.reserve(cols.size() - 1);
    for (std::size_t i = 1; i < cols.size(); ++i)
      e.push_back(parse_double(cols[i]));
    a.embeddings[cols[0]] = std::move(e);
  }

  const auto hist_lines = split(read_text_file(dir + "/history.tsv"), '\n');
  for (std::size_t i = 1; i < hist_lines.size(); ++i) {
    if (hist_lines[i].empty()) continue;
    const auto cols = split(hist_lines[i], '\t');
    if (cols.size() != 3)
      throw std::runtime_error("artifact " + dir + ": bad history row");
    a.history.push_back({static_cast<int>(parse_int(cols[0])),
                         parse_double(cols[1]), parse_double(cols[2])});
  }

  const auto kv = parse_key_values(read_text_file(dir + "/diagnostics.txt"));
  a.diagnostics.val_acc = parse_double(kv.at("val_acc"));
  a.diagnostics.val_loss = parse_double(kv.at("val_loss"));
  a.diagnostics.pairtest_acc = parse_double(kv.at("pairtest_acc"));
  a.diagnostics.pairtest_loss = parse_double(kv.at("pairtest_loss"));
  a.diagnostics.best_epoch = static_cast<int>(parse_int(kv.at("best_epoch")));
  return a;
}

}  // namespace traitscore
