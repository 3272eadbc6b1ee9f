#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "traitscore/metrics.hpp"
#include "traitscore/protocol.hpp"
#include "traitscore/rng.hpp"
#include "traitscore/textio.hpp"

namespace traitscore {
namespace {

namespace fs = std::filesystem;

const char* size_name(PairSetSize s) {
  return s == PairSetSize::small ? "small" : "large";
}
const char* dur_name(StageDuration d) {
  return d == StageDuration::standard ? "std" : "1ep";
}

struct SplitPairs {
  PairSet train;
  PairSet val;
  PairSet pairtest;
};

struct MatrixContext {
  const ProtocolConfig* cfg;
  const Corpus* corpus;
  const FoldMap* folds;
  FeatureTable features;
  // trait -> doc_id -> label
  std::map<std::string, std::map<std::string, double>> labels;
  std::set<std::string> have;  // "trait|fold|variant" already recorded
};

std::string record_key(const std::string& trait, const std::string& fold,
                       const std::string& variant) {
  return trait + "|" + fold + "|" + variant;
}

PairPolicy policy_for(const ProtocolConfig& cfg, PairSetSize size) {
  PairPolicy p = cfg.pair_policy;
  p.subsample_fraction = size == PairSetSize::small ? cfg.small_fraction : 1.0;
  return p;
}

PairSet ensure_pair_cache(const MatrixContext& ctx, const std::string& trait,
                          const std::string& fold, PairSetSize size,
                          const std::string& part,
                          const std::vector<std::string>& part_ids,
                          std::uint64_t run_seed) {
  const fs::path dir = fs::path(ctx.cfg->out_dir) / "pairs" / trait / fold /
                       size_name(size);
  fs::create_directories(dir);
  const fs::path path = dir / (part + ".pairs");
  if (fs::exists(path)) return load_pair_cache(path.string());

  const auto& trait_labels = ctx.labels.at(trait);
  std::vector<LabeledDoc> docs;
  docs.reserve(part_ids.size());
  for (const std::string& id : part_ids)
    docs.push_back({id, trait_labels.at(id)});

  const PairPolicy policy = policy_for(*ctx.cfg, size);
  const std::uint64_t seed = derive_seed(
      run_seed, "pairs|trait=" + trait + "|split=" + part + "|size=" +
                    size_name(size));
  PairSet set = generate_pairs(docs, policy, seed);
  PairCacheMeta meta{trait, run_seed, part, policy};
  save_pair_cache(path.string(), set, meta);
  return set;
}

Stage1Artifact ensure_artifact(const MatrixContext& ctx,
                               const std::string& trait,
                               const std::string& fold, PairSetSize size,
                               StageDuration dur, const Stage1Split& split,
                               const std::vector<std::string>& train_fold_ids,
                               std::uint64_t run_seed) {
  const fs::path dir = fs::path(ctx.cfg->out_dir) / "stage1" / trait / fold /
                       (std::string(size_name(size)) + "_" + dur_name(dur));
  if (fs::exists(dir / "checkpoint.bin"))
    return load_stage1_artifact(dir.string());

  SplitPairs pairs;
  pairs.train =
      ensure_pair_cache(ctx, trait, fold, size, "train", split.train_ids,
                        run_seed);
  pairs.val =
      ensure_pair_cache(ctx, trait, fold, size, "val", split.val_ids, run_seed);
  pairs.pairtest = ensure_pair_cache(ctx, trait, fold, size, "pairtest",
                                     split.pairtest_ids, run_seed);

  Stage1Hyperparams hp = ctx.cfg->stage1;
  if (dur == StageDuration::one_epoch) hp.max_epochs = 1;

  Stage1Inputs in;
  in.features = &ctx.features;
  in.embed_ids = train_fold_ids;
  in.train_pairs = &pairs.train;
  in.val_pairs = &pairs.val;
  in.pairtest_pairs = &pairs.pairtest;

  Stage1Artifact art =
      train_stage1(in, hp, run_seed, static_cast<std::size_t>(ctx.cfg->features.dim),
                   ctx.cfg->trunk_dim);
  save_stage1_artifact(dir.string(), art);
  return art;
}

std::vector<RunRecord> run_job(const MatrixContext& ctx,
                               const std::string& trait,
                               const std::string& fold) {
  const ProtocolConfig& cfg = *ctx.cfg;
  std::vector<VariantSpec> todo;
  for (const VariantSpec& v : cfg.variants)
    if (!ctx.have.count(record_key(trait, fold, v.name()))) todo.push_back(v);
  if (todo.empty()) return {};

  const std::uint64_t seed = cfg.seed_for_fold(fold);
  const std::vector<std::string> heldout_ids = ctx.folds->ids_in_fold(fold);
  const std::vector<std::string> train_fold_ids =
      ctx.folds->ids_not_in_fold(fold);
  const Stage1Split split =
      split_stage1(train_fold_ids, derive_seed(seed, "stage1split"));

  const auto& trait_labels = ctx.labels.at(trait);
  auto labeled = [&](const std::vector<std::string>& ids) {
    std::vector<LabeledExample> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back({id, trait_labels.at(id)});
    return out;
  };
  const std::vector<LabeledExample> train_ex = labeled(split.train_ids);
  const std::vector<LabeledExample> val_ex = labeled(split.val_ids);

  // One artifact per (pair set, duration), shared by both transfer families.
  std::map<std::pair<PairSetSize, StageDuration>, Stage1Artifact> artifacts;
  for (const VariantSpec& v : todo) {
    if (!v.uses_artifact()) continue;
    const auto key = std::make_pair(v.pair_set, v.duration);
    if (!artifacts.count(key))
      artifacts.emplace(key,
                        ensure_artifact(ctx, trait, fold, v.pair_set,
                                        v.duration, split, train_fold_ids, seed));
  }

  const GridSpec grid{1.0, 5.0};
  std::vector<double> heldout_truth;
  heldout_truth.reserve(heldout_ids.size());
  for (const std::string& id : heldout_ids)
    heldout_truth.push_back(trait_labels.at(id));

  std::vector<RunRecord> records;
  for (const VariantSpec& v : todo) {
    const Stage1Artifact* art = nullptr;
    std::string artifact_id;
    if (v.uses_artifact()) {
      art = &artifacts.at({v.pair_set, v.duration});
      artifact_id = std::string("s1|") + trait + "|" + fold + "|" +
                    size_name(v.pair_set) + "|" + dur_name(v.duration);
    }

    Stage2Model model =
        build_stage2(v, art, static_cast<std::size_t>(cfg.features.dim),
                     cfg.trunk_dim, seed);
    if (v.family == TransferFamily::fusion) {
      // Held-out documents get their frozen embedding from the artifact
      // trunk, computed once before the absolute stage runs.
      auto extra = compute_frozen_embeddings(*art, heldout_ids, ctx.features);
      for (auto& [id, e] : extra) model.frozen[id] = std::move(e);
    }

    Stage2TrainOutcome outcome =
        train_stage2(std::move(model), train_ex, val_ex, ctx.features,
                     cfg.stage2, seed);

    const auto preds = predict(outcome.model, heldout_ids, ctx.features);
    std::vector<double> pred_grid;
    pred_grid.reserve(heldout_ids.size());
    for (const std::string& id : heldout_ids)
      pred_grid.push_back(
          discretize(preds.at(id), outcome.clip_lo, outcome.clip_hi));
    const double test_qwk = qwk(heldout_truth, pred_grid, grid);

    const fs::path pred_dir =
        fs::path(cfg.out_dir) / "predictions" / trait / fold;
    fs::create_directories(pred_dir);
    std::ostringstream pf;
    pf << "doc_id\tcontinuous\tdiscretized\ttruth\n";
    for (std::size_t i = 0; i < heldout_ids.size(); ++i) {
      const std::string& id = heldout_ids[i];
      pf << id << '\t' << fmt_double(preds.at(id)) << '\t'
         << fmt_double(pred_grid[i]) << '\t' << fmt_double(heldout_truth[i])
         << '\n';
    }
    write_text_file((pred_dir / (v.name() + ".tsv")).string(), pf.str());

    const fs::path ckpt_dir = fs::path(cfg.out_dir) / "stage2" / trait / fold;
    fs::create_directories(ckpt_dir);
    save_absolute_checkpoint((ckpt_dir / (v.name() + ".ckpt")).string(),
                             outcome.model.net, outcome.seeds);

    RunRecord r;
    r.trait = trait;
    r.fold = fold;
    r.seed = seed;
    r.variant = v;
    r.test_qwk = test_qwk;
    r.val_qwk = outcome.val_qwk;
    r.best_epoch = outcome.best_epoch;
    if (art) {
      r.has_stage1 = true;
      r.s1_val_acc = art->diagnostics.val_acc;
      r.s1_val_loss = art->diagnostics.val_loss;
      r.s1_pairtest_acc = art->diagnostics.pairtest_acc;
      r.s1_pairtest_loss = art->diagnostics.pairtest_loss;
      r.s1_best_epoch = art->diagnostics.best_epoch;
      r.artifact_id = artifact_id;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string results_record_line(const RunRecord& r) {
  std::ostringstream out;
  out << r.trait << '\t' << r.fold << '\t' << r.seed << '\t'
      << r.variant.name() << '\t' << fmt_double(r.test_qwk) << '\t'
      << fmt_double(r.val_qwk) << '\t' << r.best_epoch << '\t';
  if (r.has_stage1) {
    out << fmt_double(r.s1_val_acc) << '\t' << fmt_double(r.s1_val_loss)
        << '\t' << fmt_double(r.s1_pairtest_acc) << '\t'
        << fmt_double(r.s1_pairtest_loss) << '\t' << r.s1_best_epoch << '\t'
        << r.artifact_id;
  } else {
    out << "NA\tNA\tNA\tNA\tNA\tNA";
  }
  return out.str();
}

}  // namespace

ResultTable run_matrix(const ProtocolConfig& cfg, const Corpus& corpus,
                       const FoldMap& folds, const MatrixOptions& opts) {
  if (cfg.out_dir.empty())
    throw std::invalid_argument("run_matrix: no output directory configured");
  for (const std::string& t : cfg.traits) {
    bool known = false;
    for (const std::string& ct : corpus.trait_names) known |= (ct == t);
    if (!known)
      throw std::runtime_error("run_matrix: corpus has no trait column '" + t +
                               "'");
  }

  // The fold map and corpus must describe exactly the same documents.
  for (const Document& d : corpus.docs)
    if (!folds.assignment.count(d.doc_id))
      throw std::runtime_error("run_matrix: doc " + d.doc_id +
                               " missing from the fold map");
  if (folds.assignment.size() != corpus.docs.size())
    throw std::runtime_error(
        "run_matrix: fold map size does not match the corpus");

  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/config.echo", cfg.to_text(true));

  MatrixContext ctx;
  ctx.cfg = &cfg;
  ctx.corpus = &corpus;
  ctx.folds = &folds;
  for (const Document& d : corpus.docs) {
    ctx.features[d.doc_id] = featurize(d.text, cfg.features);
    for (const std::string& t : cfg.traits)
      ctx.labels[t][d.doc_id] = d.label(t);
  }

  const std::string results_path = cfg.out_dir + "/results.tsv";
  const std::string hash = cfg.semantic_hash();
  ResultTable existing;
  if (fs::exists(results_path)) {
    std::string file_hash;
    existing = load_results(results_path, &file_hash);
    if (file_hash != hash)
      throw std::runtime_error(
          "run_matrix: results file " + results_path +
          " was produced by a different configuration (hash " + file_hash +
          " != " + hash + "); refusing to mix runs");
  } else {
    std::ostringstream head;
    head << "# traitscore results v1\n# config: " << hash << '\n'
         << "trait\tfold\tseed\tvariant\ttest_qwk\tval_qwk\tbest_epoch\t"
            "s1_val_acc\ts1_val_loss\ts1_pairtest_acc\ts1_pairtest_loss\t"
            "s1_best_epoch\tartifact\n";
    write_text_file(results_path, head.str());
  }
  for (const RunRecord& r : existing.records)
    ctx.have.insert(record_key(r.trait, r.fold, r.variant.name()));

  struct Job {
    std::string trait;
    std::string fold;
  };
  std::vector<Job> jobs;
  for (const std::string& trait : cfg.traits)
    for (const auto& [fold, seed] : cfg.fold_seeds) jobs.push_back({trait, fold});

  std::mutex mu;
  std::map<std::size_t, std::vector<RunRecord>> completed;
  std::size_t flush_next = 0;
  std::vector<RunRecord> fresh;
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;

  auto flush_ready = [&] {
    // caller holds mu
    while (true) {
      auto it = completed.find(flush_next);
      if (it == completed.end()) break;
      if (!it->second.empty()) {
        std::ofstream out(results_path, std::ios::app | std::ios::binary);
        for (const RunRecord& r : it->second) out << results_record_line(r) << '\n';
      }
      for (RunRecord& r : it->second) fresh.push_back(std::move(r));
      completed.erase(it);
      ++flush_next;
    }
  };

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      std::vector<RunRecord> recs;
      try {
        recs = run_job(ctx, jobs[i].trait, jobs[i].fold);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) {
          try {
            std::throw_with_nested(std::runtime_error(
                "matrix job (" + jobs[i].trait + ", " + jobs[i].fold + ") failed"));
          } catch (...) {
            first_error = std::current_exception();
          }
        }
        failed.store(true);
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      if (!opts.quiet)
        std::cerr << "[matrix] " << jobs[i].trait << " fold " << jobs[i].fold
                  << ": " << recs.size() << " new record(s)\n";
      completed[i] = std::move(recs);
      flush_ready();
    }
  };

  const int n_threads = std::max(1, std::min<int>(opts.jobs,
                                                  static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ResultTable table = std::move(existing);
  for (RunRecord& r : fresh) table.records.push_back(std::move(r));

  // Canonical in-memory order for the analyses.
  auto rank_of = [&](const RunRecord& r) {
    std::size_t ti = 0, fi = 0, vi = 0;
    for (std::size_t i = 0; i < cfg.traits.size(); ++i)
      if (cfg.traits[i] == r.trait) ti = i;
    for (std::size_t i = 0; i < cfg.fold_seeds.size(); ++i)
      if (cfg.fold_seeds[i].first == r.fold) fi = i;
    for (std::size_t i = 0; i < cfg.variants.size(); ++i)
      if (cfg.variants[i] == r.variant) vi = i;
    return (ti * cfg.fold_seeds.size() + fi) * cfg.variants.size() + vi;
  };
  std::stable_sort(table.records.begin(), table.records.end(),
                   [&](const RunRecord& a, const RunRecord& b) {
                     return rank_of(a) < rank_of(b);
                   });
  return table;
}

}  // namespace traitscore
