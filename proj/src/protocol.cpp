#include "traitscore/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "traitscore/metrics.hpp"
#include "traitscore/textio.hpp"

namespace traitscore {

std::uint64_t ProtocolConfig::seed_for_fold(const std::string& fold) const {
  for (const auto& [f, s] : fold_seeds)
    if (f == fold) return s;
  throw std::runtime_error("no seed mapped for fold " + fold);
}

namespace {

std::string join_strings(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

bool parse_flag(const std::string& v) {
  const std::string s = to_lower(v);
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw std::runtime_error("bad flag value: " + v);
}

}  // namespace

std::string ProtocolConfig::to_text(bool include_paths) const {
  std::ostringstream out;
  out << "traits = " << join_strings(traits, ',') << '\n';
  out << "folds = ";
  for (std::size_t i = 0; i < fold_seeds.size(); ++i)
    out << (i ? "," : "") << fold_seeds[i].first << ':'
        << fold_seeds[i].second;
  out << '\n';
  out << "variants = ";
  if (variants.size() == VariantSpec::all().size() &&
      std::equal(variants.begin(), variants.end(),
                 VariantSpec::all().begin())) {
    out << "all";
  } else {
    std::vector<std::string> names;
    for (const VariantSpec& v : variants) names.push_back(v.name());
    out << join_strings(names, ',');
  }
  out << '\n';
  out << "features.dim = " << features.dim << '\n';
  out << "features.char_ngram = " << features.char_ngram << '\n';
  out << "features.word_unigrams = " << (features.use_word_unigrams ? "on" : "off")
      << '\n';
  out << "features.hash_seed = " << features.hash_seed << '\n';
  out << "model.trunk_dim = " << trunk_dim << '\n';
  out << "stage1.lr = " << fmt_double(stage1.lr) << '\n';
  out << "stage1.weight_decay = " << fmt_double(stage1.weight_decay) << '\n';
  out << "stage1.batch_size = " << stage1.batch_size << '\n';
  out << "stage1.max_epochs = " << stage1.max_epochs << '\n';
  out << "stage1.patience = " << stage1.patience << '\n';
  out << "stage1.min_delta = " << fmt_double(stage1.min_delta) << '\n';
  out << "stage2.lr = " << fmt_double(stage2.lr) << '\n';
  out << "stage2.weight_decay = " << fmt_double(stage2.weight_decay) << '\n';
  out << "stage2.batch_size = " << stage2.batch_size << '\n';
  out << "stage2.max_epochs = " << stage2.max_epochs << '\n';
  out << "stage2.patience = " << stage2.patience << '\n';
  out << "stage2.min_delta = " << fmt_double(stage2.min_delta) << '\n';
  out << "pairs.min_gap = " << fmt_double(pair_policy.min_gap) << '\n';
  out << "pairs.usage_target = " << fmt_double(pair_policy.usage_target) << '\n';
  out << "pairs.small_fraction = " << fmt_double(small_fraction) << '\n';
  if (include_paths) {
    out << "paths.documents = " << documents_path << '\n';
    out << "paths.fold_map = " << fold_map_path << '\n';
    out << "paths.out = " << out_dir << '\n';
  }
  return out.str();
}

std::string ProtocolConfig::semantic_hash() const {
  const std::string text = to_text(false);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

ProtocolConfig ProtocolConfig::from_text(std::string_view text) {
  ProtocolConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "traits") {
      cfg.traits.clear();
      for (const std::string& t : split(value, ','))
        cfg.traits.push_back(std::string(trim(t)));
    } else if (key == "folds") {
      cfg.fold_seeds.clear();
      for (const std::string& part : split(value, ',')) {
        const auto fs = split(std::string(trim(part)), ':');
        if (fs.size() != 2)
          throw std::runtime_error("config: fold entry needs FOLD:SEED, got " +
                                   part);
        cfg.fold_seeds.emplace_back(
            std::string(trim(fs[0])),
            static_cast<std::uint64_t>(parse_int(fs[1])));
      }
    } else if (key == "variants") {
      if (std::string(trim(value)) == "all") {
        cfg.variants = VariantSpec::all();
      } else {
        cfg.variants.clear();
        for (const std::string& v : split(value, ','))
          cfg.variants.push_back(VariantSpec::parse(std::string(trim(v))));
      }
    } else if (key == "features.dim") {
      cfg.features.dim = static_cast<int>(parse_int(value));
    } else if (key == "features.char_ngram") {
      cfg.features.char_ngram = static_cast<int>(parse_int(value));
    } else if (key == "features.word_unigrams") {
      cfg.features.use_word_unigrams = parse_flag(value);
    } else if (key == "features.hash_seed") {
      cfg.features.hash_seed = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "model.trunk_dim") {
      cfg.trunk_dim = static_cast<std::size_t>(parse_int(value));
    } else if (key == "stage1.lr") {
      cfg.stage1.lr = parse_double(value);
    } else if (key == "stage1.weight_decay") {
      cfg.stage1.weight_decay = parse_double(value);
    } else if (key == "stage1.batch_size") {
      cfg.stage1.batch_size = static_cast<int>(parse_int(value));
    } else if (key == "stage1.max_epochs") {
      cfg.stage1.max_epochs = static_cast<int>(parse_int(value));
    } else if (key == "stage1.patience") {
      cfg.stage1.patience = static_cast<int>(parse_int(value));
    } else if (key == "stage1.min_delta") {
      cfg.stage1.min_delta = parse_double(value);
    } else if (key == "stage2.lr") {
      cfg.stage2.lr = parse_double(value);
    } else if (key == "stage2.weight_decay") {
      cfg.stage2.weight_decay = parse_double(value);
    } else if (key == "stage2.batch_size") {
      cfg.stage2.batch_size = static_cast<int>(parse_int(value));
    } else if (key == "stage2.max_epochs") {
      cfg.stage2.max_epochs = static_cast<int>(parse_int(value));
    } else if (key == "stage2.patience") {
      cfg.stage2.patience = static_cast<int>(parse_int(value));
    } else if (key == "stage2.min_delta") {
      cfg.stage2.min_delta = parse_double(value);
    } else if (key == "pairs.min_gap") {
      cfg.pair_policy.min_gap = parse_double(value);
    } else if (key == "pairs.usage_target") {
      cfg.pair_policy.usage_target = parse_double(value);
    } else if (key == "pairs.small_fraction") {
      cfg.small_fraction = parse_double(value);
    } else if (key == "paths.documents") {
      cfg.documents_path = value;
    } else if (key == "paths.fold_map") {
      cfg.fold_map_path = value;
    } else if (key == "paths.out") {
      cfg.out_dir = value;
    } else {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

ProtocolConfig ProtocolConfig::from_file(const std::string& path) {
  return from_text(read_text_file(path));
}

// ---- results ----

const RunRecord* ResultTable::find(const std::string& trait,
                                   const std::string& fold,
                                   const std::string& variant) const {
  for (const RunRecord& r : records)
    if (r.trait == trait && r.fold == fold && r.variant.name() == variant)
      return &r;
  return nullptr;
}

const RunRecord& ResultTable::at(const std::string& trait,
                                 const std::string& fold,
                                 const std::string& variant) const {
  const RunRecord* r = find(trait, fold, variant);
  if (!r)
    throw std::runtime_error("no record for (" + trait + ", " + fold + ", " +
                             variant + ")");
  return *r;
}

namespace {

constexpr const char* kResultsHeader =
    "trait\tfold\tseed\tvariant\ttest_qwk\tval_qwk\tbest_epoch\ts1_val_acc\t"
    "s1_val_loss\ts1_pairtest_acc\ts1_pairtest_loss\ts1_best_epoch\tartifact";

std::string record_line(const RunRecord& r) {
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

RunRecord parse_record_line(const std::string& line) {
  const auto cols = split(line, '\t');
  if (cols.size() != 13)
    throw std::runtime_error("results: bad record width: " + line);
  RunRecord r;
  r.trait = cols[0];
  r.fold = cols[1];
  r.seed = static_cast<std::uint64_t>(parse_int(cols[2]));
  r.variant = VariantSpec::parse(cols[3]);
  r.test_qwk = parse_double(cols[4]);
  r.val_qwk = parse_double(cols[5]);
  r.best_epoch = static_cast<int>(parse_int(cols[6]));
  r.has_stage1 = cols[7] != "NA";
  if (r.has_stage1) {
    r.s1_val_acc = parse_double(cols[7]);
    r.s1_val_loss = parse_double(cols[8]);
    r.s1_pairtest_acc = parse_double(cols[9]);
    r.s1_pairtest_loss = parse_double(cols[10]);
    r.s1_best_epoch = static_cast<int>(parse_int(cols[11]));
    r.artifact_id = cols[12];
  }
  return r;
}

}  // namespace

void save_results(const std::string& path, const ResultTable& table,
                  const std::string& config_hash) {
  std::ostringstream out;
  out << "# traitscore results v1\n";
  out << "# config: " << config_hash << '\n';
  out << kResultsHeader << '\n';
  for (const RunRecord& r : table.records) out << record_line(r) << '\n';
  write_text_file(path, out.str());
}

ResultTable load_results(const std::string& path, std::string* config_hash) {
  ResultTable table;
  bool saw_header = false;
  for (const std::string& line : split(read_text_file(path), '\n')) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view t = trim(std::string_view(line).substr(1));
      if (t.starts_with("config:") && config_hash)
        *config_hash = std::string(trim(t.substr(7)));
      continue;
    }
    if (!saw_header) {
      if (line != kResultsHeader)
        throw std::runtime_error("results " + path + ": unexpected header");
      saw_header = true;
      continue;
    }
    table.records.push_back(parse_record_line(line));
  }
  return table;
}

// ---- analyses ----

TraitMeansResult trait_means(const ResultTable& table,
                             const ProtocolConfig& cfg) {
  TraitMeansResult res;
  std::map<std::string, std::vector<double>> per_variant_values;
  for (const std::string& trait : cfg.traits) {
    for (const VariantSpec& v : cfg.variants) {
      double sum = 0.0;
      for (const auto& [fold, seed] : cfg.fold_seeds) {
        const RunRecord* r = table.find(trait, fold, v.name());
        if (!r)
          throw std::runtime_error("trait_means: missing record (" + trait +
                                   ", " + fold + ", " + v.name() + ")");
        sum += r->test_qwk;
        per_variant_values[v.name()].push_back(r->test_qwk);
      }
      res.mean[{trait, v.name()}] =
          sum / static_cast<double>(cfg.fold_seeds.size());
    }
  }

  auto summarize = [](const std::vector<double>& vals) {
    VariantSummary s;
    s.min = *std::min_element(vals.begin(), vals.end());
    s.max = *std::max_element(vals.begin(), vals.end());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    s.std_pop = std::sqrt(var / static_cast<double>(vals.size()));
    return s;
  };
  for (const auto& [name, vals] : per_variant_values)
    res.per_variant[name] = summarize(vals);

  // Best transfer variant per row, when transfer variants are present.
  std::vector<double> best_vals;
  double gain_sum = 0.0;
  int wins = 0;
  for (const std::string& trait : cfg.traits) {
    for (const auto& [fold, seed] : cfg.fold_seeds) {
      double best = 0.0;
      bool any = false;
      for (const VariantSpec& v : cfg.variants) {
        if (!v.uses_artifact()) continue;
        const double q = table.at(trait, fold, v.name()).test_qwk;
        if (!any || q > best) best = q;
        any = true;
      }
      if (!any) continue;
      best_vals.push_back(best);
      if (const RunRecord* base = table.find(trait, fold, "baseline")) {
        gain_sum += best - base->test_qwk;
        if (best > base->test_qwk) ++wins;
      }
    }
  }
  if (!best_vals.empty()) {
    res.best_transfer = summarize(best_vals);
    res.best_transfer_mean_gain =
        gain_sum / static_cast<double>(best_vals.size());
    res.best_transfer_wins = wins;
  }
  return res;
}

BestVariantFreq best_variant_freq(const ResultTable& table,
                                  const ProtocolConfig& cfg) {
  BestVariantFreq res;
  for (const VariantSpec& v : cfg.variants) res.counts[v.name()] = 0;
  for (const std::string& trait : cfg.traits) {
    for (const auto& [fold, seed] : cfg.fold_seeds) {
      double best = 0.0;
      bool any = false;
      for (const VariantSpec& v : cfg.variants) {
        const double q = table.at(trait, fold, v.name()).test_qwk;
        if (!any || q > best) best = q;
        any = true;
      }
      if (!any) continue;
      std::vector<std::string> winners;
      std::string assigned;
      for (const VariantSpec& v : cfg.variants) {  // pinned precedence order
        if (table.at(trait, fold, v.name()).test_qwk == best) {
          winners.push_back(v.name());
          if (assigned.empty()) assigned = v.name();
        }
      }
      ++res.counts[assigned];
      res.row_winners.emplace_back(trait, fold, std::move(winners));
    }
  }
  return res;
}

PairedComparisonResult paired_comparison(const ResultTable& table,
                                         const ProtocolConfig& cfg,
                                         VaryAxis vary, TransferFamily family,
                                         PairSetSize fixed_size,
                                         StageDuration fixed_duration) {
  if (family == TransferFamily::baseline)
    throw std::invalid_argument(
        "paired_comparison: the varied axes exist only for transfer variants");
  VariantSpec first, second;
  first.family = second.family = family;
  if (vary == VaryAxis::duration) {
    first.pair_set = second.pair_set = fixed_size;
    first.duration = StageDuration::one_epoch;
    second.duration = StageDuration::standard;
  } else {
    first.duration = second.duration = fixed_duration;
    first.pair_set = PairSetSize::large;
    second.pair_set = PairSetSize::small;
  }

  PairedComparisonResult res;
  double sum = 0.0;
  for (const std::string& trait : cfg.traits) {
    for (const auto& [fold, seed] : cfg.fold_seeds) {
      const double a = table.at(trait, fold, first.name()).test_qwk;
      const double b = table.at(trait, fold, second.name()).test_qwk;
      sum += a - b;
      if (a > b)
        ++res.wins;
      else if (a < b)
        ++res.losses;
      else
        ++res.ties;
      ++res.n;
    }
  }
  res.mean_delta = res.n ? sum / static_cast<double>(res.n) : 0.0;
  return res;
}

std::string diag_name(Stage1Diag d) {
  switch (d) {
    case Stage1Diag::pairtest_acc: return "pairtest_acc";
    case Stage1Diag::val_acc: return "val_acc";
    case Stage1Diag::val_loss: return "val_loss";
    case Stage1Diag::best_epoch: return "best_epoch";
  }
  return "?";
}

Stage1Diag parse_diag(const std::string& name) {
  if (name == "pairtest_acc") return Stage1Diag::pairtest_acc;
  if (name == "val_acc") return Stage1Diag::val_acc;
  if (name == "val_loss") return Stage1Diag::val_loss;
  if (name == "best_epoch") return Stage1Diag::best_epoch;
  throw std::invalid_argument("unknown stage-1 diagnostic: " + name);
}

CorrelationResult stage1_stage2_correlation(const ResultTable& table,
                                            Stage1Diag diagnostic,
                                            const std::string& trait) {
  std::vector<double> x, y;
  for (const RunRecord& r : table.records) {
    if (!r.has_stage1) continue;  // baseline has no stage-1 linkage
    if (!trait.empty() && r.trait != trait) continue;
    double d = 0.0;
    switch (diagnostic) {
      case Stage1Diag::pairtest_acc: d = r.s1_pairtest_acc; break;
      case Stage1Diag::val_acc: d = r.s1_val_acc; break;
      case Stage1Diag::val_loss: d = r.s1_val_loss; break;
      case Stage1Diag::best_epoch: d = static_cast<double>(r.s1_best_epoch); break;
    }
    x.push_back(d);
    y.push_back(r.test_qwk);
  }
  CorrelationResult res;
  res.n = static_cast<int>(x.size());
  res.pearson = pearson(x, y);
  res.spearman = spearman(x, y);
  return res;
}

}  // namespace traitscore
