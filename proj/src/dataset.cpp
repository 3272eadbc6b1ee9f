#include "traitscore/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "traitscore/metrics.hpp"
#include "traitscore/rng.hpp"
#include "traitscore/textio.hpp"

namespace traitscore {

double Document::label(const std::string& trait) const {
  auto it = labels.find(trait);
  if (it == labels.end())
    throw std::runtime_error("document " + doc_id + " has no label for trait " +
                             trait);
  return it->second;
}

const Document& Corpus::by_id(const std::string& doc_id) const {
  for (const Document& d : docs)
    if (d.doc_id == doc_id) return d;
  throw std::runtime_error("unknown doc_id: " + doc_id);
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(docs.size());
  for (const Document& d : docs) out.push_back(d.doc_id);
  return out;
}

std::vector<std::string> FoldMap::ids_in_fold(const std::string& fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldMap::ids_not_in_fold(
    const std::string& fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f != fold) out.push_back(id);
  return out;
}

namespace {

void check_label(const std::string& doc_id, const std::string& trait,
                 double v) {
  if (v < 1.0 || v > 5.0 || !on_half_grid(v))
    throw std::runtime_error("document " + doc_id + ": label " +
                             fmt_double(v) + " for trait " + trait +
                             " is not on the 0.5 grid in [1.0, 5.0]");
}

}  // namespace

Corpus load_documents(const std::string& path,
                      const std::vector<std::string>& trait_names,
                      const std::string& id_column,
                      const std::string& text_column) {
  const auto rows = read_csv_file(path);
  if (rows.empty()) throw std::runtime_error("documents file is empty: " + path);

  const auto& header = rows.front();
  auto col_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("documents file " + path + ": missing column '" +
                             name + "'");
  };
  const std::size_t id_col = col_of(id_column);
  const std::size_t text_col = col_of(text_column);
  std::vector<std::size_t> trait_cols;
  for (const std::string& t : trait_names) trait_cols.push_back(col_of(t));

  Corpus corpus;
  corpus.trait_names = trait_names;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < header.size())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) +
                               " has " + std::to_string(row.size()) +
                               " fields, header has " +
                               std::to_string(header.size()));
    Document d;
    d.doc_id = row[id_col];
    d.text = row[text_col];
    if (!seen.insert(d.doc_id).second)
      throw std::runtime_error(path + ": duplicate doc_id " + d.doc_id);
    for (std::size_t t = 0; t < trait_names.size(); ++t) {
      const double v = parse_double(row[trait_cols[t]]);
      check_label(d.doc_id, trait_names[t], v);
      d.labels[trait_names[t]] = v;
    }
    corpus.docs.push_back(std::move(d));
  }
  return corpus;
}

void save_documents(const std::string& path, const Corpus& corpus,
                    const std::string& id_column,
                    const std::string& text_column) {
  std::ostringstream out;
  out << id_column << ',' << text_column;
  for (const std::string& t : corpus.trait_names) out << ',' << t;
  out << '\n';
  for (const Document& d : corpus.docs) {
    out << csv_escape(d.doc_id) << ',' << csv_escape(d.text);
    for (const std::string& t : corpus.trait_names)
      out << ',' << fmt_double(d.label(t));
    out << '\n';
  }
  write_text_file(path, out.str());
}

FoldMap make_fold_map(const std::vector<std::string>& doc_ids, int n_folds,
                      std::uint64_t seed) {
  if (n_folds < 2 || n_folds > 26)
    throw std::invalid_argument("make_fold_map: n_folds must be in [2, 26]");
  if (doc_ids.empty())
    throw std::invalid_argument("make_fold_map: empty doc_id list");

  std::vector<std::string> ids = doc_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::runtime_error("make_fold_map: duplicate doc_id");

  Rng rng(seed);
  rng.shuffle(ids);

  FoldMap map;
  for (int f = 0; f < n_folds; ++f)
    map.fold_labels.push_back(std::string(1, static_cast<char>('A' + f)));
  for (std::size_t i = 0; i < ids.size(); ++i)
    map.assignment[ids[i]] = map.fold_labels[i % static_cast<std::size_t>(n_folds)];
  return map;
}

void save_fold_map(const std::string& path, const FoldMap& map) {
  std::ostringstream out;
  out << "doc_id,fold\n";
  for (const auto& [id, fold] : map.assignment)
    out << csv_escape(id) << ',' << csv_escape(fold) << '\n';
  write_text_file(path, out.str());
}

FoldMap load_fold_map(const std::string& path) {
  const auto rows = read_csv_file(path);
  if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != "doc_id" ||
      rows.front()[1] != "fold")
    throw std::runtime_error("fold map " + path +
                             ": expected header 'doc_id,fold'");
  FoldMap map;
  std::set<std::string> labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 2)
      throw std::runtime_error("fold map " + path + ": short row " +
                               std::to_string(r + 1));
    if (!map.assignment.emplace(row[0], row[1]).second)
      throw std::runtime_error("fold map " + path + ": duplicate doc_id " +
                               row[0]);
    labels.insert(row[1]);
  }
  map.fold_labels.assign(labels.begin(), labels.end());
  return map;
}

std::pair<Corpus, SynthParams> synth_corpus(
    int n_docs, std::uint64_t seed, double noise_sd,
    const std::vector<std::string>& trait_names) {
  if (n_docs < 20)
    throw std::invalid_argument("synth_corpus: n_docs must be >= 20");
  if (trait_names.empty())
    throw std::invalid_argument("synth_corpus: need at least one trait");

  SynthParams params;
  params.trait_names = trait_names;
  params.noise_sd = noise_sd;
  for (std::size_t t = 0; t < trait_names.size(); ++t)
    params.signal_tokens.push_back("marker" +
                                   std::string(1, static_cast<char>('a' + t)));

  std::vector<std::string> fillers;
  // Pronounceable deterministic filler vocabulary.
  const char* consonants = "bcdfglmnprstvz";
  const char* vowels = "aeiou";
  for (int i = 0; fillers.size() < static_cast<std::size_t>(params.filler_vocab);
       ++i) {
    std::string w;
    int x = i;
    for (int k = 0; k < 3; ++k) {
      w += consonants[x % 14];
      w += vowels[(x / 14) % 5];
      x /= 70;
    }
    fillers.push_back(w);
  }

  Rng rng(derive_seed(seed, "synth"));
  Corpus corpus;
  corpus.trait_names = trait_names;
  const std::size_t n_traits = trait_names.size();
  for (int i = 0; i < n_docs; ++i) {
    Document d;
    d.doc_id = "syn" + std::string(5 - std::to_string(i).size(), '0') +
               std::to_string(i);
    const int len = params.min_tokens +
                    static_cast<int>(rng.uniform_index(
                        static_cast<std::uint64_t>(params.max_tokens -
                                                   params.min_tokens + 1)));
    // Per-trait signal intensity; each token slot picks signal t with
    // probability q_t / (2 * n_traits), else a uniform filler.
    std::vector<double> q(n_traits);
    for (double& qi : q) qi = rng.uniform_real();
    std::vector<int> counts(n_traits, 0);
    std::string text;
    for (int s = 0; s < len; ++s) {
      const double u = rng.uniform_real();
      double cum = 0.0;
      std::size_t chosen = n_traits;
      for (std::size_t t = 0; t < n_traits; ++t) {
        cum += q[t] / (2.0 * static_cast<double>(n_traits));
        if (u < cum) {
          chosen = t;
          break;
        }
      }
      if (!text.empty()) text += ' ';
      if (chosen < n_traits) {
        ++counts[chosen];
        text += params.signal_tokens[chosen];
      } else {
        text += fillers[rng.uniform_index(fillers.size())];
      }
    }
    d.text = std::move(text);
    for (std::size_t t = 0; t < n_traits; ++t) {
      const double freq = static_cast<double>(counts[t]) / len;
      double y = params.label_intercept + params.label_slope * freq;
      if (noise_sd > 0.0) y += rng.normal(0.0, noise_sd);
      y = std::clamp(y, 1.0, 5.0);
      d.labels[trait_names[t]] = std::clamp(snap_half_up(y), 1.0, 5.0);
    }
    corpus.docs.push_back(std::move(d));
  }
  return {std::move(corpus), std::move(params)};
}

Stage1Split split_stage1(const std::vector<std::string>& training_fold_ids,
                         std::uint64_t seed) {
  const std::size_t n = training_fold_ids.size();
  if (n < 10)
    throw std::runtime_error(
        "split_stage1: need at least 10 documents to fill all partitions");
  std::vector<std::string> ids = training_fold_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);

  const std::size_t n_val = n / 10;
  const std::size_t n_pt = n / 10;
  const std::size_t n_train = n - n_val - n_pt;
  Stage1Split split;
  split.train_ids.assign(ids.begin(), ids.begin() + n_train);
  split.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.pairtest_ids.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

}  // namespace traitscore
