#include "traitscore/pairgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "traitscore/rng.hpp"
#include "traitscore/textio.hpp"

namespace traitscore {

PairPolicy PairPolicy::defaults() {
  PairPolicy p;
  p.buckets = {{">=3", 3.0, std::numeric_limits<double>::infinity()},
               {"2-3", 2.0, 3.0},
               {"1-2", 1.0, 2.0}};
  return p;
}

void PairPolicy::validate() const {
  if (min_gap <= 0.0) throw std::invalid_argument("pair policy: min_gap must be > 0");
  if (usage_target < 1.0)
    throw std::invalid_argument("pair policy: usage_target must be >= 1");
  if (subsample_fraction <= 0.0 || subsample_fraction > 1.0)
    throw std::invalid_argument(
        "pair policy: subsample_fraction must be in (0, 1]");
  if (buckets.empty()) throw std::invalid_argument("pair policy: no buckets");
}

std::string PairPolicy::bucket_of(double gap) const {
  for (const GapBucket& b : buckets)
    if (gap >= b.lo && gap < b.hi) return b.name;
  return "none";
}

namespace {

struct DocRef {
  std::string id;
  double label;
  int usage = 0;
};

}  // namespace

PairSet generate_pairs(const std::vector<LabeledDoc>& docs,
                       const PairPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (docs.size() < 2)
    throw std::invalid_argument("generate_pairs: need at least 2 documents");

  std::vector<DocRef> pool;
  pool.reserve(docs.size());
  for (const auto& [id, label] : docs) pool.push_back({id, label, 0});
  std::sort(pool.begin(), pool.end(),
            [](const DocRef& a, const DocRef& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].id == pool[i - 1].id)
      throw std::invalid_argument("generate_pairs: duplicate doc_id " +
                                  pool[i].id);

  Rng rng(seed);

  // Subsample phase: the smaller pair-set setting pairs within a seeded
  // fraction of the pool.
  if (policy.subsample_fraction < 1.0) {
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(policy.subsample_fraction * static_cast<double>(pool.size())));
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<DocRef> kept;
    kept.reserve(keep);
    for (std::size_t i : order) kept.push_back(pool[i]);
    pool = std::move(kept);
  }

  PairSet out;
  for (const DocRef& d : pool) out.participating_ids.push_back(d.id);
  if (pool.size() < 2) return out;

  const std::size_t n = pool.size();
  std::set<std::pair<std::size_t, std::size_t>> used;  // (lo idx, hi idx)

  auto emit = [&](std::size_t i, std::size_t j, bool fallback) {
    const std::size_t hi_label = pool[i].label >= pool[j].label ? i : j;
    const std::size_t lo_label = hi_label == i ? j : i;
    const double gap = pool[hi_label].label - pool[lo_label].label;
    Pair p;
    p.a_id = pool[hi_label].id;
    p.b_id = pool[lo_label].id;
    p.gap = gap;
    p.is_fallback = fallback;
    p.bucket = fallback ? "fallback" : policy.bucket_of(gap);
    out.pairs.push_back(std::move(p));
    used.insert({std::min(i, j), std::max(i, j)});
    ++pool[i].usage;
    ++pool[j].usage;
  };

  // Coverage phase: ascending doc_id over still-unused docs; prefer the
  // least-used partner satisfying min_gap, smallest id on ties; otherwise the
  // widest positive gap as a fallback.
  for (std::size_t i = 0; i < n; ++i) {
    if (pool[i].usage != 0) continue;
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (std::abs(pool[i].label - pool[j].label) < policy.min_gap) continue;
      if (best == n || pool[j].usage < pool[best].usage ||
          (pool[j].usage == pool[best].usage && pool[j].id < pool[best].id))
        best = j;
    }
    if (best < n) {
      emit(i, best, false);
      continue;
    }
    double best_gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double gap = std::abs(pool[i].label - pool[j].label);
      if (gap <= 0.0) continue;
      if (best == n || gap > best_gap ||
          (gap == best_gap && pool[j].id < pool[best].id)) {
        best = j;
        best_gap = gap;
      }
    }
    if (best < n) {
      emit(i, best, true);
    } else {
      out.uncovered.push_back(pool[i].id);
    }
  }

  // Fill phase: bucket-stratified sampling toward the usage target.
  const std::size_t target = static_cast<std::size_t>(
      std::ceil(policy.usage_target * static_cast<double>(n) / 2.0));
  const int cap = static_cast<int>(std::ceil(policy.usage_target)) + 1;
  const std::size_t n_buckets = policy.buckets.size();

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> active(
      n_buckets);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> deferred(
      n_buckets);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = std::abs(pool[i].label - pool[j].label);
      if (gap < policy.min_gap) continue;
      if (used.count({i, j})) continue;
      for (std::size_t b = 0; b < n_buckets; ++b) {
        if (gap >= policy.buckets[b].lo && gap < policy.buckets[b].hi) {
          active[b].push_back({i, j});
          break;
        }
      }
    }
  }

  bool cap_active = true;
  std::size_t rr = 0;
  while (out.pairs.size() < target) {
    bool emitted = false;
    for (std::size_t t = 0; t < n_buckets && !emitted; ++t) {
      const std::size_t b = (rr + t) % n_buckets;
      auto& act = active[b];
      while (!act.empty()) {
        const std::size_t k =
            static_cast<std::size_t>(rng.uniform_index(act.size()));
        const auto [i, j] = act[k];
        act[k] = act.back();
        act.pop_back();
        if (cap_active && (pool[i].usage >= cap || pool[j].usage >= cap)) {
          deferred[b].push_back({i, j});
          continue;
        }
        emit(i, j, false);
        rr = (b + 1) % n_buckets;
        emitted = true;
        break;
      }
    }
    if (emitted) continue;
    if (cap_active) {
      // Capped universe exhausted: relax the cap and recycle deferrals.
      cap_active = false;
      bool any = false;
      for (std::size_t b = 0; b < n_buckets; ++b) {
        if (!deferred[b].empty()) any = true;
        for (auto& pr : deferred[b]) active[b].push_back(pr);
        deferred[b].clear();
      }
      if (any) continue;
    }
    out.shortfall = true;
    break;
  }
  return out;
}

PairReport validate_pairs(const PairSet& pairs,
                          const std::vector<LabeledDoc>& docs,
                          const PairPolicy& policy) {
  policy.validate();
  std::map<std::string, double> label_of;
  for (const auto& [id, label] : docs) label_of[id] = label;

  PairReport report;
  std::vector<std::string> universe = pairs.participating_ids;
  if (universe.empty())
    for (const auto& [id, label] : docs) universe.push_back(id);
  for (const std::string& id : universe) {
    if (!label_of.count(id))
      throw std::runtime_error("validate_pairs: unknown doc_id " + id);
    report.usage[id] = 0;
  }

  std::set<std::pair<std::string, std::string>> seen;
  auto flag = [&](const std::string& what) { report.violations.push_back(what); };

  for (const Pair& p : pairs.pairs) {
    auto a = label_of.find(p.a_id);
    auto b = label_of.find(p.b_id);
    if (a == label_of.end())
      throw std::runtime_error("validate_pairs: unknown doc_id " + p.a_id);
    if (b == label_of.end())
      throw std::runtime_error("validate_pairs: unknown doc_id " + p.b_id);
    const std::string key = p.a_id + "|" + p.b_id;
    if (p.a_id == p.b_id) flag("self pair: " + key);
    if (a->second < b->second) flag("canonical order violated: " + key);
    const double gap = a->second - b->second;
    if (std::abs(gap - p.gap) > 1e-12)
      flag("stored gap mismatch: " + key + " stored " + fmt_double(p.gap) +
           " actual " + fmt_double(gap));
    if (!p.is_fallback && p.gap < policy.min_gap)
      flag("gap below policy minimum without fallback flag: " + key);
    if (p.is_fallback && p.gap <= 0.0) flag("fallback pair with zero gap: " + key);
    if (!p.is_fallback && p.bucket != policy.bucket_of(p.gap))
      flag("bucket tag mismatch: " + key + " tagged " + p.bucket);
    auto norm = std::minmax(p.a_id, p.b_id);
    if (!seen.insert({norm.first, norm.second}).second)
      flag("duplicate unordered pair: " + key);
    ++report.usage[p.a_id];
    ++report.usage[p.b_id];
    ++report.bucket_counts[p.bucket];
    if (p.is_fallback) ++report.fallback_count;
  }

  // Coverage: a participating doc with any strictly different label among
  // participants must appear in at least one pair.
  std::set<std::string> uncovered_listed(pairs.uncovered.begin(),
                                         pairs.uncovered.end());
  for (const std::string& id : universe) {
    if (report.usage[id] > 0) continue;
    bool has_partner = false;
    for (const std::string& other : universe) {
      if (other != id && label_of[other] != label_of[id]) {
        has_partner = true;
        break;
      }
    }
    if (has_partner)
      flag("uncovered doc with available positive-gap partner: " + id);
    else if (!uncovered_listed.count(id))
      flag("unpairable doc missing from uncovered list: " + id);
  }
  report.uncovered_count = static_cast<int>(pairs.uncovered.size());
  return report;
}

void save_pair_cache(const std::string& path, const PairSet& set,
                     const PairCacheMeta& meta) {
  std::ostringstream out;
  out << "# trait: " << meta.trait << '\n';
  out << "# run_seed: " << meta.run_seed << '\n';
  out << "# source_split: " << meta.source_split << '\n';
  out << "# min_gap: " << fmt_double(meta.policy.min_gap) << '\n';
  out << "# usage_target: " << fmt_double(meta.policy.usage_target) << '\n';
  out << "# subsample_fraction: " << fmt_double(meta.policy.subsample_fraction)
      << '\n';
  out << "# buckets:";
  for (std::size_t i = 0; i < meta.policy.buckets.size(); ++i) {
    const GapBucket& b = meta.policy.buckets[i];
    out << (i ? ";" : " ") << b.name << ':' << fmt_double(b.lo) << ':'
        << (std::isinf(b.hi) ? "inf" : fmt_double(b.hi));
  }
  out << '\n';
  out << "# participating:";
  for (std::size_t i = 0; i < set.participating_ids.size(); ++i)
    out << (i ? "," : " ") << set.participating_ids[i];
  out << '\n';
  out << "# uncovered:";
  for (std::size_t i = 0; i < set.uncovered.size(); ++i)
    out << (i ? "," : " ") << set.uncovered[i];
  out << '\n';
  out << "# shortfall: " << (set.shortfall ? 1 : 0) << '\n';
  out << "a_id,b_id,gap,bucket,is_fallback\n";
  for (const Pair& p : set.pairs) {
    out << csv_escape(p.a_id) << ',' << csv_escape(p.b_id) << ','
        << fmt_double(p.gap) << ',' << csv_escape(p.bucket) << ','
        << (p.is_fallback ? 1 : 0) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

std::string meta_value(const std::string& line) {
  const std::size_t colon = line.find(':');
  if (colon == std::string::npos) return "";
  return std::string(trim(line.substr(colon + 1)));
}

std::vector<std::string> comma_list(const std::string& s) {
  if (trim(s).empty()) return {};
  std::vector<std::string> out;
  for (const std::string& part : split(s, ','))
    out.push_back(std::string(trim(part)));
  return out;
}

}  // namespace

PairSet load_pair_cache(const std::string& path, PairCacheMeta* meta) {
  const std::string text = read_text_file(path);
  PairSet set;
  PairCacheMeta m;
  m.policy.buckets.clear();
  std::vector<std::string> body_lines;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view t = trim(std::string_view(line).substr(1));
      if (t.starts_with("trait:")) m.trait = meta_value(std::string(t));
      else if (t.starts_with("run_seed:"))
        m.run_seed = static_cast<std::uint64_t>(parse_int(meta_value(std::string(t))));
      else if (t.starts_with("source_split:"))
        m.source_split = meta_value(std::string(t));
      else if (t.starts_with("min_gap:"))
        m.policy.min_gap = parse_double(meta_value(std::string(t)));
      else if (t.starts_with("usage_target:"))
        m.policy.usage_target = parse_double(meta_value(std::string(t)));
      else if (t.starts_with("subsample_fraction:"))
        m.policy.subsample_fraction = parse_double(meta_value(std::string(t)));
      else if (t.starts_with("buckets:")) {
        for (const std::string& spec : split(meta_value(std::string(t)), ';')) {
          const auto parts = split(spec, ':');
          if (parts.size() != 3)
            throw std::runtime_error("pair cache: bad bucket spec: " + spec);
          GapBucket b;
          b.name = parts[0];
          b.lo = parse_double(parts[1]);
          b.hi = parts[2] == "inf" ? std::numeric_limits<double>::infinity()
                                   : parse_double(parts[2]);
          m.policy.buckets.push_back(std::move(b));
        }
      } else if (t.starts_with("participating:"))
        set.participating_ids = comma_list(meta_value(std::string(t)));
      else if (t.starts_with("uncovered:"))
        set.uncovered = comma_list(meta_value(std::string(t)));
      else if (t.starts_with("shortfall:"))
        set.shortfall = parse_int(meta_value(std::string(t))) != 0;
      continue;
    }
    body_lines.push_back(line);
  }
  if (body_lines.empty() || body_lines.front() != "a_id,b_id,gap,bucket,is_fallback")
    throw std::runtime_error("pair cache " + path + ": missing header row");
  std::string body;
  for (std::size_t i = 1; i < body_lines.size(); ++i) {
    body += body_lines[i];
    body += '\n';
  }
  for (const auto& row : parse_csv(body)) {
    if (row.size() != 5)
      throw std::runtime_error("pair cache " + path + ": bad record width");
    Pair p;
    p.a_id = row[0];
    p.b_id = row[1];
    p.gap = parse_double(row[2]);
    p.bucket = row[3];
    p.is_fallback = parse_int(row[4]) != 0;
    set.pairs.push_back(std::move(p));
  }
  if (meta) *meta = std::move(m);
  return set;
}

}  // namespace traitscore
