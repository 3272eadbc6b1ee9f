#include "traitscore/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "traitscore/kernels.hpp"
#include "traitscore/rng.hpp"

namespace traitscore {

void trunk_forward(const TrunkWeights& t, std::span<const double> x,
                   std::vector<double>& preact, std::vector<double>& h) {
  if (x.size() != t.in_dim())
    throw std::invalid_argument("trunk_forward: input length " +
                                std::to_string(x.size()) + " != " +
                                std::to_string(t.in_dim()));
  const auto& k = kern::active();
  const std::size_t d = t.out_dim();
  preact.assign(t.b.begin(), t.b.end());
  for (std::size_t i = 0; i < t.in_dim(); ++i) {
    if (x[i] != 0.0) k.axpy(x[i], t.W.row(i), preact.data(), d);
  }
  h.resize(d);
  k.relu(preact.data(), h.data(), d);
}

std::vector<double> trunk_forward(const TrunkWeights& t,
                                  std::span<const double> x) {
  std::vector<double> preact, h;
  trunk_forward(t, x, preact, h);
  return h;
}

double delta(const UtilityHead& head, std::span<const double> h_a,
             std::span<const double> h_b) {
  if (h_a.size() != head.u.size() || h_b.size() != head.u.size())
    throw std::invalid_argument("delta: embedding/head dimension mismatch");
  const auto& k = kern::active();
  const double s_a = k.dot(head.u.data(), h_a.data(), head.u.size());
  const double s_b = k.dot(head.u.data(), h_b.data(), head.u.size());
  return s_a - s_b;
}

double pairwise_loss(double d) {
  return std::max(0.0, -d) + std::log1p(std::exp(-std::abs(d)));
}

double pairwise_loss_ddelta(double d) {
  if (d >= 0.0) {
    const double e = std::exp(-d);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(d));
}

double l1_loss(double pred, double y) { return std::abs(pred - y); }

double regression_forward(const RegressionHead& head,
                          std::span<const double> head_in,
                          std::vector<double>& z1, std::vector<double>& hid) {
  if (head_in.size() != head.in_dim())
    throw std::invalid_argument("regression_forward: input length " +
                                std::to_string(head_in.size()) + " != " +
                                std::to_string(head.in_dim()));
  const auto& k = kern::active();
  const std::size_t hdim = head.hidden_dim();
  z1.assign(head.b1.begin(), head.b1.end());
  for (std::size_t i = 0; i < head.in_dim(); ++i) {
    if (head_in[i] != 0.0) k.axpy(head_in[i], head.W1.row(i), z1.data(), hdim);
  }
  hid.resize(hdim);
  k.relu(z1.data(), hid.data(), hdim);
  return k.dot(head.w2.data(), hid.data(), hdim) + head.b2;
}

PairwiseGrads zeros_like(const PairwiseModel& m) {
  PairwiseGrads g;
  g.trunk.W = Matrix(m.trunk.W.rows, m.trunk.W.cols);
  g.trunk.b.assign(m.trunk.b.size(), 0.0);
  g.head.u.assign(m.head.u.size(), 0.0);
  return g;
}

AbsoluteGrads zeros_like(const AbsoluteModel& m) {
  AbsoluteGrads g;
  g.trunk.W = Matrix(m.trunk.W.rows, m.trunk.W.cols);
  g.trunk.b.assign(m.trunk.b.size(), 0.0);
  g.head.W1 = Matrix(m.head.W1.rows, m.head.W1.cols);
  g.head.b1.assign(m.head.b1.size(), 0.0);
  g.head.w2.assign(m.head.w2.size(), 0.0);
  g.head.b2 = 0.0;
  return g;
}

namespace {

// dW accumulation for one branch: dW[i,:] += x[i] * dz, db += dz.
void accumulate_trunk(const std::span<const double> x,
                      const std::vector<double>& dz, TrunkWeights& g) {
  const auto& k = kern::active();
  const std::size_t d = g.out_dim();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) k.axpy(x[i], dz.data(), g.W.row(i), d);
  }
  k.axpy(1.0, dz.data(), g.b.data(), d);
}

}  // namespace

double grad_pairwise(const PairwiseModel& m, std::span<const PairExample> batch,
                     PairwiseGrads& out) {
  if (batch.empty()) throw std::invalid_argument("grad_pairwise: empty batch");
  std::fill(out.trunk.W.a.begin(), out.trunk.W.a.end(), 0.0);
  std::fill(out.trunk.b.begin(), out.trunk.b.end(), 0.0);
  std::fill(out.head.u.begin(), out.head.u.end(), 0.0);
  const auto& k = kern::active();
  const std::size_t d = m.trunk.out_dim();

  std::vector<double> za, ha, zb, hb, dh(d), dz(d);
  double loss_sum = 0.0;
  for (const PairExample& ex : batch) {
    trunk_forward(m.trunk, ex.x_a, za, ha);
    trunk_forward(m.trunk, ex.x_b, zb, hb);
    const double s_a = k.dot(m.head.u.data(), ha.data(), d);
    const double s_b = k.dot(m.head.u.data(), hb.data(), d);
    const double dlt = s_a - s_b;
    loss_sum += pairwise_loss(dlt);
    const double gd = pairwise_loss_ddelta(dlt);

    // head: dL/du = gd * (h_a - h_b)
    k.axpy(gd, ha.data(), out.head.u.data(), d);
    k.axpy(-gd, hb.data(), out.head.u.data(), d);

    // branch a: dh_a = gd * u
    std::fill(dh.begin(), dh.end(), 0.0);
    k.axpy(gd, m.head.u.data(), dh.data(), d);
    k.relu_mask(za.data(), dh.data(), dz.data(), d);
    accumulate_trunk(ex.x_a, dz, out.trunk);

    // branch b: dh_b = -gd * u
    std::fill(dh.begin(), dh.end(), 0.0);
    k.axpy(-gd, m.head.u.data(), dh.data(), d);
    k.relu_mask(zb.data(), dh.data(), dz.data(), d);
    accumulate_trunk(ex.x_b, dz, out.trunk);
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  k.scale(out.trunk.W.a.data(), inv, out.trunk.W.a.size());
  k.scale(out.trunk.b.data(), inv, out.trunk.b.size());
  k.scale(out.head.u.data(), inv, out.head.u.size());
  return loss_sum * inv;
}

double grad_absolute(const AbsoluteModel& m, std::span<const AbsExample> batch,
                     AbsoluteGrads& out) {
  if (batch.empty()) throw std::invalid_argument("grad_absolute: empty batch");
  std::fill(out.trunk.W.a.begin(), out.trunk.W.a.end(), 0.0);
  std::fill(out.trunk.b.begin(), out.trunk.b.end(), 0.0);
  std::fill(out.head.W1.a.begin(), out.head.W1.a.end(), 0.0);
  std::fill(out.head.b1.begin(), out.head.b1.end(), 0.0);
  std::fill(out.head.w2.begin(), out.head.w2.end(), 0.0);
  out.head.b2 = 0.0;
  const auto& k = kern::active();
  const std::size_t d = m.trunk.out_dim();
  const std::size_t d_in = m.head.in_dim();
  const std::size_t hdim = m.head.hidden_dim();

  std::vector<double> z, h, head_in, z1, hid, dhid(hdim), dz1(hdim),
      dhin(d_in), dz(d);
  double loss_sum = 0.0;
  for (const AbsExample& ex : batch) {
    trunk_forward(m.trunk, ex.x, z, h);
    if (m.fusion) {
      if (ex.frozen.size() != d_in - d)
        throw std::invalid_argument("grad_absolute: frozen embedding size " +
                                    std::to_string(ex.frozen.size()) +
                                    " != " + std::to_string(d_in - d));
      head_in.assign(h.begin(), h.end());
      head_in.insert(head_in.end(), ex.frozen.begin(), ex.frozen.end());
    } else {
      head_in.assign(h.begin(), h.end());
    }
    const double pred = regression_forward(m.head, head_in, z1, hid);
    const double r = pred - ex.y;
    loss_sum += std::abs(r);
    const double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);

    // output layer
    k.axpy(s, hid.data(), out.head.w2.data(), hdim);
    out.head.b2 += s;

    // hidden layer
    std::fill(dhid.begin(), dhid.end(), 0.0);
    k.axpy(s, m.head.w2.data(), dhid.data(), hdim);
    k.relu_mask(z1.data(), dhid.data(), dz1.data(), hdim);
    for (std::size_t i = 0; i < d_in; ++i) {
      if (head_in[i] != 0.0)
        k.axpy(head_in[i], dz1.data(), out.head.W1.row(i), hdim);
    }
    k.axpy(1.0, dz1.data(), out.head.b1.data(), hdim);

    // back to the trunk; the frozen block (rows >= d) stays where it is
    for (std::size_t i = 0; i < d; ++i)
      dhin[i] = k.dot(m.head.W1.row(i), dz1.data(), hdim);
    k.relu_mask(z.data(), dhin.data(), dz.data(), d);
    accumulate_trunk(ex.x, dz, out.trunk);
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  k.scale(out.trunk.W.a.data(), inv, out.trunk.W.a.size());
  k.scale(out.trunk.b.data(), inv, out.trunk.b.size());
  k.scale(out.head.W1.a.data(), inv, out.head.W1.a.size());
  k.scale(out.head.b1.data(), inv, out.head.b1.size());
  k.scale(out.head.w2.data(), inv, out.head.w2.size());
  out.head.b2 *= inv;
  return loss_sum * inv;
}

std::vector<ParamView> param_views(PairwiseModel& m, const PairwiseGrads& g) {
  return {
      {m.trunk.W.a.data(), g.trunk.W.a.data(), m.trunk.W.a.size(), true},
      {m.trunk.b.data(), g.trunk.b.data(), m.trunk.b.size(), false},
      {m.head.u.data(), g.head.u.data(), m.head.u.size(), true},
  };
}

std::vector<ParamView> param_views(AbsoluteModel& m, const AbsoluteGrads& g) {
  return {
      {m.trunk.W.a.data(), g.trunk.W.a.data(), m.trunk.W.a.size(), true},
      {m.trunk.b.data(), g.trunk.b.data(), m.trunk.b.size(), false},
      {m.head.W1.a.data(), g.head.W1.a.data(), m.head.W1.a.size(), true},
      {m.head.b1.data(), g.head.b1.data(), m.head.b1.size(), false},
      {m.head.w2.data(), g.head.w2.data(), m.head.w2.size(), true},
      {&m.head.b2, &g.head.b2, 1, false},
  };
}

AdamWState::AdamWState(AdamWConfig cfg, const std::vector<ParamView>& shapes)
    : cfg_(cfg) {
  m_.reserve(shapes.size());
  v_.reserve(shapes.size());
  for (const ParamView& p : shapes) {
    m_.emplace_back(p.n, 0.0);
    v_.emplace_back(p.n, 0.0);
  }
}

void AdamWState::step(const std::vector<ParamView>& params) {
  if (params.size() != m_.size())
    throw std::invalid_argument("adamw_step: parameter count mismatch");
  ++step_;
  const double bc1 =
      1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(step_)));
  const double bc2 =
      1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(step_)));
  const auto& k = kern::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamView& p = params[i];
    if (p.n != m_[i].size())
      throw std::invalid_argument("adamw_step: parameter shape mismatch");
    kern::AdamScalars s{cfg_.lr,    p.decay ? cfg_.weight_decay : 0.0,
                        cfg_.beta1, cfg_.beta2,
                        cfg_.eps,   bc1,
                        bc2};
    k.adamw(p.p, m_[i].data(), v_[i].data(), p.g, p.n, s);
  }
}

double grad_check(const std::vector<ParamView>& params,
                  const std::function<double()>& loss_fn, double epsilon) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("grad_check: epsilon must be positive");
  double worst = 0.0;
  for (const ParamView& p : params) {
    for (std::size_t i = 0; i < p.n; ++i) {
      const double saved = p.p[i];
      p.p[i] = saved + epsilon;
      const double up = loss_fn();
      p.p[i] = saved - epsilon;
      const double down = loss_fn();
      p.p[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p.g[i];
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

double grad_check_pairwise(PairwiseModel& m, std::span<const PairExample> batch,
                           double epsilon) {
  PairwiseGrads g = zeros_like(m);
  grad_pairwise(m, batch, g);
  auto views = param_views(m, g);
  return grad_check(
      views,
      [&] {
        PairwiseGrads scratch = zeros_like(m);
        return grad_pairwise(m, batch, scratch);
      },
      epsilon);
}

double grad_check_absolute(AbsoluteModel& m, std::span<const AbsExample> batch,
                           double epsilon) {
  AbsoluteGrads g = zeros_like(m);
  grad_absolute(m, batch, g);
  auto views = param_views(m, g);
  return grad_check(
      views,
      [&] {
        AbsoluteGrads scratch = zeros_like(m);
        return grad_absolute(m, batch, scratch);
      },
      epsilon);
}

Matrix init_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  const double bound =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  for (double& w : m.a) w = rng.uniform_real(-bound, bound);
  return m;
}

std::vector<double> init_weight_vector(std::size_t n, std::uint64_t seed) {
  Matrix m = init_matrix(n, 1, seed);
  return m.a;
}

TrunkWeights init_trunk(std::size_t in_dim, std::size_t out_dim,
                        std::uint64_t seed) {
  if (out_dim < 2) throw std::invalid_argument("trunk width must be >= 2");
  TrunkWeights t;
  t.W = init_matrix(in_dim, out_dim, seed);
  t.b.assign(out_dim, 0.0);
  return t;
}

UtilityHead init_utility(std::size_t d, std::uint64_t seed) {
  return {init_weight_vector(d, seed)};
}

RegressionHead init_regression(std::size_t d_in, std::uint64_t seed) {
  RegressionHead h;
  const std::size_t hidden = d_in / 2;
  h.W1 = init_matrix(d_in, hidden, derive_seed(seed, "reg.W1"));
  h.b1.assign(hidden, 0.0);
  h.w2 = init_weight_vector(hidden, derive_seed(seed, "reg.w2"));
  h.b2 = 0.0;
  return h;
}

// ---- checkpoint I/O ----

namespace {

constexpr char kMagic[8] = {'T', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::ifstream& in) {
  std::vector<double> v(get_u64(in));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  std::string s(get_u64(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}

void put_seeds(std::ofstream& out, const SeedLineage& seeds) {
  put_u64(out, seeds.entries.size());
  for (const auto& [tag, seed] : seeds.entries) {
    put_string(out, tag);
    put_u64(out, seed);
  }
}

SeedLineage get_seeds(std::ifstream& in) {
  SeedLineage seeds;
  const std::uint64_t n = get_u64(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string tag = get_string(in);
    const std::uint64_t s = get_u64(in);
    seeds.entries.emplace_back(std::move(tag), s);
  }
  return seeds;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  return in;
}

void put_trunk(std::ofstream& out, const TrunkWeights& t) {
  put_u64(out, t.W.rows);
  put_u64(out, t.W.cols);
  put_doubles(out, t.W.a);
  put_doubles(out, t.b);
}

TrunkWeights get_trunk(std::ifstream& in) {
  TrunkWeights t;
  t.W.rows = get_u64(in);
  t.W.cols = get_u64(in);
  t.W.a = get_doubles(in);
  t.b = get_doubles(in);
  if (t.W.a.size() != t.W.rows * t.W.cols || t.b.size() != t.W.cols)
    throw std::runtime_error("checkpoint: inconsistent trunk shapes");
  return t;
}

}  // namespace

void save_pairwise_checkpoint(const std::string& path, const PairwiseModel& m,
                              const SeedLineage& seeds) {
  std::ofstream out = open_out(path);
  out.put('P');
  put_trunk(out, m.trunk);
  put_doubles(out, m.head.u);
  put_seeds(out, seeds);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

PairwiseModel load_pairwise_checkpoint(const std::string& path,
                                       SeedLineage* seeds) {
  std::ifstream in = open_in(path);
  if (in.get() != 'P')
    throw std::runtime_error("checkpoint " + path + " is not a pairwise model");
  PairwiseModel m;
  m.trunk = get_trunk(in);
  m.head.u = get_doubles(in);
  SeedLineage lineage = get_seeds(in);
  if (!in) throw std::runtime_error("checkpoint read failed: " + path);
  if (seeds) *seeds = std::move(lineage);
  return m;
}

void save_absolute_checkpoint(const std::string& path, const AbsoluteModel& m,
                              const SeedLineage& seeds) {
  std::ofstream out = open_out(path);
  out.put('A');
  out.put(m.fusion ? 1 : 0);
  put_trunk(out, m.trunk);
  put_u64(out, m.head.W1.rows);
  put_u64(out, m.head.W1.cols);
  put_doubles(out, m.head.W1.a);
  put_doubles(out, m.head.b1);
  put_doubles(out, m.head.w2);
  put_doubles(out, {m.head.b2});
  put_seeds(out, seeds);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

AbsoluteModel load_absolute_checkpoint(const std::string& path,
                                       SeedLineage* seeds) {
  std::ifstream in = open_in(path);
  if (in.get() != 'A')
    throw std::runtime_error("checkpoint " + path +
                             " is not an absolute-scorer model");
  AbsoluteModel m;
  m.fusion = in.get() != 0;
  m.trunk = get_trunk(in);
  m.head.W1.rows = get_u64(in);
  m.head.W1.cols = get_u64(in);
  m.head.W1.a = get_doubles(in);
  m.head.b1 = get_doubles(in);
  m.head.w2 = get_doubles(in);
  const std::vector<double> b2 = get_doubles(in);
  if (b2.size() != 1) throw std::runtime_error("checkpoint: bad b2 block");
  m.head.b2 = b2[0];
  SeedLineage lineage = get_seeds(in);
  if (!in) throw std::runtime_error("checkpoint read failed: " + path);
  if (seeds) *seeds = std::move(lineage);
  return m;
}

}  // namespace traitscore
