#include <cmath>
#include <vector>

#include "doctest.h"
#include "traitscore/net.hpp"
#include "traitscore/rng.hpp"

using namespace traitscore;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform_real(lo, hi);
  return v;
}

PairwiseModel small_pairwise(Rng& rng, std::size_t f, std::size_t d) {
  PairwiseModel m;
  m.trunk = init_trunk(f, d, rng.next_u64());
  // Random bias so ReLU sees both active and clamped units.
  for (double& b : m.trunk.b) b = rng.uniform_real(-0.3, 0.3);
  m.head = init_utility(d, rng.next_u64());
  return m;
}

AbsoluteModel small_absolute(Rng& rng, std::size_t f, std::size_t d,
                             bool fusion) {
  AbsoluteModel m;
  m.trunk = init_trunk(f, d, rng.next_u64());
  for (double& b : m.trunk.b) b = rng.uniform_real(-0.3, 0.3);
  m.head = init_regression(fusion ? 2 * d : d, rng.next_u64());
  for (double& b : m.head.b1) b = rng.uniform_real(-0.2, 0.2);
  m.head.b2 = rng.uniform_real(-0.5, 0.5);
  m.fusion = fusion;
  return m;
}

}  // namespace

TEST_CASE("trunk_forward matches a triple-loop oracle") {
  Rng rng(21);
  const std::size_t f = 13, d = 7;
  TrunkWeights t = init_trunk(f, d, 555);
  for (double& b : t.b) b = rng.uniform_real(-1, 1);
  const auto x = random_vec(rng, f);
  const auto h = trunk_forward(t, x);
  for (std::size_t j = 0; j < d; ++j) {
    double z = t.b[j];
    for (std::size_t i = 0; i < f; ++i) z += t.W.at(i, j) * x[i];
    const double want = z > 0.0 ? z : 0.0;
    CHECK(h[j] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("trunk_forward edge cases") {
  TrunkWeights t;
  t.W = Matrix(4, 3);
  t.b = {0.0, -0.5, 0.25};
  const std::vector<double> x = {1.0, -1.0, 0.5, 2.0};
  const auto h = trunk_forward(t, x);
  CHECK(h == std::vector<double>{0.0, 0.0, 0.25});  // W=0: ReLU(b)
  CHECK_THROWS(trunk_forward(t, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("delta is antisymmetric bit-exactly") {
  Rng rng(31);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t d = 1 + rng.uniform_index(16);
    UtilityHead head{random_vec(rng, d, -3, 3)};
    const auto ha = random_vec(rng, d, -5, 5);
    const auto hb = random_vec(rng, d, -5, 5);
    const double ab = delta(head, ha, hb);
    const double ba = delta(head, hb, ha);
    CHECK(ab == -ba);  // exact, including signed zero magnitude
  }
  UtilityHead head{{1.0, 0.0, 0.0}};
  const std::vector<double> ha = {2.0, 9.0, -4.0};
  const std::vector<double> hb = {0.5, 1.0, 7.0};
  CHECK(delta(head, ha, hb) == doctest::Approx(1.5));
  CHECK(delta(head, ha, ha) == 0.0);
}

TEST_CASE("pairwise loss values and tails") {
  CHECK(pairwise_loss(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(pairwise_loss(50.0) < 1e-20);
  CHECK(pairwise_loss(50.0) > 0.0);
  CHECK(pairwise_loss(-50.0) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(std::isfinite(pairwise_loss(-745.0)));
  // strictly decreasing
  double prev = pairwise_loss(-30.0);
  for (double d = -29.5; d <= 30.0; d += 0.5) {
    const double cur = pairwise_loss(d);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("l1 loss basics") {
  CHECK(l1_loss(3.0, 3.0) == 0.0);
  CHECK(l1_loss(2.5, 4.0) == doctest::Approx(1.5));
}

TEST_CASE("pairwise gradients match central finite differences") {
  Rng rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    PairwiseModel m = small_pairwise(rng, 11, 6);
    std::vector<std::vector<double>> store;
    std::vector<PairExample> batch;
    for (int i = 0; i < 6; ++i) {
      store.push_back(random_vec(rng, 11));
      store.push_back(random_vec(rng, 11));
    }
    for (int i = 0; i < 6; ++i)
      batch.push_back({store[2 * i], store[2 * i + 1]});
    CHECK(grad_check_pairwise(m, batch, 1e-5) < 1e-4);
  }
}

TEST_CASE("absolute gradients match central finite differences away from kinks") {
  Rng rng(78);
  for (int rep = 0; rep < 5; ++rep) {
    const bool fusion = rep % 2 == 1;
    AbsoluteModel m = small_absolute(rng, 9, 6, fusion);
    std::vector<std::vector<double>> store;
    std::vector<AbsExample> batch;
    for (int i = 0; i < 6; ++i) {
      store.push_back(random_vec(rng, 9));
      store.push_back(random_vec(rng, 6));
    }
    for (int i = 0; i < 6; ++i) {
      AbsExample ex;
      ex.x = store[2 * i];
      if (fusion) ex.frozen = store[2 * i + 1];
      ex.y = rng.uniform_real(1.0, 5.0);
      batch.push_back(ex);
    }
    // keep every item away from the |.| kink
    AbsoluteGrads g = zeros_like(m);
    grad_absolute(m, batch, g);
    bool near_kink = false;
    for (AbsExample& ex : batch) {
      std::vector<double> z1, hid;
      auto h = trunk_forward(m.trunk, ex.x);
      if (fusion) h.insert(h.end(), ex.frozen.begin(), ex.frozen.end());
      if (std::abs(regression_forward(m.head, h, z1, hid) - ex.y) < 1e-3)
        near_kink = true;
    }
    if (near_kink) continue;
    CHECK(grad_check_absolute(m, batch, 1e-5) < 1e-4);
  }
}

TEST_CASE("saturated pairs produce vanishing gradients") {
  Rng rng(79);
  PairwiseModel m = small_pairwise(rng, 5, 4);
  // Scale the head so every delta is huge and positive.
  std::vector<double> xa = {1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> xb(5, 0.0);
  auto ha = trunk_forward(m.trunk, xa);
  auto hb = trunk_forward(m.trunk, xb);
  double d = delta(m.head, ha, hb);
  if (d < 0) {
    for (double& u : m.head.u) u = -u;
    d = -d;
  }
  const double scale = 200.0 / std::max(d, 1e-3);
  for (double& u : m.head.u) u *= scale;

  std::vector<PairExample> batch = {{xa, xb}};
  PairwiseGrads g = zeros_like(m);
  grad_pairwise(m, batch, g);
  double norm = 0.0;
  for (double v : g.head.u) norm += v * v;
  for (double v : g.trunk.W.a) norm += v * v;
  for (double v : g.trunk.b) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("mirrored batch with negated head yields negated head gradient") {
  Rng rng(80);
  PairwiseModel m = small_pairwise(rng, 7, 5);
  auto xa = random_vec(rng, 7);
  auto xb = random_vec(rng, 7);
  std::vector<PairExample> sym = {{xa, xb}, {xb, xa}};

  PairwiseGrads g1 = zeros_like(m);
  grad_pairwise(m, sym, g1);
  PairwiseModel neg = m;
  for (double& u : neg.head.u) u = -u;
  PairwiseGrads g2 = zeros_like(neg);
  grad_pairwise(neg, sym, g2);
  for (std::size_t i = 0; i < g1.head.u.size(); ++i)
    CHECK(g2.head.u[i] == doctest::Approx(-g1.head.u[i]).epsilon(1e-12));
}

TEST_CASE("L1 subgradient convention: exact fit gives zero gradient") {
  AbsoluteModel m;
  m.trunk.W = Matrix(3, 2);
  m.trunk.b = {0.0, 0.0};
  m.head = init_regression(2, 42);
  m.head.b2 = 2.5;
  // zero trunk: pred = b2 for any input
  std::vector<double> x = {0.3, -0.7, 0.2};
  std::vector<AbsExample> batch = {{x, {}, 2.5}};
  AbsoluteGrads g = zeros_like(m);
  grad_absolute(m, batch, g);
  double norm = 0.0;
  for (double v : g.head.W1.a) norm += std::abs(v);
  for (double v : g.head.b1) norm += std::abs(v);
  for (double v : g.head.w2) norm += std::abs(v);
  norm += std::abs(g.head.b2);
  CHECK(norm == 0.0);
}

TEST_CASE("fusion frozen block receives no gradient (only W1 rows see it)") {
  Rng rng(81);
  AbsoluteModel m = small_absolute(rng, 6, 4, true);
  auto x = random_vec(rng, 6);
  auto frozen = random_vec(rng, 4);
  std::vector<AbsExample> batch = {{x, frozen, 3.0}};
  AbsoluteGrads g = zeros_like(m);
  grad_absolute(m, batch, g);
  // Trunk gradient shapes cover only the live trunk; there is no gradient
  // slot for the frozen inputs at all. Check the trunk grad is finite and
  // the computation ran.
  CHECK(g.trunk.W.rows == 6);
  CHECK(g.head.W1.rows == 8);
}

TEST_CASE("adamw identities") {
  Rng rng(90);
  PairwiseModel m = small_pairwise(rng, 4, 3);
  PairwiseGrads g = zeros_like(m);  // zero gradients

  SUBCASE("zero gradient, zero decay is the identity") {
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    const PairwiseModel before = m;
    AdamWState opt(cfg, param_views(m, g));
    opt.step(param_views(m, g));
    CHECK(m.trunk.W.a == before.trunk.W.a);
    CHECK(m.trunk.b == before.trunk.b);
    CHECK(m.head.u == before.head.u);
  }

  SUBCASE("zero gradient with decay shrinks weights by (1 - lr*wd), not biases") {
    AdamWConfig cfg;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.01;
    PairwiseModel before = m;
    for (double& b : m.trunk.b) b = 0.75;
    before.trunk.b = m.trunk.b;
    AdamWState opt(cfg, param_views(m, g));
    opt.step(param_views(m, g));
    for (std::size_t i = 0; i < m.trunk.W.a.size(); ++i)
      CHECK(m.trunk.W.a[i] ==
            doctest::Approx(before.trunk.W.a[i] * (1.0 - 0.5 * 0.01)).epsilon(1e-15));
    CHECK(m.trunk.b == before.trunk.b);  // biases excluded from decay
  }

  SUBCASE("first step from zero moments moves by -lr * g/(|g|+eps)") {
    AdamWConfig cfg;
    cfg.lr = 2e-3;
    cfg.weight_decay = 0.0;
    PairwiseGrads g2 = zeros_like(m);
    Rng r2(4);
    for (double& v : g2.head.u) v = r2.uniform_real(-1, 1);
    const PairwiseModel before = m;
    AdamWState opt(cfg, param_views(m, g2));
    opt.step(param_views(m, g2));
    for (std::size_t i = 0; i < m.head.u.size(); ++i) {
      const double gi = g2.head.u[i];
      const double want =
          before.head.u[i] - cfg.lr * gi / (std::abs(gi) + cfg.eps);
      CHECK(m.head.u[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("grad_check guards against a degenerate step") {
  Rng rng(91);
  PairwiseModel m = small_pairwise(rng, 4, 3);
  auto xa = random_vec(rng, 4);
  auto xb = random_vec(rng, 4);
  std::vector<PairExample> batch = {{xa, xb}};
  CHECK_THROWS(grad_check_pairwise(m, batch, 0.0));
}

TEST_CASE("early stopper: strict min_delta boundary") {
  EarlyStopper<int> s(3, 5e-4);
  CHECK(s.update(0.5, 1, 1));
  CHECK(s.update(0.6, 2, 2));
  CHECK(s.update(0.6004, 3, 3));  // not an improvement, streak 1 <= patience
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_metric() == 0.6);
  CHECK(s.best_snapshot() == 2);
}

TEST_CASE("early stopper: stops after patience+1 non-improving epochs") {
  EarlyStopper<int> s(3, 5e-4);
  CHECK(s.update(0.7, 1, 1));
  CHECK(s.update(0.69, 2, 2));
  CHECK(s.update(0.69, 3, 3));
  CHECK(s.update(0.69, 4, 4));
  CHECK_FALSE(s.update(0.69, 5, 5));  // 4th non-improving epoch stops
  CHECK(s.best_epoch() == 1);
  CHECK(s.best_snapshot() == 1);
}

TEST_CASE("early stopper: monotone metrics never stop") {
  EarlyStopper<int> s(2, 1e-6);
  for (int e = 1; e <= 50; ++e) CHECK(s.update(0.01 * e, e, e));
  CHECK(s.best_epoch() == 50);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(92);
  PairwiseModel pm = small_pairwise(rng, 10, 6);
  SeedLineage seeds;
  seeds.entries = {{"run", 42}, {"stage1.trunk", 7}};
  const std::string dir = "test_ckpt_tmp";
  save_pairwise_checkpoint(dir + ".p.bin", pm, seeds);
  SeedLineage got_seeds;
  PairwiseModel pm2 = load_pairwise_checkpoint(dir + ".p.bin", &got_seeds);
  CHECK(pm2.trunk.W.a == pm.trunk.W.a);
  CHECK(pm2.trunk.b == pm.trunk.b);
  CHECK(pm2.head.u == pm.head.u);
  CHECK(got_seeds.entries == seeds.entries);

  AbsoluteModel am = small_absolute(rng, 10, 6, true);
  save_absolute_checkpoint(dir + ".a.bin", am, seeds);
  AbsoluteModel am2 = load_absolute_checkpoint(dir + ".a.bin");
  CHECK(am2.fusion == am.fusion);
  CHECK(am2.trunk.W.a == am.trunk.W.a);
  CHECK(am2.head.W1.a == am.head.W1.a);
  CHECK(am2.head.b1 == am.head.b1);
  CHECK(am2.head.w2 == am.head.w2);
  CHECK(am2.head.b2 == am.head.b2);
  CHECK_THROWS(load_pairwise_checkpoint(dir + ".a.bin"));
}
