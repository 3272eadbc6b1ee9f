#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "traitscore/metrics.hpp"
#include "traitscore/rng.hpp"

using namespace traitscore;

namespace {

// Independent textbook-formula oracle: explicit K x K weight, observed, and
// expected matrices built from raw counts. Kept deliberately different from
// the production code path.
double qwk_oracle(const std::vector<double>& truth,
                  const std::vector<double>& pred, double lo, double hi) {
  const int k = static_cast<int>(std::lround(2.0 * (hi - lo))) + 1;
  auto cat = [&](double v) { return static_cast<int>(std::lround(2.0 * (v - lo))); };
  std::vector<std::vector<double>> obs(k, std::vector<double>(k, 0.0));
  std::vector<double> ht(k, 0.0), hp(k, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    obs[cat(truth[i])][cat(pred[i])] += 1.0;
    ht[cat(truth[i])] += 1.0;
    hp[cat(pred[i])] += 1.0;
  }
  const double n = static_cast<double>(truth.size());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double w =
          static_cast<double>((i - j) * (i - j)) / ((k - 1.0) * (k - 1.0));
      num += w * obs[i][j] / n;
      den += w * (ht[i] * hp[j] / (n * n));
    }
  }
  return 1.0 - num / den;
}

std::vector<double> random_grid_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 1.0 + 0.5 * static_cast<double>(rng.uniform_index(9));
  return v;
}

}  // namespace

TEST_CASE("grid spec category bookkeeping") {
  const GridSpec g{1.0, 5.0};
  CHECK(g.categories() == 9);
  CHECK(g.index_of(1.0) == 0);
  CHECK(g.index_of(3.5) == 5);
  CHECK(g.index_of(5.0) == 8);
  CHECK_THROWS(g.index_of(3.25));
  CHECK_THROWS(g.index_of(5.5));
}

TEST_CASE("snap_half_up pins the midpoint rule") {
  CHECK(snap_half_up(3.74) == 3.5);
  CHECK(snap_half_up(3.76) == 4.0);
  CHECK(snap_half_up(3.75) == 4.0);   // exact midpoint rounds up
  CHECK(snap_half_up(-0.25) == 0.0);  // toward +inf, not away from zero
  CHECK(snap_half_up(2.0) == 2.0);
}

TEST_CASE("qwk: perfect agreement and full disagreement") {
  const GridSpec g{1.0, 5.0};
  const std::vector<double> y = {1.0, 2.5, 4.0, 5.0, 3.0};
  CHECK(qwk(y, y, g) == doctest::Approx(1.0));

  const std::vector<double> t = {1.0, 5.0};
  const std::vector<double> p = {5.0, 1.0};
  CHECK(qwk(t, p, g) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("qwk agrees with the textbook oracle on random vectors") {
  Rng rng(1234);
  const GridSpec g{1.0, 5.0};
  for (int rep = 0; rep < 100; ++rep) {
    auto truth = random_grid_vec(rng, 200);
    auto pred = random_grid_vec(rng, 200);
    const double mine = qwk(truth, pred, g);
    const double ref = qwk_oracle(truth, pred, 1.0, 5.0);
    CHECK(std::abs(mine - ref) < 1e-12);
    CHECK(qwk(pred, truth, g) == doctest::Approx(mine).epsilon(1e-12));
    CHECK(mine <= 1.0);
  }
}

TEST_CASE("qwk degenerate input raises, never NaNs") {
  const GridSpec g{1.0, 5.0};
  const std::vector<double> t = {3.0, 3.0, 3.0};
  CHECK_THROWS_AS((void)qwk(t, t, g), degenerate_input_error);
  // Both constant but different categories: denominator is nonzero.
  const std::vector<double> p = {4.0, 4.0, 4.0};
  CHECK(qwk(t, p, g) == doctest::Approx(0.0));
}

TEST_CASE("pearson basics and oracle") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 * v + 1.0);
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  for (double& v : y) v = -v;
  CHECK(pearson(x, y) == doctest::Approx(-1.0));

  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(50), b(50);
    for (auto& v : a) v = rng.uniform_real(-3, 3);
    for (auto& v : b) v = rng.uniform_real(-3, 3);
    // two-pass oracle
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= 50; mb /= 50;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += (a[i] - ma) * (b[i] - mb);
      da += (a[i] - ma) * (a[i] - ma);
      db += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(std::abs(pearson(a, b) - num / std::sqrt(da * db)) < 1e-12);
  }

  const std::vector<double> c = {2.0, 2.0, 2.0};
  CHECK_THROWS_AS((void)pearson(c, x), degenerate_input_error);
}

TEST_CASE("spearman: tie ranks and monotone invariance") {
  const std::vector<double> x = {1.0, 2.0, 2.0, 3.0};
  const auto ranks = average_ranks(x);
  CHECK(ranks == std::vector<double>{1.0, 2.5, 2.5, 4.0});

  Rng rng(5);
  std::vector<double> a(40), b(40);
  for (auto& v : a) v = rng.uniform_real(-2, 2);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::exp(a[i]);
  CHECK(spearman(a, b) == doctest::Approx(1.0));

  // brute-force oracle on tied data
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> u(30), w(30);
    for (auto& v : u) v = 0.5 * static_cast<double>(rng.uniform_index(6));
    for (auto& v : w) v = 0.5 * static_cast<double>(rng.uniform_index(6));
    bool u_const = std::all_of(u.begin(), u.end(), [&](double v) { return v == u[0]; });
    bool w_const = std::all_of(w.begin(), w.end(), [&](double v) { return v == w[0]; });
    if (u_const || w_const) continue;
    CHECK(std::abs(spearman(u, w) - pearson(average_ranks(u), average_ranks(w))) <
          1e-12);
  }
}
