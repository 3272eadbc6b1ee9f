#include "traitscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "traitscore/textio.hpp"

namespace traitscore {

int GridSpec::categories() const {
  return static_cast<int>(std::lround(2.0 * (hi - lo))) + 1;
}

int GridSpec::index_of(double v) const {
  const double scaled = 2.0 * (v - lo);
  const int idx = static_cast<int>(std::lround(scaled));
  if (std::abs(scaled - idx) > 1e-9 || idx < 0 || idx >= categories())
    throw std::invalid_argument("value off the label grid: " + fmt_double(v));
  return idx;
}

bool GridSpec::contains(double v) const {
  const double scaled = 2.0 * (v - lo);
  const int idx = static_cast<int>(std::lround(scaled));
  return std::abs(scaled - idx) <= 1e-9 && idx >= 0 && idx < categories();
}

bool on_half_grid(double v) {
  const double scaled = 2.0 * v;
  return scaled == std::round(scaled);
}

double snap_half_up(double v) {
  return std::floor(2.0 * v + 0.5) / 2.0;
}

double qwk(std::span<const double> truth, std::span<const double> pred,
           const GridSpec& grid) {
  if (truth.size() != pred.size())
    throw std::invalid_argument("qwk: length mismatch");
  if (truth.size() < 2) throw std::invalid_argument("qwk: need >= 2 items");

  const int k = grid.categories();
  const std::size_t n = truth.size();
  std::vector<double> obs(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> pt(k, 0.0), pp(k, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int t = grid.index_of(truth[i]);
    const int p = grid.index_of(pred[i]);
    obs[static_cast<std::size_t>(t) * k + p] += w;
    pt[t] += w;
    pp[p] += w;
  }

  const double norm = static_cast<double>(k - 1) * (k - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double wij = static_cast<double>(i - j) * (i - j) / norm;
      num += wij * obs[static_cast<std::size_t>(i) * k + j];
      den += wij * pt[i] * pp[j];
    }
  }
  if (den == 0.0)
    throw degenerate_input_error(
        "qwk: both labelings concentrate on one category");
  return 1.0 - num / den;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson: need >= 2 items");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw degenerate_input_error("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    // positions i..j (0-based) share the mean 1-based rank
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("spearman: length mismatch");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

}  // namespace traitscore
