#include <cmath>
#include <vector>

#include "doctest.h"
#include "traitscore/kernels.hpp"
#include "traitscore/rng.hpp"

using namespace traitscore;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform_real(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("scalar dot matches a naive accumulation within tolerance") {
  Rng rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 64u, 257u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    double naive = 0.0;
    for (std::size_t i = 0; i < n; ++i) naive += a[i] * b[i];
    const double got = kern::scalar_kernels.dot(a.data(), b.data(), n);
    CHECK(got == doctest::Approx(naive).epsilon(1e-12));
  }
}

#if defined(__x86_64__)
TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
  if (!kern::avx2_supported()) return;
  Rng rng(11);
  const kern::Kernels& s = kern::scalar_kernels;
  const kern::Kernels& x = kern::avx2_kernels;

  for (std::size_t n : {1u, 2u, 4u, 7u, 8u, 63u, 64u, 100u, 1021u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    CHECK(s.dot(a.data(), b.data(), n) == x.dot(a.data(), b.data(), n));

    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    s.axpy(0.37, a.data(), y1.data(), n);
    x.axpy(0.37, a.data(), y2.data(), n);
    CHECK(y1 == y2);

    auto z1 = a;
    auto z2 = a;
    s.scale(z1.data(), -1.618, n);
    x.scale(z2.data(), -1.618, n);
    CHECK(z1 == z2);

    std::vector<double> h1(n), h2(n);
    s.relu(a.data(), h1.data(), n);
    x.relu(a.data(), h2.data(), n);
    CHECK(h1 == h2);

    std::vector<double> d1(n), d2(n);
    s.relu_mask(a.data(), b.data(), d1.data(), n);
    x.relu_mask(a.data(), b.data(), d2.data(), n);
    CHECK(d1 == d2);

    kern::AdamScalars sc{2e-4, 0.01, 0.9, 0.999, 1e-8, 1.0 / (1 - 0.9),
                         1.0 / (1 - 0.999)};
    auto p1 = random_vec(rng, n), m1 = random_vec(rng, n, 0.0, 1.0),
         v1 = random_vec(rng, n, 0.0, 1.0), g = random_vec(rng, n);
    auto p2 = p1, m2 = m1, v2 = v1;
    s.adamw(p1.data(), m1.data(), v1.data(), g.data(), n, sc);
    x.adamw(p2.data(), m2.data(), v2.data(), g.data(), n, sc);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }
}
#endif

TEST_CASE("relu clamps negatives and zero to zero") {
  const std::vector<double> z = {-1.0, -0.0, 0.0, 0.5, 3.0};
  std::vector<double> h(z.size());
  kern::active().relu(z.data(), h.data(), z.size());
  CHECK(h == std::vector<double>{0.0, 0.0, 0.0, 0.5, 3.0});
}

TEST_CASE("backend dispatch reports a known backend and can be forced") {
  const std::string_view name = kern::active_name();
  CHECK((name == "scalar" || name == "avx2"));
  kern::force_backend("scalar");
  CHECK(kern::active_name() == "scalar");
  if (kern::avx2_supported()) {
    kern::force_backend("avx2");
    CHECK(kern::active_name() == "avx2");
  }
  CHECK_THROWS(kern::force_backend("sse9"));
}
