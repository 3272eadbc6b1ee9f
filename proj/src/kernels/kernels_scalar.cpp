#include <cmath>

#include "traitscore/kernels.hpp"

// Reference kernels. The dot reduction runs four independent accumulators in
// round-robin and combines them as ((l0+l1)+(l2+l3))+tail; the AVX2 variant
// reproduces exactly that association, which is what makes the two backends
// bit-identical.

namespace traitscore::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  double tail = 0.0;
  for (std::size_t i = n4; i < n; ++i) tail += a[i] * b[i];
  return ((l0 + l1) + (l2 + l3)) + tail;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_scalar(double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * a;
}

void relu_scalar(const double* z, double* h, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) h[i] = (z[i] > 0.0) ? z[i] : 0.0;
}

void relu_mask_scalar(const double* z, const double* dh, double* dz,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dz[i] = (z[i] > 0.0) ? dh[i] : 0.0;
}

void adamw_scalar(double* p, double* m, double* v, const double* g,
                  std::size_t n, const AdamScalars& s) {
  const double decay = 1.0 - s.lr * s.weight_decay;
  const double one_m_b1 = 1.0 - s.beta1;
  const double one_m_b2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = s.beta1 * m[i] + one_m_b1 * gi;
    v[i] = s.beta2 * v[i] + one_m_b2 * (gi * gi);
    const double mh = m[i] * s.bc1;
    const double vh = v[i] * s.bc2;
    const double denom = std::sqrt(vh) + s.eps;
    p[i] = p[i] * decay - s.lr * (mh / denom);
  }
}

}  // namespace

const Kernels scalar_kernels = {dot_scalar,      axpy_scalar,
                                scale_scalar,    relu_scalar,
                                relu_mask_scalar, adamw_scalar};

}  // namespace traitscore::kern
