#if defined(__x86_64__)

#include <immintrin.h>

#include "traitscore/kernels.hpp"

// AVX2 variants. Compiled with -mavx2 only (no -mfma) and -ffp-contract=off:
// each mul/add below is a separately rounded operation, matching the scalar
// reference operation-for-operation.

namespace traitscore::kern {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double tail = 0.0;
  for (std::size_t i = n4; i < n; ++i) tail += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_avx2(double* x, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  for (std::size_t i = n4; i < n; ++i) x[i] = x[i] * a;
}

void relu_avx2(const double* z, double* h, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vz = _mm256_loadu_pd(z + i);
    const __m256d gt = _mm256_cmp_pd(vz, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(h + i, _mm256_and_pd(vz, gt));
  }
  for (std::size_t i = n4; i < n; ++i) h[i] = (z[i] > 0.0) ? z[i] : 0.0;
}

void relu_mask_avx2(const double* z, const double* dh, double* dz,
                    std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vz = _mm256_loadu_pd(z + i);
    const __m256d gt = _mm256_cmp_pd(vz, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dz + i, _mm256_and_pd(_mm256_loadu_pd(dh + i), gt));
  }
  for (std::size_t i = n4; i < n; ++i) dz[i] = (z[i] > 0.0) ? dh[i] : 0.0;
}

void adamw_avx2(double* p, double* m, double* v, const double* g,
                std::size_t n, const AdamScalars& s) {
  const __m256d decay = _mm256_set1_pd(1.0 - s.lr * s.weight_decay);
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d bc1 = _mm256_set1_pd(s.bc1);
  const __m256d bc2 = _mm256_set1_pd(s.bc2);
  const __m256d eps = _mm256_set1_pd(s.eps);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_add_pd(_mm256_mul_pd(b1, mi), _mm256_mul_pd(omb1, gi));
    vi = _mm256_add_pd(_mm256_mul_pd(b2, vi),
                       _mm256_mul_pd(omb2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mh = _mm256_mul_pd(mi, bc1);
    const __m256d vh = _mm256_mul_pd(vi, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vh), eps);
    const __m256d pi = _mm256_loadu_pd(p + i);
    _mm256_storeu_pd(
        p + i, _mm256_sub_pd(_mm256_mul_pd(pi, decay),
                             _mm256_mul_pd(lr, _mm256_div_pd(mh, denom))));
  }
  if (n4 < n) {
    AdamScalars tail = s;
    scalar_kernels.adamw(p + n4, m + n4, v + n4, g + n4, n - n4, tail);
  }
}

}  // namespace

const Kernels avx2_kernels = {dot_avx2,      axpy_avx2,      scale_avx2,
                              relu_avx2,     relu_mask_avx2, adamw_avx2};

}  // namespace traitscore::kern

#endif  // __x86_64__
