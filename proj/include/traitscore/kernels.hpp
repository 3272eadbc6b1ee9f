#pragma once

#include <cstddef>
#include <string_view>

namespace traitscore::kern {

// Scalars for one decoupled-weight-decay Adam step. bc1/bc2 are the
// bias-correction factors 1/(1-beta^t).
struct AdamScalars {
  double lr;
  double weight_decay;  // 0 for parameters excluded from decay
  double beta1;
  double beta2;
  double eps;
  double bc1;
  double bc2;
};

// Dispatch table. Every entry has a scalar reference implementation and an
// AVX2 variant that is bit-identical to it: the dot reduction uses a pinned
// 4-lane accumulation order, and all builds disable FP contraction.
struct Kernels {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*scale)(double* x, double a, std::size_t n);
  void (*relu)(const double* z, double* h, std::size_t n);
  // dz[i] = (z[i] > 0) ? dh[i] : 0
  void (*relu_mask)(const double* z, const double* dh, double* dz,
                    std::size_t n);
  void (*adamw)(double* p, double* m, double* v, const double* g,
                std::size_t n, const AdamScalars& s);
};

extern const Kernels scalar_kernels;
#if defined(__x86_64__)
extern const Kernels avx2_kernels;
#endif

// Active table. Selected at startup: AVX2 when the CPU supports it, scalar
// otherwise; TRAITSCORE_KERNELS=scalar|avx2 overrides.
const Kernels& active();
std::string_view active_name();

// Force a backend by name ("scalar" or "avx2"); throws if unavailable.
void force_backend(std::string_view name);

bool avx2_supported();

}  // namespace traitscore::kern
