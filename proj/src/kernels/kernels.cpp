#include "traitscore/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace traitscore::kern {
namespace {

struct Dispatch {
  const Kernels* table;
  std::string_view name;
};

Dispatch pick_default() {
#if defined(__x86_64__)
  if (const char* env = std::getenv("TRAITSCORE_KERNELS")) {
    const std::string_view want(env);
    if (want == "scalar") return {&scalar_kernels, "scalar"};
    if (want == "avx2" && __builtin_cpu_supports("avx2"))
      return {&avx2_kernels, "avx2"};
  }
  if (__builtin_cpu_supports("avx2")) return {&avx2_kernels, "avx2"};
#endif
  return {&scalar_kernels, "scalar"};
}

Dispatch& dispatch() {
  static Dispatch d = pick_default();
  return d;
}

}  // namespace

const Kernels& active() { return *dispatch().table; }

std::string_view active_name() { return dispatch().name; }

bool avx2_supported() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

void force_backend(std::string_view name) {
  if (name == "scalar") {
    dispatch() = {&scalar_kernels, "scalar"};
    return;
  }
#if defined(__x86_64__)
  if (name == "avx2") {
    if (!avx2_supported())
      throw std::runtime_error("avx2 kernels requested but CPU lacks AVX2");
    dispatch() = {&avx2_kernels, "avx2"};
    return;
  }
#endif
  throw std::runtime_error("unknown kernel backend: " + std::string(name));
}

}  // namespace traitscore::kern
