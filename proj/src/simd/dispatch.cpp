#include <cstdlib>
#include <string>

#include "hcma/simd.hpp"

namespace hcma::simd {

#ifndef HCMA_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& resolve() {
  const char* forced = std::getenv("HCMA_SIMD");
  const std::string want = forced ? forced : "";
  if (want == "scalar") return scalar_kernels();
  if (avx2_kernels() != nullptr && cpu_has_avx2()) return *avx2_kernels();
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

}  // namespace hcma::simd
