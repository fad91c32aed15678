#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the tensor ops, the contrastive
// similarity matrices and the clustering neighbour scans. Every kernel has a
// portable scalar reference implementation and, on x86-64, an AVX2/FMA
// variant. The active table is chosen once at startup from CPUID and can be
// forced with HCMA_SIMD=scalar|avx2.

namespace hcma::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = (xs[i]-px)^2 + (ys[i]-py)^2 + (zs[i]-pz)^2
  void (*sq_dist3)(const double* xs, const double* ys, const double* zs,
                   double px, double py, double pz, double* out,
                   std::size_t n);
  // max_i x[i]; n must be > 0
  double (*max)(const double* x, std::size_t n);
};

const KernelTable& scalar_kernels();
// Returns nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();
bool cpu_has_avx2();

// The dispatched table. Resolved on first use.
const KernelTable& active();
std::string_view isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}

}  // namespace hcma::simd
