#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hcma/simd.hpp"

namespace {

using hcma::simd::KernelTable;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Lengths straddle the 4-lane width and the 8-element unrolled body.
const std::size_t kLengths[] = {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 64, 100, 1023};

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    avx2_ = hcma::simd::avx2_kernels();
    if (avx2_ == nullptr || !hcma::simd::cpu_has_avx2()) {
      GTEST_SKIP() << "AVX2 kernels unavailable on this machine";
    }
  }
  const KernelTable& scalar_ = hcma::simd::scalar_kernels();
  const KernelTable* avx2_ = nullptr;
};

TEST_F(Avx2Equivalence, Dot) {
  for (std::size_t n : kLengths) {
    const auto a = random_vector(n, 1 + n), b = random_vector(n, 100 + n);
    const double s = scalar_.dot(a.data(), b.data(), n);
    const double v = avx2_->dot(a.data(), b.data(), n);
    // Different summation order; bound by the magnitude sum.
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    EXPECT_NEAR(s, v, 1e-13 * (1.0 + mag)) << "n = " << n;
  }
}

TEST_F(Avx2Equivalence, Axpy) {
  for (std::size_t n : kLengths) {
    const auto x = random_vector(n, 7 + n);
    auto y1 = random_vector(n, 70 + n);
    auto y2 = y1;
    scalar_.axpy(0.37, x.data(), y1.data(), n);
    avx2_->axpy(0.37, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15 * (1.0 + std::abs(y1[i])));
  }
}

TEST_F(Avx2Equivalence, SquaredDistances) {
  for (std::size_t n : kLengths) {
    const auto xs = random_vector(n, 3 + n), ys = random_vector(n, 30 + n),
               zs = random_vector(n, 300 + n);
    std::vector<double> o1(n), o2(n);
    scalar_.sq_dist3(xs.data(), ys.data(), zs.data(), 0.1, -0.2, 0.3, o1.data(), n);
    avx2_->sq_dist3(xs.data(), ys.data(), zs.data(), 0.1, -0.2, 0.3, o2.data(), n);
    // No FMA in this kernel: neighbour sets must agree exactly.
    EXPECT_EQ(o1, o2) << "n = " << n;
  }
}

TEST_F(Avx2Equivalence, MaxIsExact) {
  for (std::size_t n : kLengths) {
    if (n == 0) continue;
    const auto x = random_vector(n, 9 + n);
    EXPECT_EQ(scalar_.max(x.data(), n), avx2_->max(x.data(), n)) << "n = " << n;
  }
}

TEST(SimdDispatch, ActiveTableIsComplete) {
  const KernelTable& t = hcma::simd::active();
  EXPECT_NE(t.dot, nullptr);
  EXPECT_NE(t.axpy, nullptr);
  EXPECT_NE(t.sq_dist3, nullptr);
  EXPECT_NE(t.max, nullptr);
  if (!hcma::simd::cpu_has_avx2()) {
    EXPECT_EQ(t.isa, hcma::simd::Isa::kScalar);
  }
}

TEST(SimdDispatch, ScalarReference) {
  const double a[] = {1, 2, 3}, b[] = {4, 5, 6};
  EXPECT_DOUBLE_EQ(hcma::simd::scalar_kernels().dot(a, b, 3), 32.0);
  double y[] = {1, 1, 1};
  hcma::simd::scalar_kernels().axpy(2.0, a, y, 3);
  EXPECT_DOUBLE_EQ(y[2], 7.0);
  EXPECT_DOUBLE_EQ(hcma::simd::scalar_kernels().max(b, 3), 6.0);
}

}  // namespace
