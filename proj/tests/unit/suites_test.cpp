#include <gtest/gtest.h>

#include "verify.hpp"

namespace {

void expect_all(const hcma::verify::Suite& s) {
  EXPECT_FALSE(s.checks.empty());
  for (const auto& c : s.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.detail;
}

TEST(Suites, Invariants) {
  const auto s = hcma::verify::invariant_suite();
  expect_all(s);
  EXPECT_LT(s.seconds, 30.0);
}

TEST(Suites, Oracles) { expect_all(hcma::verify::oracle_suite()); }

TEST(Suites, Gradients) {
  const auto s = hcma::verify::gradient_suite();
  expect_all(s);
  EXPECT_LT(s.seconds, 60.0);
}

}  // namespace
