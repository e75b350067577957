#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace periop;

TEST(Wilcoxon, IdenticalSamples) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const auto r = wilcoxon_signed_rank(a, a);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n_used, 0u);
}

TEST(Wilcoxon, SixAllOneSided) {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};
  const std::vector<double> b = {2, 4, 6, 8, 10, 12};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 64.0);
  EXPECT_EQ(r.statistic, 0.0);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
  Rng rng(1);
  for (int t = 0; t < 400; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(uniform_index(rng, 7));
      b[i] = static_cast<double>(uniform_index(rng, 7));
    }
    EXPECT_EQ(wilcoxon_signed_rank(a, b).p_value, oracle::wilcoxon_enumerate(a, b));
  }
}

TEST(Wilcoxon, NormalApproximationCloseToExact) {
  Rng rng(2);
  std::vector<double> a(25), b(25);
  for (std::size_t i = 0; i < 25; ++i) {
    a[i] = standard_normal(rng) + 0.4;
    b[i] = standard_normal(rng);
  }
  const double exact = wilcoxon_signed_rank(a, b, 25).p_value;
  const double approx = wilcoxon_signed_rank(a, b, 0).p_value;
  EXPECT_NEAR(exact, approx, 0.01);
}

TEST(Wilcoxon, LengthMismatch) {
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}
