#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace periop;

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, 0, 0}), 0.75);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
}

TEST(Auroc, EqualsPairwiseOracle) {
  Rng rng(1);
  std::vector<double> s;
  std::vector<int> y;
  for (int t = 0; t < 300; ++t) {
    oracle::fuzz_scores(rng, 2 + uniform_index(rng, 200), s, y);
    ASSERT_EQ(auroc(s, y), oracle::auroc_pairwise(s, y));
  }
}

TEST(Auprc, Examples) {
  EXPECT_EQ(auprc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(auprc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0}), 0.5 + (2.0 / 3.0) * 0.5,
              1e-15);
  EXPECT_THROW(auprc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), UndefinedMetricError);
}

TEST(Auprc, MatchesThresholdOracle) {
  Rng rng(2);
  std::vector<double> s;
  std::vector<int> y;
  for (int t = 0; t < 200; ++t) {
    oracle::fuzz_scores(rng, 2 + uniform_index(rng, 150), s, y);
    EXPECT_NEAR(auprc(s, y), oracle::average_precision(s, y), 1e-12);
  }
}

TEST(Auprc, RandomScoresNearPrevalence) {
  Rng rng(3);
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = uniform01(rng);
    y[i] = bernoulli(rng, 0.2);
  }
  EXPECT_NEAR(auprc(s, y), 0.2, 0.05);
}

TEST(Youden, Examples) {
  const auto sep = youden_threshold(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1});
  EXPECT_EQ(sep.j, 1.0);
  EXPECT_GT(sep.threshold, 0.2);
  EXPECT_LE(sep.threshold, 0.8);
  const auto ties = youden_threshold(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0});
  EXPECT_EQ(ties.j, 0.0);
  EXPECT_EQ(ties.threshold, 0.5);
}

TEST(Youden, MatchesExhaustiveScan) {
  Rng rng(4);
  std::vector<double> s;
  std::vector<int> y;
  for (int t = 0; t < 300; ++t) {
    oracle::fuzz_scores(rng, 2 + uniform_index(rng, 100), s, y);
    const auto got = youden_threshold(s, y);
    const auto want = oracle::youden_scan(s, y);
    EXPECT_EQ(oracle::youden_numerator(s, y, got.threshold), want.best_num);
    EXPECT_EQ(got.threshold, want.lowest_threshold);
  }
}

TEST(Confusion, PaperShapedRow) {
  const auto c = confusion_from_counts(85, 120, 880, 15);
  EXPECT_DOUBLE_EQ(c.sensitivity, 0.85);
  EXPECT_DOUBLE_EQ(c.specificity, 0.88);
  EXPECT_NEAR(c.accuracy, 965.0 / 1100.0, 1e-15);
  EXPECT_NEAR(c.accuracy, 0.8773, 1e-4);
}

TEST(Confusion, DegenerateAndPerfect) {
  const std::vector<double> s = {0.1, 0.2, 0.3};
  const std::vector<int> y = {0, 1, 0};
  EXPECT_TRUE(std::isnan(confusion_metrics(s, y, 0.9).ppv));
  const std::vector<double> p = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> py = {0, 0, 1, 1};
  const auto c = confusion_metrics(p, py, youden_threshold(p, py).threshold);
  for (double v : {c.sensitivity, c.specificity, c.ppv, c.npv, c.accuracy}) EXPECT_EQ(v, 1.0);
}

TEST(Curves, EndpointsAndArea) {
  Rng rng(5);
  std::vector<double> s;
  std::vector<int> y;
  oracle::fuzz_scores(rng, 80, s, y);
  const auto roc = roc_curve(s, y);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  double area = 0;
  for (std::size_t i = 1; i < roc.points.size(); ++i)
    area += (roc.points[i].fpr - roc.points[i - 1].fpr) * 0.5 * (roc.points[i].tpr + roc.points[i - 1].tpr);
  EXPECT_NEAR(area, roc.auc, 1e-12);
  const auto pr = pr_curve(s, y);
  EXPECT_EQ(pr.points.back().recall, 1.0);
}
