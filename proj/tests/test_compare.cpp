#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace periop;

namespace {

struct Scores {
  std::vector<double> old_s, new_s;
  std::vector<int> y;
};

Scores paired(std::size_t n, double new_shift, std::uint64_t seed) {
  Rng rng(seed);
  Scores s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = bernoulli(rng, 0.25);
    s.y.push_back(y);
    s.old_s.push_back(std::clamp(0.3 + 0.15 * y + 0.2 * standard_normal(rng), 0.0, 1.0));
    s.new_s.push_back(std::clamp(0.3 + (0.15 + new_shift) * y + 0.2 * standard_normal(rng), 0.0, 1.0));
  }
  return s;
}

CompareOptions quick() {
  CompareOptions o;
  o.n_boot = 200;
  o.seed = 5;
  return o;
}

}  // namespace

TEST(Compare, IdenticalModelsShowNoDifference) {
  const auto s = paired(300, 0.0, 1);
  const auto c = compare_models("icu_gt_48h", s.old_s, s.old_s, s.y, 0.4, 0.4, quick());
  EXPECT_EQ(c.p_auroc.p_value, 1.0);
  EXPECT_EQ(c.p_auprc.p_value, 1.0);
  EXPECT_EQ(c.p_accuracy.p_value, 1.0);
  EXPECT_EQ(c.nri.nri, 0.0);
  EXPECT_EQ(c.nri.p_value, 1.0);
}

TEST(Compare, BetterModelWins) {
  const auto s = paired(1000, 0.3, 2);
  const auto c = compare_models("icu_gt_48h", s.old_s, s.new_s, s.y, 0.4, 0.45, quick());
  EXPECT_GT(c.new_model.metrics.at("auroc").point, c.old_model.metrics.at("auroc").point);
  EXPECT_GT(c.new_model.metrics.at("auprc").point, c.old_model.metrics.at("auprc").point);
  EXPECT_LT(c.p_auroc.p_value, 0.01);
  EXPECT_LT(c.p_auprc.p_value, 0.01);
  EXPECT_GT(c.p_auroc.statistic, 0.0);
  EXPECT_EQ(c.old_model.metrics.at("auroc").point, auroc(s.old_s, s.y));
  EXPECT_EQ(c.n, 1000u);
}

TEST(Compare, ResultsIndependentOfJobs) {
  const auto s = paired(400, 0.1, 3);
  auto o = quick();
  const auto a = to_json(ComparisonReport{"preop", "postop", o.n_boot, o.seed,
                                          {compare_models("mv_gt_48h", s.old_s, s.new_s, s.y, 0.4, 0.4, o)}});
  o.jobs = 4;
  const auto b = to_json(ComparisonReport{"preop", "postop", o.n_boot, o.seed,
                                          {compare_models("mv_gt_48h", s.old_s, s.new_s, s.y, 0.4, 0.4, o)}});
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Compare, MisalignedPanelsRejected) {
  const std::map<std::string, double> a = {{"c1", 0.1}, {"c2", 0.8}};
  const std::map<std::string, double> b = {{"c1", 0.2}, {"c3", 0.7}};
  const std::map<std::string, int> y = {{"c1", 0}, {"c2", 1}};
  EXPECT_THROW(compare_panels("icu_gt_48h", a, b, y, 0.5, 0.5, quick()), AlignmentError);
  EXPECT_NO_THROW(compare_panels("icu_gt_48h", a, a, y, 0.5, 0.5, quick()));
}

TEST(Compare, TextReportLayout) {
  const auto s = paired(200, 0.2, 4);
  ComparisonReport r;
  r.n_boot = 200;
  r.outcomes.push_back(compare_models("icu_gt_48h", s.old_s, s.new_s, s.y, 0.4, 0.4, quick()));
  const auto text = format_report_text(r);
  for (const char* h : {"Sensitivity", "Specificity", "NPV", "PPV", "Accuracy", "AUROC", "AUPRC", "Threshold",
                        "NRI (95% CI)", "P-value", "Event", "Non-Event", "Overall", "preop", "postop"})
    EXPECT_NE(text.find(h), std::string::npos) << h;
  const auto j = to_json(r);
  EXPECT_EQ(j["format"], "periop-comparison");
  EXPECT_EQ(j["outcomes"].size(), 1u);
}

TEST(Compare, CurvesWritten) {
  const auto s = paired(100, 0.2, 5);
  testutil::TempDir dir("curves");
  write_roc_csv(roc_curve(s.new_s, s.y), dir.file("roc.csv"));
  write_pr_csv(pr_curve(s.new_s, s.y), dir.file("pr.csv"));
  EXPECT_EQ(testutil::slurp(dir.file("roc.csv")).rfind("fpr,tpr,threshold\n", 0), 0u);
  EXPECT_EQ(testutil::slurp(dir.file("pr.csv")).rfind("recall,precision,threshold\n", 0), 0u);
}
