#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace periop;

namespace {

Tree leaf_tree(double p) {
  Tree t;
  TreeNode n;
  n.weight0 = 1.0 - p;
  n.weight1 = p;
  t.nodes.push_back(n);
  return t;
}

double recall_at(const std::vector<double>& p, const std::vector<int>& y, double thr) {
  return confusion_metrics(p, y, thr).sensitivity;
}

}  // namespace

TEST(ClassWeights, Examples) {
  const std::vector<int> even = {0, 1, 0, 1};
  EXPECT_EQ(class_weights(even, ClassWeightMode::balanced), (std::array<double, 2>{1.0, 1.0}));
  std::vector<int> skew(90, 0);
  skew.resize(100, 1);
  const auto w = class_weights(skew, ClassWeightMode::balanced);
  EXPECT_NEAR(w[0], 100.0 / 180.0, 1e-15);
  EXPECT_DOUBLE_EQ(w[1], 5.0);
  EXPECT_EQ(class_weights(skew, ClassWeightMode::none), (std::array<double, 2>{1.0, 1.0}));
  const std::vector<int> single = {1, 1};
  EXPECT_EQ(class_weights(single, ClassWeightMode::balanced)[0], 0.0);
}

TEST(FitTree, PureInputIsSingleLeaf) {
  const auto X = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<int> y = {1, 1, 1};
  const std::vector<double> w = {1, 1, 1};
  Rng rng(1);
  const auto t = fit_tree(X, y, w, HyperParams{}, rng);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.predict(X.row(0)), 1.0);
}

TEST(FitTree, ThresholdSeparableMatchesExhaustiveSplitOracle) {
  Rng data(2);
  Matrix X;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const double x = uniform(data, -5, 5);
    X.append_row(std::vector<double>{x});
    y.push_back(x >= 0 ? 1 : 0);
  }
  const std::vector<double> w(60, 1.0);
  HyperParams hp;
  hp.max_features = MaxFeatures::count(1);
  Rng rng(3);
  const auto t = fit_tree(X, y, w, hp, rng);
  EXPECT_EQ(t.depth(), 1u);
  for (std::size_t i = 0; i < X.rows(); ++i) EXPECT_EQ(t.predict(X.row(i)), y[i]);

  // Oracle: the only zero-error cut lies between the largest negative and smallest non-negative.
  double max_neg = -1e9, min_pos = 1e9;
  for (std::size_t i = 0; i < X.rows(); ++i) (y[i] ? min_pos : max_neg) = y[i] ? std::min(min_pos, X(i, 0)) : std::max(max_neg, X(i, 0));
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5 * (max_neg + min_pos));
}

TEST(FitTree, ZeroWeightIsFitError) {
  const auto X = Matrix::from_rows({{1}, {2}});
  const std::vector<int> y = {0, 1};
  const std::vector<double> w = {0, 0};
  Rng rng(1);
  EXPECT_THROW(fit_tree(X, y, w, HyperParams{}, rng), FitError);
}

TEST(FitTree, LabelSwapMirrorsTree) {
  Rng data(4);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix X;
    std::vector<int> y, flipped;
    for (int i = 0; i < 30; ++i) {
      const double row[2] = {std::round(10 * uniform01(data)), std::round(10 * uniform01(data))};
      X.append_row(row);
      y.push_back(bernoulli(data, 0.3));
      flipped.push_back(1 - y.back());
    }
    HyperParams hp;
    hp.max_features = MaxFeatures::all();
    auto w = [&](const std::vector<int>& labels) {
      const auto cw = class_weights(labels, ClassWeightMode::balanced);
      std::vector<double> out;
      for (int v : labels) out.push_back(cw[v]);
      return out;
    };
    Rng r1(5), r2(5);
    const auto a = fit_tree(X, y, w(y), hp, r1);
    const auto b = fit_tree(X, flipped, w(flipped), hp, r2);
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
      EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
    }
    for (std::size_t i = 0; i < X.rows(); ++i) EXPECT_NEAR(a.predict(X.row(i)), 1.0 - b.predict(X.row(i)), 1e-12);
  }
}

TEST(Forest, SingleDistinctRowIsConstant) {
  const auto X = Matrix::from_rows({{3.0, 1.0}});
  const std::vector<int> y = {1};
  HyperParams hp;
  hp.n_trees = 1;
  hp.max_features = MaxFeatures::all();
  const auto f = fit_forest(X, y, hp);
  EXPECT_EQ(f.predict_proba(std::vector<double>{-100, 100}), 1.0);
  EXPECT_EQ(f.predict_proba(std::vector<double>{100, -100}), 1.0);
}

TEST(Forest, MeanOfTrees) {
  Forest f;
  f.feature_count = 1;
  f.trees = {leaf_tree(0.2), leaf_tree(0.6)};
  EXPECT_DOUBLE_EQ(f.predict_proba(std::vector<double>{0.0}), 0.4);
  f.trees = {leaf_tree(1.0), leaf_tree(1.0)};
  EXPECT_EQ(predict_proba(f, std::vector<double>{0.0}), 1.0);
  EXPECT_THROW(f.predict_proba(std::vector<double>{0.0, 1.0}), ShapeError);
}

TEST(Forest, DeterministicSerialization) {
  const auto d = testutil::imbalanced(400, 0.2, 1.0, 4, 8);
  HyperParams hp;
  hp.n_trees = 20;
  hp.seed = 42;
  const auto a = fit_forest(d.X, d.y, hp, 1);
  const auto b = fit_forest(d.X, d.y, hp, 4);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  const auto back = nlohmann::json(a).get<Forest>();
  EXPECT_EQ(back, a);
  hp.seed = 43;
  EXPECT_NE(nlohmann::json(fit_forest(d.X, d.y, hp)).dump(), nlohmann::json(a).dump());
}

TEST(Forest, BlobsOutOfBagAccuracy) {
  const auto d = testutil::blobs(1000, 9);
  HyperParams hp;
  hp.n_trees = 100;
  hp.seed = 1;
  const auto f = fit_forest(d.X, d.y, hp);
  EXPECT_GE(oob_accuracy(f, d.X, d.y), 0.95);
}

TEST(Forest, MonotoneLabelResponse) {
  const auto d = testutil::imbalanced(120, 0.3, 1.0, 2, 10);
  HyperParams hp;
  hp.n_trees = 30;
  hp.seed = 3;
  hp.class_weight = ClassWeightMode::none;
  const auto base = fit_forest(d.X, d.y, hp);
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    if (d.y[i]) continue;
    auto y = d.y;
    y[i] = 1;
    const auto refit = fit_forest(d.X, y, hp);
    EXPECT_GE(refit.predict_proba(d.X.row(i)), base.predict_proba(d.X.row(i))) << "row " << i;
    if (i > 40) break;
  }
}

TEST(Forest, BalancedWeightsRecoverRecall) {
  const auto train = testutil::imbalanced(4000, 0.05, 2.0, 4, 11);
  const auto test = testutil::imbalanced(4000, 0.05, 2.0, 4, 12);
  HyperParams hp;
  hp.n_trees = 100;
  hp.min_samples_leaf = 5;
  hp.seed = 5;
  hp.class_weight = ClassWeightMode::none;
  const auto plain = fit_forest(train.X, train.y, hp);
  EXPECT_LT(recall_at(plain.predict_proba(test.X), test.y, 0.5), 0.5);

  hp.class_weight = ClassWeightMode::balanced;
  const auto balanced = fit_forest(train.X, train.y, hp);
  const auto oob = oob_predictions(balanced, train.X);
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t i = 0; i < oob.size(); ++i)
    if (!std::isnan(oob[i])) {
      s.push_back(oob[i]);
      y.push_back(train.y[i]);
    }
  const double thr = youden_threshold(s, y).threshold;
  EXPECT_GE(recall_at(balanced.predict_proba(test.X), test.y, thr), 0.7);
}
