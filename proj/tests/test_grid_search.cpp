#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace periop;

namespace {

// y = 1 when the first two columns share a sign; the remaining columns are noise.
testutil::Dataset xor_pair(std::size_t n, std::size_t noise, std::uint64_t seed) {
  Rng rng(seed);
  testutil::Dataset d;
  std::vector<double> row(2 + noise);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = standard_normal(rng);
    d.X.append_row(row);
    d.y.push_back((row[0] > 0) == (row[1] > 0) ? 1 : 0);
  }
  return d;
}

std::vector<int> round_robin_folds(std::size_t n, int k) {
  std::vector<int> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  return f;
}

// Direct CV evaluation, independent of the search's task scheduling.
double cv_auroc_oracle(const testutil::Dataset& d, const std::vector<int>& folds, int k, const HyperParams& hp) {
  double sum = 0;
  for (int f = 0; f < k; ++f) {
    Matrix tx, vx;
    std::vector<int> ty, vy;
    for (std::size_t i = 0; i < d.y.size(); ++i) {
      if (folds[i] == f) {
        vx.append_row(d.X.row(i));
        vy.push_back(d.y[i]);
      } else {
        tx.append_row(d.X.row(i));
        ty.push_back(d.y[i]);
      }
    }
    sum += auroc(fit_forest(tx, ty, hp).predict_proba(vx), vy);
  }
  return sum / k;
}

}  // namespace

TEST(GridSearch, SinglePointGrid) {
  const auto d = testutil::imbalanced(200, 0.3, 1.5, 2, 1);
  HyperParams hp;
  hp.n_trees = 10;
  const auto r = grid_search_cv(d.X, d.y, {hp}, round_robin_folds(200, 4));
  EXPECT_EQ(r.best_index, 0u);
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.table[0].folds_used, 4u);
  for (double p : r.oof_predictions) EXPECT_FALSE(std::isnan(p));
}

TEST(GridSearch, DuplicatePointFirstWins) {
  const auto d = testutil::imbalanced(200, 0.3, 1.5, 2, 2);
  HyperParams hp;
  hp.n_trees = 10;
  const auto r = grid_search_cv(d.X, d.y, {hp, hp}, round_robin_folds(200, 4));
  EXPECT_EQ(r.table[0].mean_auroc, r.table[1].mean_auroc);
  EXPECT_EQ(r.best_index, 0u);
}

TEST(GridSearch, TieBreakPrefersFewerTreesThenLargerLeaves) {
  // A single perfectly separating column makes every point score 1.0.
  Matrix X;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    X.append_row(std::vector<double>{static_cast<double>(i)});
    y.push_back(i >= 50);
  }
  std::vector<HyperParams> grid;
  for (std::size_t trees : {20, 10})
    for (std::size_t leaf : {1, 5}) {
      HyperParams hp;
      hp.n_trees = trees;
      hp.min_samples_leaf = leaf;
      grid.push_back(hp);
    }
  const auto r = grid_search_cv(X, y, grid, round_robin_folds(100, 5));
  for (const auto& pt : r.table) ASSERT_EQ(pt.mean_auroc, 1.0);
  EXPECT_EQ(r.best.n_trees, 10u);
  EXPECT_EQ(r.best.min_samples_leaf, 5u);
}

TEST(GridSearch, PlantedPairMatchesExhaustiveOracle) {
  const auto d = xor_pair(600, 10, 3);
  const auto folds = round_robin_folds(600, 3);
  std::vector<HyperParams> grid;
  for (auto mf : {MaxFeatures::count(1), MaxFeatures::all()}) {
    HyperParams hp;
    hp.n_trees = 30;
    hp.max_features = mf;
    hp.min_samples_leaf = 25;
    hp.seed = 7;
    grid.push_back(hp);
  }
  const auto r = grid_search_cv(d.X, d.y, grid, folds, 2);
  std::size_t oracle_best = 0;
  std::vector<double> oracle;
  for (const auto& hp : grid) oracle.push_back(cv_auroc_oracle(d, folds, 3, hp));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    EXPECT_DOUBLE_EQ(r.table[g].mean_auroc, oracle[g]);
    if (oracle[g] > oracle[oracle_best]) oracle_best = g;
  }
  EXPECT_EQ(r.best_index, oracle_best);
  EXPECT_EQ(r.best.max_features.kind, MaxFeatures::Kind::all);
}

TEST(GridSearch, SingleClassFoldExcluded) {
  auto d = testutil::imbalanced(100, 0.5, 2.0, 1, 4);
  std::vector<int> folds = round_robin_folds(100, 4);
  for (std::size_t i = 0; i < 100; ++i)
    if (folds[i] == 3) d.y[i] = 0;
  HyperParams hp;
  hp.n_trees = 5;
  const auto r = grid_search_cv(d.X, d.y, {hp}, folds);
  EXPECT_EQ(r.table[0].folds_used, 3u);
  EXPECT_TRUE(std::isnan(r.table[0].fold_auroc[3]));
}

TEST(GridSearch, AllFoldsUndefinedThrows) {
  const auto d = testutil::imbalanced(40, 0.5, 2.0, 1, 5);
  const std::vector<int> y(40, 1);
  HyperParams hp;
  hp.n_trees = 2;
  EXPECT_THROW(grid_search_cv(d.X, y, {hp}, round_robin_folds(40, 4)), UndefinedMetricError);
}

TEST(GridSearch, JobsDoNotChangeResults) {
  const auto d = testutil::imbalanced(300, 0.2, 1.0, 3, 6);
  const auto grid = std::vector<HyperParams>{HyperParams{}, [] {
                                               HyperParams hp;
                                               hp.min_samples_leaf = 5;
                                               return hp;
                                             }()};
  const auto a = grid_search_cv(d.X, d.y, grid, round_robin_folds(300, 5), 1);
  const auto b = grid_search_cv(d.X, d.y, grid, round_robin_folds(300, 5), 4);
  EXPECT_EQ(a.best_index, b.best_index);
  for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(a.oof_predictions[i], b.oof_predictions[i]);
}

TEST(GridSpec, DefaultAndJson) {
  EXPECT_EQ(default_grid().size(), 18u);
  const auto g = grid_from_json(nlohmann::json::parse(R"({"n_trees":[50,100],"min_samples_leaf":[1,5,25]})"), 9);
  ASSERT_EQ(g.size(), 6u);
  for (const auto& hp : g) EXPECT_EQ(hp.seed, 9u);
  EXPECT_THROW(grid_from_json(nlohmann::json::array(), 0), ConfigError);
  EXPECT_THROW(grid_from_json(nlohmann::json::parse(R"([{"n_trees":0}])"), 0), ConfigError);
}
