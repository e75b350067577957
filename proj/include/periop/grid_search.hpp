#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "periop/error.hpp"
#include "periop/forest.hpp"
#include "periop/log.hpp"
#include "periop/matrix.hpp"
#include "periop/metrics.hpp"
#include "periop/parallel.hpp"

namespace periop {

// One cross-validation rotation. `val_rows` maps validation rows back to the
// caller's row numbering for out-of-fold predictions.
struct FoldData {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix val_x;
  std::vector<int> val_y;
  std::vector<std::size_t> val_rows;
};

struct GridPointResult {
  HyperParams hp;
  std::vector<double> fold_auroc;  // NaN where the fold was single-class
  double mean_auroc = std::numeric_limits<double>::quiet_NaN();
  std::size_t folds_used = 0;
};

struct GridSearchResult {
  HyperParams best;
  std::size_t best_index = 0;
  std::vector<GridPointResult> table;
  // Out-of-fold predictions of the best grid point, indexed by caller row;
  // NaN for rows in no validation fold.
  std::vector<double> oof_predictions;
};

inline std::vector<HyperParams> default_grid(std::uint64_t seed = 0) {
  std::vector<HyperParams> grid;
  for (std::size_t trees : {100, 300})
    for (auto mf : {MaxFeatures::sqrt(), MaxFeatures::fraction(0.25), MaxFeatures::fraction(1.0)})
      for (std::size_t leaf : {1, 5, 25}) {
        HyperParams hp;
        hp.n_trees = trees;
        hp.max_features = mf;
        hp.min_samples_leaf = leaf;
        hp.seed = seed;
        grid.push_back(hp);
      }
  return grid;
}

// Accepts either a list of points or {"n_trees": [...], "max_features": [...],
// "min_samples_leaf": [...], ...} expanded as a Cartesian product.
inline std::vector<HyperParams> grid_from_json(const nlohmann::json& j, std::uint64_t seed) {
  std::vector<HyperParams> grid;
  auto seeded = [&](nlohmann::json point) {
    if (!point.contains("seed")) point["seed"] = seed;
    return point.get<HyperParams>();
  };
  if (j.is_array()) {
    for (const auto& p : j) grid.push_back(seeded(p));
  } else if (j.is_object()) {
    std::vector<nlohmann::json> points{nlohmann::json::object()};
    for (const auto& [key, values] : j.items()) {
      std::vector<nlohmann::json> next;
      const auto list = values.is_array() ? values : nlohmann::json::array({values});
      for (const auto& p : points)
        for (const auto& v : list) {
          auto q = p;
          q[key] = v;
          next.push_back(std::move(q));
        }
      points = std::move(next);
    }
    for (auto& p : points) grid.push_back(seeded(p));
  } else {
    throw ConfigError("grid must be a JSON array or object");
  }
  if (grid.empty()) throw ConfigError("grid is empty");
  return grid;
}

inline std::vector<HyperParams> load_grid(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path);
  try {
    return grid_from_json(nlohmann::json::parse(in), seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace detail {
// Higher mean AUROC wins; exact ties prefer fewer trees, then larger leaves,
// then earlier grid order.
inline bool better_point(const GridPointResult& a, const GridPointResult& b) {
  if (a.mean_auroc != b.mean_auroc) return a.mean_auroc > b.mean_auroc;
  if (a.hp.n_trees != b.hp.n_trees) return a.hp.n_trees < b.hp.n_trees;
  return a.hp.min_samples_leaf > b.hp.min_samples_leaf;
}
}  // namespace detail

// Trains every grid point on every rotation and scores AUROC on the held
// fold. Work is spread over (grid point x fold) pairs.
inline GridSearchResult grid_search_cv(const std::vector<FoldData>& folds, const std::vector<HyperParams>& grid,
                                       std::size_t n_rows, int jobs = 1) {
  if (grid.empty()) throw ConfigError("grid_search_cv: empty grid");
  if (folds.size() < 2) throw SizingError("grid_search_cv: need at least 2 folds");
  const std::size_t nf = folds.size();
  std::vector<std::vector<double>> preds(grid.size() * nf);
  std::vector<double> scores(grid.size() * nf, std::numeric_limits<double>::quiet_NaN());
  const int outer = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size() * nf)));
  const int inner = std::max(1, jobs / outer);
  parallel_for(grid.size() * nf, outer, [&](std::size_t task) {
    const std::size_t g = task / nf, f = task % nf;
    const auto& fold = folds[f];
    const Forest forest = fit_forest(fold.train_x, fold.train_y, grid[g], inner);
    preds[task] = forest.predict_proba(fold.val_x);
    try {
      scores[task] = auroc(preds[task], fold.val_y);
    } catch (const UndefinedMetricError&) {
    }
  });

  GridSearchResult res;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridPointResult pt;
    pt.hp = grid[g];
    double sum = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const double s = scores[g * nf + f];
      pt.fold_auroc.push_back(s);
      if (!std::isnan(s)) {
        sum += s;
        ++pt.folds_used;
      }
    }
    if (pt.folds_used == 0) throw UndefinedMetricError("grid_search_cv: AUROC undefined on every fold");
    if (pt.folds_used < nf && g == 0)
      warn("grid_search_cv: " + std::to_string(nf - pt.folds_used) + " single-class fold(s) excluded from the mean");
    pt.mean_auroc = sum / static_cast<double>(pt.folds_used);
    res.table.push_back(std::move(pt));
  }
  for (std::size_t g = 1; g < res.table.size(); ++g)
    if (detail::better_point(res.table[g], res.table[res.best_index])) res.best_index = g;
  res.best = res.table[res.best_index].hp;
  res.oof_predictions.assign(n_rows, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& p = preds[res.best_index * nf + f];
    for (std::size_t i = 0; i < p.size(); ++i) res.oof_predictions[folds[f].val_rows[i]] = p[i];
  }
  return res;
}

// Slices X by a per-row fold index (-1 = not in any fold) into rotations.
inline std::vector<FoldData> make_folds(const Matrix& X, std::span<const int> y, std::span<const int> fold_of_row) {
  if (X.rows() != y.size() || y.size() != fold_of_row.size()) throw ShapeError("make_folds: length mismatch");
  int n_folds = 0;
  for (int f : fold_of_row) n_folds = std::max(n_folds, f + 1);
  std::vector<FoldData> folds(static_cast<std::size_t>(n_folds));
  for (int k = 0; k < n_folds; ++k) {
    auto& fd = folds[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (fold_of_row[i] < 0) continue;
      if (fold_of_row[i] == k) {
        fd.val_x.append_row(X.row(i));
        fd.val_y.push_back(y[i]);
        fd.val_rows.push_back(i);
      } else {
        fd.train_x.append_row(X.row(i));
        fd.train_y.push_back(y[i]);
      }
    }
  }
  return folds;
}

inline GridSearchResult grid_search_cv(const Matrix& X, std::span<const int> y, const std::vector<HyperParams>& grid,
                                       std::span<const int> fold_of_row, int jobs = 1) {
  return grid_search_cv(make_folds(X, y, fold_of_row), grid, X.rows(), jobs);
}

}  // namespace periop
