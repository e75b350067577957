#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "periop/error.hpp"
#include "periop/log.hpp"
#include "periop/matrix.hpp"
#include "periop/parallel.hpp"
#include "periop/rng.hpp"

namespace periop {

enum class ClassWeightMode { balanced, none };

NLOHMANN_JSON_SERIALIZE_ENUM(ClassWeightMode, {{ClassWeightMode::balanced, "balanced"}, {ClassWeightMode::none, "none"}})

// Number of candidate features drawn at each split.
struct MaxFeatures {
  enum class Kind { sqrt, all, fraction, count };
  Kind kind = Kind::sqrt;
  double value = 0.0;

  static MaxFeatures sqrt() { return {Kind::sqrt, 0.0}; }
  static MaxFeatures all() { return {Kind::all, 0.0}; }
  static MaxFeatures fraction(double f) { return {Kind::fraction, f}; }
  static MaxFeatures count(std::size_t n) { return {Kind::count, static_cast<double>(n)}; }

  std::size_t resolve(std::size_t n_features) const {
    std::size_t k = n_features;
    switch (kind) {
      case Kind::sqrt: k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))); break;
      case Kind::all: k = n_features; break;
      case Kind::fraction: k = static_cast<std::size_t>(value * static_cast<double>(n_features)); break;
      case Kind::count:
        k = static_cast<std::size_t>(value);
        if (k > n_features)
          throw ConfigError("max_features " + std::to_string(k) + " exceeds feature count " +
                            std::to_string(n_features));
        break;
    }
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
  }

  std::string label() const {
    switch (kind) {
      case Kind::sqrt: return "sqrt";
      case Kind::all: return "all";
      case Kind::fraction: return nlohmann::json(value).dump();
      case Kind::count: return std::to_string(static_cast<std::size_t>(value));
    }
    return "?";
  }

  friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

inline void to_json(nlohmann::json& j, const MaxFeatures& m) {
  switch (m.kind) {
    case MaxFeatures::Kind::sqrt: j = "sqrt"; break;
    case MaxFeatures::Kind::all: j = "all"; break;
    case MaxFeatures::Kind::fraction: j = m.value; break;
    case MaxFeatures::Kind::count: j = static_cast<std::uint64_t>(m.value); break;
  }
}

// "sqrt" | "all" | float in (0, 1] (fraction) | integer >= 1 (count).
inline void from_json(const nlohmann::json& j, MaxFeatures& m) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "sqrt") m = MaxFeatures::sqrt();
    else if (s == "all") m = MaxFeatures::all();
    else throw ConfigError("max_features must be \"sqrt\", \"all\" or a number, got \"" + s + "\"");
  } else if (j.is_number_integer() || j.is_number_unsigned()) {
    const auto n = j.get<std::int64_t>();
    if (n < 1) throw ConfigError("max_features count must be >= 1");
    m = MaxFeatures::count(static_cast<std::size_t>(n));
  } else if (j.is_number_float()) {
    const double f = j.get<double>();
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("max_features fraction must be in (0, 1]");
    m = MaxFeatures::fraction(f);
  } else {
    throw ConfigError("invalid max_features");
  }
}

struct HyperParams {
  std::size_t n_trees = 100;
  MaxFeatures max_features = MaxFeatures::sqrt();
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> max_depth;
  ClassWeightMode class_weight = ClassWeightMode::balanced;
  std::uint64_t seed = 0;
  // Optional univariate filter: keep the k features with largest absolute
  // point-biserial correlation. 0 disables it.
  std::size_t select_k = 0;

  void validate() const {
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (max_depth && *max_depth < 1) throw ConfigError("max_depth must be >= 1");
  }

  std::string label() const {
    std::string s = "n_trees=" + std::to_string(n_trees) + " max_features=" + max_features.label() +
                    " min_samples_leaf=" + std::to_string(min_samples_leaf);
    if (max_depth) s += " max_depth=" + std::to_string(*max_depth);
    if (select_k) s += " select_k=" + std::to_string(select_k);
    return s;
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

inline void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = {{"n_trees", hp.n_trees},
       {"max_features", hp.max_features},
       {"min_samples_leaf", hp.min_samples_leaf},
       {"max_depth", hp.max_depth ? nlohmann::json(*hp.max_depth) : nlohmann::json(nullptr)},
       {"class_weight", hp.class_weight},
       {"seed", hp.seed},
       {"select_k", hp.select_k}};
}

inline void from_json(const nlohmann::json& j, HyperParams& hp) {
  hp = HyperParams{};
  if (j.contains("n_trees")) hp.n_trees = j["n_trees"].get<std::size_t>();
  if (j.contains("max_features")) hp.max_features = j["max_features"].get<MaxFeatures>();
  if (j.contains("min_samples_leaf")) hp.min_samples_leaf = j["min_samples_leaf"].get<std::size_t>();
  if (j.contains("max_depth") && !j["max_depth"].is_null()) hp.max_depth = j["max_depth"].get<std::size_t>();
  if (j.contains("class_weight")) hp.class_weight = j["class_weight"].get<ClassWeightMode>();
  if (j.contains("seed")) hp.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("select_k")) hp.select_k = j["select_k"].get<std::size_t>();
  hp.validate();
}

// balanced: w_c = N / (2 N_c); an absent class gets weight 0 with a warning.
inline std::array<double, 2> class_weights(std::span<const int> labels, ClassWeightMode mode) {
  if (labels.empty()) throw FitError("class_weights: empty labels");
  if (mode == ClassWeightMode::none) return {1.0, 1.0};
  std::array<std::size_t, 2> count{0, 0};
  for (int y : labels) count[y ? 1 : 0]++;
  const auto n = static_cast<double>(labels.size());
  std::array<double, 2> w{};
  for (int c = 0; c < 2; ++c) {
    if (count[c] == 0) {
      warn("class_weights: class " + std::to_string(c) + " absent; weight set to 0");
      w[c] = 0.0;
    } else {
      w[c] = n / (2.0 * static_cast<double>(count[c]));
    }
  }
  return w;
}

// Flattened node; `feature < 0` marks a leaf. Samples with x <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight0 = 0.0;
  double weight1 = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  double positive_fraction() const noexcept {
    const double t = weight0 + weight1;
    return t > 0.0 ? weight1 / t : 0.0;
  }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].positive_fraction();
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
        stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

namespace detail {

struct SplitEntry {
  double x;
  double w;
  int y;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;
};

// Finds the best midpoint split of one feature. The score is
// sum over children of (w0^2 + w1^2) / W; maximizing it minimizes the
// weighted Gini impurity of the children.
inline bool best_split_on_feature(std::vector<SplitEntry>& buf, std::size_t min_leaf, double total0, double total1,
                                  int feature, SplitChoice& best) {
  std::sort(buf.begin(), buf.end(), [](const SplitEntry& a, const SplitEntry& b) { return a.x < b.x; });
  if (buf.front().x == buf.back().x) return false;
  const std::size_t n = buf.size();
  double l0 = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    (buf[i].y ? l1 : l0) += buf[i].w;
    if (buf[i].x == buf[i + 1].x) continue;
    const std::size_t n_left = i + 1;
    if (n_left < min_leaf || n - n_left < min_leaf) continue;
    const double r0 = total0 - l0, r1 = total1 - l1;
    const double wl = l0 + l1, wr = r0 + r1;
    if (wl <= 0.0 || wr <= 0.0) continue;
    const double score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr;
    if (score > best.score) {
      best.score = score;
      best.feature = feature;
      double t = 0.5 * (buf[i].x + buf[i + 1].x);
      if (!(t < buf[i + 1].x)) t = buf[i].x;
      best.threshold = t;
    }
  }
  return true;
}

}  // namespace detail

// Grows one CART tree on the rows with positive weight. `feature_pool`
// restricts the candidate features (empty = all columns).
inline Tree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> weights, const HyperParams& hp,
                     Rng& rng, std::span<const std::size_t> feature_pool = {}) {
  if (X.rows() != y.size() || X.rows() != weights.size()) throw ShapeError("fit_tree: X, y and weights disagree in length");
  hp.validate();
  std::vector<std::uint32_t> idx;
  double total_w = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (weights[i] < 0.0) throw FitError("fit_tree: negative sample weight");
    if (weights[i] > 0.0) {
      idx.push_back(static_cast<std::uint32_t>(i));
      total_w += weights[i];
    }
  }
  if (!(total_w > 0.0)) throw FitError("fit_tree: zero total sample weight");
  if (idx.size() < hp.min_samples_leaf) throw FitError("fit_tree: fewer rows than min_samples_leaf");

  std::vector<std::size_t> pool;
  if (feature_pool.empty()) {
    pool.resize(X.cols());
    for (std::size_t f = 0; f < X.cols(); ++f) pool[f] = f;
  } else {
    pool.assign(feature_pool.begin(), feature_pool.end());
  }
  const std::size_t mtry = hp.max_features.resolve(pool.size());
  const std::size_t min_leaf = hp.min_samples_leaf;

  Tree tree;
  tree.nodes.emplace_back();
  struct Work {
    std::size_t node, begin, end, depth;
  };
  std::vector<Work> stack{{0, 0, idx.size(), 0}};
  std::vector<detail::SplitEntry> buf;
  std::vector<std::size_t> order = pool;

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    double w0 = 0.0, w1 = 0.0;
    for (std::size_t k = w.begin; k < w.end; ++k) (y[idx[k]] ? w1 : w0) += weights[idx[k]];
    tree.nodes[w.node].weight0 = w0;
    tree.nodes[w.node].weight1 = w1;
    const std::size_t n = w.end - w.begin;
    if (w0 == 0.0 || w1 == 0.0 || n < 2 * min_leaf || (hp.max_depth && w.depth >= *hp.max_depth)) continue;

    detail::SplitChoice best;
    std::size_t evaluated = 0;
    const bool shuffle = mtry < order.size();
    for (std::size_t k = 0; k < order.size() && evaluated < mtry; ++k) {
      if (shuffle) std::swap(order[k], order[k + uniform_index(rng, order.size() - k)]);
      const std::size_t f = order[k];
      buf.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = idx[w.begin + r];
        buf[r] = {X(row, f), weights[row], y[row]};
      }
      if (detail::best_split_on_feature(buf, min_leaf, w0, w1, static_cast<int>(f), best)) ++evaluated;
    }
    if (best.feature < 0) continue;

    const auto f = static_cast<std::size_t>(best.feature);
    const double thr = best.threshold;
    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(w.begin),
                              idx.begin() + static_cast<std::ptrdiff_t>(w.end),
                              [&](std::uint32_t r) { return X(r, f) <= thr; });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    const auto left = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[w.node];
    node.feature = best.feature;
    node.threshold = thr;
    node.left = static_cast<int>(left);
    node.right = static_cast<int>(left + 1);
    stack.push_back({left + 1, split, w.end, w.depth + 1});
    stack.push_back({left, w.begin, split, w.depth + 1});
  }
  return tree;
}

// Indices of the k features with the largest |corr(x, y)|, ascending.
inline std::vector<std::size_t> select_k_best(const Matrix& X, std::span<const int> y, std::size_t k) {
  const std::size_t n = X.rows(), p = X.cols();
  std::vector<std::pair<double, std::size_t>> score(p);
  double my = 0.0;
  for (int v : y) my += v;
  my /= static_cast<double>(n);
  for (std::size_t f = 0; f < p; ++f) {
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) mx += X(i, f);
    mx /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = X(i, f) - mx, dy = y[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    const double r = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    score[f] = {std::abs(r), f};
  }
  std::stable_sort(score.begin(), score.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, p); ++i) out.push_back(score[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

struct Forest {
  static constexpr int kVersion = 1;

  std::vector<Tree> trees;
  HyperParams hyperparams;
  std::size_t feature_count = 0;
  std::vector<std::size_t> selected_features;  // empty = all
  bool oob_available = false;

  double predict_proba(std::span<const double> x) const {
    if (x.size() != feature_count)
      throw ShapeError("predict_proba: expected " + std::to_string(feature_count) + " features, got " +
                       std::to_string(x.size()));
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }

  std::vector<double> predict_proba(const Matrix& X, int jobs = 1) const {
    std::vector<double> out(X.rows());
    parallel_for(X.rows(), jobs, [&](std::size_t i) { out[i] = predict_proba(X.row(i)); });
    return out;
  }

  friend bool operator==(const Forest&, const Forest&) = default;
};

inline double predict_proba(const Forest& f, std::span<const double> x) { return f.predict_proba(x); }

namespace detail {
// The first N draws of each tree's stream are its bootstrap sample.
inline std::vector<std::uint32_t> bootstrap_counts(Rng& rng, std::size_t n) {
  std::vector<std::uint32_t> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) counts[uniform_index(rng, n)]++;
  return counts;
}
}  // namespace detail

// Each tree sees a bootstrap resample of size N, weighted by the class weights
// of the full label vector, with its own stream derived from (seed, tree).
inline Forest fit_forest(const Matrix& X, std::span<const int> y, const HyperParams& hp, int jobs = 1) {
  if (X.rows() != y.size()) throw ShapeError("fit_forest: X and y disagree in length");
  if (X.rows() == 0) throw FitError("fit_forest: no rows");
  hp.validate();
  Forest forest;
  forest.hyperparams = hp;
  forest.feature_count = X.cols();
  forest.oob_available = true;
  if (hp.select_k > 0 && hp.select_k < X.cols()) forest.selected_features = select_k_best(X, y, hp.select_k);
  const auto cw = class_weights(y, hp.class_weight);
  forest.trees.resize(hp.n_trees);
  parallel_for(hp.n_trees, jobs, [&](std::size_t t) {
    Rng rng(derive_seed(hp.seed, t));
    const auto counts = detail::bootstrap_counts(rng, X.rows());
    std::vector<double> w(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) w[i] = counts[i] * cw[y[i] ? 1 : 0];
    forest.trees[t] = fit_tree(X, y, w, hp, rng, forest.selected_features);
  });
  return forest;
}

// Mean prediction of the trees whose bootstrap excluded each row (NaN when
// every tree saw it). X must be the training matrix.
inline std::vector<double> oob_predictions(const Forest& forest, const Matrix& X) {
  std::vector<double> sum(X.rows(), 0.0);
  std::vector<std::size_t> cnt(X.rows(), 0);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    Rng rng(derive_seed(forest.hyperparams.seed, t));
    const auto counts = detail::bootstrap_counts(rng, X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (counts[i]) continue;
      sum[i] += forest.trees[t].predict(X.row(i));
      ++cnt[i];
    }
  }
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i)
    out[i] = cnt[i] ? sum[i] / static_cast<double>(cnt[i]) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

inline double oob_accuracy(const Forest& forest, const Matrix& X, std::span<const int> y) {
  const auto p = oob_predictions(forest, X);
  std::size_t ok = 0, n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i])) continue;
    ++n;
    if ((p[i] >= 0.5 ? 1 : 0) == y[i]) ++ok;
  }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline void to_json(nlohmann::json& j, const Forest& f) {
  auto trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, w0, w1;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      w0.push_back(n.weight0);
      w1.push_back(n.weight1);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"weight0", w0}, {"weight1", w1}});
  }
  j = {{"format", "periop-forest"},   {"version", Forest::kVersion},
       {"hyperparams", f.hyperparams}, {"feature_count", f.feature_count},
       {"selected_features", f.selected_features}, {"oob_available", f.oob_available},
       {"trees", trees}};
}

inline void from_json(const nlohmann::json& j, Forest& f) {
  if (j.at("format") != "periop-forest" || j.at("version").get<int>() != Forest::kVersion)
    throw ConfigError("unsupported forest document");
  f.hyperparams = j.at("hyperparams").get<HyperParams>();
  f.feature_count = j.at("feature_count").get<std::size_t>();
  f.selected_features = j.at("selected_features").get<std::vector<std::size_t>>();
  f.oob_available = j.at("oob_available").get<bool>();
  f.trees.clear();
  for (const auto& jt : j.at("trees")) {
    const auto feature = jt.at("feature").get<std::vector<int>>();
    const auto threshold = jt.at("threshold").get<std::vector<double>>();
    const auto left = jt.at("left").get<std::vector<int>>();
    const auto right = jt.at("right").get<std::vector<int>>();
    const auto w0 = jt.at("weight0").get<std::vector<double>>();
    const auto w1 = jt.at("weight1").get<std::vector<double>>();
    Tree t;
    for (std::size_t i = 0; i < feature.size(); ++i) {
      if (feature[i] >= static_cast<int>(f.feature_count)) throw ConfigError("forest references unknown feature");
      t.nodes.push_back({feature[i], threshold[i], left[i], right[i], w0[i], w1[i]});
    }
    f.trees.push_back(std::move(t));
  }
}

}  // namespace periop
