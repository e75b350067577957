#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "periop/error.hpp"

namespace periop {

namespace detail {

inline void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size()) throw ShapeError(std::string(what) + ": scores and labels differ in length");
  if (scores.empty()) throw UndefinedMetricError(std::string(what) + ": empty input");
  for (int y : labels)
    if (y != 0 && y != 1) throw ShapeError(std::string(what) + ": labels must be 0 or 1");
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  return {pos, labels.size() - pos};
}

// Indices sorted by descending score.
inline std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace detail

// Mann-Whitney AUROC from mid-rank sums: P(s+ > s-) + P(s+ = s-)/2.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels, "auroc");
  const auto [pos, neg] = detail::class_counts(labels);
  if (pos == 0 || neg == 0) throw UndefinedMetricError("auroc: both classes required");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]] == 1) rank_sum += mid_rank;
    i = j;
  }
  const double np = static_cast<double>(pos), nn = static_cast<double>(neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Step-wise average precision: sum over descending distinct thresholds of
// (R_i - R_{i-1}) * P_i.
inline double auprc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels, "auprc");
  const auto [pos, neg] = detail::class_counts(labels);
  if (pos == 0) throw UndefinedMetricError("auprc: no positive labels");
  const auto idx = detail::order_desc(scores);
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp)++;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct RocPoint {
  double fpr, tpr, threshold;
};
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct PrPoint {
  double recall, precision, threshold;
};
struct PrCurve {
  std::vector<PrPoint> points;
  double auc = 0.0;
};

// Starts at (0, 0) with threshold +inf; each distinct score adds one point.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  RocCurve c;
  c.auc = auroc(scores, labels);
  const auto [pos, neg] = detail::class_counts(labels);
  const auto idx = detail::order_desc(scores);
  c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp)++;
      ++j;
    }
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos), scores[idx[i]]});
    i = j;
  }
  return c;
}

inline PrCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
  PrCurve c;
  c.auc = auprc(scores, labels);
  const auto [pos, neg] = detail::class_counts(labels);
  (void)neg;
  const auto idx = detail::order_desc(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp)++;
      ++j;
    }
    c.points.push_back({static_cast<double>(tp) / static_cast<double>(pos),
                        static_cast<double>(tp) / static_cast<double>(tp + fp), scores[idx[i]]});
    i = j;
  }
  return c;
}

struct YoudenPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double j = 0.0;
};

// Maximizes sensitivity + specificity - 1 over thresholds equal to observed
// scores (score >= threshold is positive). J is compared exactly through
// integer cross-products; ties go to the lowest threshold.
inline YoudenPoint youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels, "youden_threshold");
  const auto [pos, neg] = detail::class_counts(labels);
  if (pos == 0 || neg == 0) throw UndefinedMetricError("youden_threshold: both classes required");
  const auto idx = detail::order_desc(scores);
  // J + 1 = (tp * neg + tn * pos) / (pos * neg)
  unsigned __int128 best_num = 0;
  YoudenPoint best;
  bool found = false;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp)++;
      ++j;
    }
    const std::size_t tn = neg - fp;
    const unsigned __int128 num = static_cast<unsigned __int128>(tp) * neg + static_cast<unsigned __int128>(tn) * pos;
    // Descending scan: >= moves ties toward the lower threshold.
    if (!found || num >= best_num) {
      found = true;
      best_num = num;
      best.threshold = scores[idx[i]];
      best.sensitivity = static_cast<double>(tp) / static_cast<double>(pos);
      best.specificity = static_cast<double>(tn) / static_cast<double>(neg);
    }
    i = j;
  }
  best.j = best.sensitivity + best.specificity - 1.0;
  return best;
}

struct ConfusionSummary {
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double sensitivity = 0.0, specificity = 0.0, ppv = 0.0, npv = 0.0, accuracy = 0.0;
};

namespace detail {
inline double ratio(std::size_t a, std::size_t b) {
  return b ? static_cast<double>(a) / static_cast<double>(b) : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

inline ConfusionSummary confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
                                              double threshold = 0.0) {
  ConfusionSummary c;
  c.threshold = threshold;
  c.tp = tp;
  c.fp = fp;
  c.tn = tn;
  c.fn = fn;
  c.sensitivity = detail::ratio(tp, tp + fn);
  c.specificity = detail::ratio(tn, tn + fp);
  c.ppv = detail::ratio(tp, tp + fp);
  c.npv = detail::ratio(tn, tn + fn);
  c.accuracy = detail::ratio(tp + tn, tp + tn + fp + fn);
  return c;
}

// score >= threshold predicts positive. Undefined ratios are NaN.
inline ConfusionSummary confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                          double threshold) {
  detail::check_inputs(scores, labels, "confusion_metrics");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool high = scores[i] >= threshold;
    if (labels[i]) (high ? tp : fn)++;
    else (high ? fp : tn)++;
  }
  return confusion_from_counts(tp, fp, tn, fn, threshold);
}

}  // namespace periop
