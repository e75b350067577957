#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "periop/error.hpp"
#include "periop/metrics.hpp"
#include "periop/numeric.hpp"
#include "periop/parallel.hpp"
#include "periop/rng.hpp"

namespace periop {

enum class MetricKind { auroc, auprc, accuracy, sensitivity, specificity, ppv, npv };

// Threshold-based metrics use `threshold` with the score >= threshold rule.
struct MetricSpec {
  MetricKind kind = MetricKind::auroc;
  double threshold = 0.5;

  std::string name() const {
    switch (kind) {
      case MetricKind::auroc: return "auroc";
      case MetricKind::auprc: return "auprc";
      case MetricKind::accuracy: return "accuracy";
      case MetricKind::sensitivity: return "sensitivity";
      case MetricKind::specificity: return "specificity";
      case MetricKind::ppv: return "ppv";
      case MetricKind::npv: return "npv";
    }
    return "?";
  }
};

// NaN when the metric is undefined on this sample.
inline double evaluate_metric(const MetricSpec& m, std::span<const double> scores, std::span<const int> labels) {
  try {
    switch (m.kind) {
      case MetricKind::auroc: return auroc(scores, labels);
      case MetricKind::auprc: return auprc(scores, labels);
      default: break;
    }
    const auto c = confusion_metrics(scores, labels, m.threshold);
    switch (m.kind) {
      case MetricKind::accuracy: return c.accuracy;
      case MetricKind::sensitivity: return c.sensitivity;
      case MetricKind::specificity: return c.specificity;
      case MetricKind::ppv: return c.ppv;
      case MetricKind::npv: return c.npv;
      default: break;
    }
  } catch (const UndefinedMetricError&) {
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Resample of size n for one replicate; shared by every metric and model so
// paired comparisons see identical cohorts.
inline std::vector<std::size_t> resample_indices(std::uint64_t seed, std::size_t replicate, std::size_t n) {
  Rng rng(derive_seed(seed, 0xb0075ULL, replicate));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n));
  return idx;
}

struct BootstrapResult {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> replicates;  // one per replicate; NaN where undefined
  std::size_t n_undefined = 0;

  std::vector<double> defined() const {
    std::vector<double> out;
    for (double v : replicates)
      if (!std::isnan(v)) out.push_back(v);
    return out;
  }
};

// Percentile interval over the defined replicates. Fails when more than half
// of them are undefined.
inline void summarize_replicates(BootstrapResult& r, double alpha = 0.05) {
  auto vals = r.defined();
  r.n_undefined = r.replicates.size() - vals.size();
  if (vals.empty() || 2 * r.n_undefined > r.replicates.size())
    throw UndefinedMetricError("bootstrap: " + std::to_string(r.n_undefined) + " of " +
                               std::to_string(r.replicates.size()) + " replicates undefined");
  std::sort(vals.begin(), vals.end());
  r.lo = percentile_sorted(vals, alpha / 2.0);
  r.hi = percentile_sorted(vals, 1.0 - alpha / 2.0);
}

// Generic case-resampling bootstrap: stat receives the resampled indices.
template <typename Stat>
BootstrapResult bootstrap_statistic(std::size_t n, Stat&& stat, std::size_t n_boot, std::uint64_t seed, int jobs = 1) {
  BootstrapResult r;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  r.point = stat(std::span<const std::size_t>(all));
  r.replicates.assign(n_boot, 0.0);
  parallel_for(n_boot, jobs, [&](std::size_t b) {
    const auto idx = resample_indices(seed, b, n);
    r.replicates[b] = stat(std::span<const std::size_t>(idx));
  });
  summarize_replicates(r);
  return r;
}

inline BootstrapResult bootstrap_ci(std::span<const double> scores, std::span<const int> labels, const MetricSpec& metric,
                                    std::size_t n_boot = 1000, std::uint64_t seed = 0, int jobs = 1) {
  if (scores.size() != labels.size()) throw ShapeError("bootstrap_ci: scores and labels differ in length");
  return bootstrap_statistic(
      scores.size(),
      [&](std::span<const std::size_t> idx) {
        std::vector<double> s(idx.size());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          s[i] = scores[idx[i]];
          y[i] = labels[idx[i]];
        }
        return evaluate_metric(metric, s, y);
      },
      n_boot, seed, jobs);
}

}  // namespace periop
