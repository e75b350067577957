#pragma once

// Brute-force reference implementations. Deliberately naive: they share no
// code with the library beyond the RNG and resample streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "periop/periop.hpp"

namespace oracle {

// O(n^2) pair count: (correctly ordered + ties/2) / (pos * neg).
inline double auroc_pairwise(std::span<const double> s, std::span<const int> y) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (y[i] ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / 2.0 / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Average precision from first principles: for each distinct threshold,
// recompute tp/fp by a full pass.
inline double average_precision(std::span<const double> s, std::span<const int> y) {
  std::vector<double> thr(s.begin(), s.end());
  std::sort(thr.begin(), thr.end(), std::greater<>());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  double pos = 0;
  for (int v : y) pos += v;
  double ap = 0, prev = 0;
  for (double t : thr) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    ap += (tp / pos - prev) * (tp / (tp + fp));
    prev = tp / pos;
  }
  return ap;
}

// Largest J over every observed score used as a cut-off, as the integer
// tp*neg + tn*pos; also the lowest cut-off attaining it.
struct YoudenScan {
  std::uint64_t best_num = 0;
  double lowest_threshold = 0;
};

inline YoudenScan youden_scan(std::span<const double> s, std::span<const int> y) {
  std::uint64_t pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg)++;
  YoudenScan r;
  bool first = true;
  for (double t : s) {
    std::uint64_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (y[i] && s[i] >= t) ++tp;
      if (!y[i] && s[i] < t) ++tn;
    }
    const std::uint64_t num = tp * neg + tn * pos;
    if (first || num > r.best_num || (num == r.best_num && t < r.lowest_threshold)) {
      r.best_num = num;
      r.lowest_threshold = t;
      first = false;
    }
  }
  return r;
}

inline std::uint64_t youden_numerator(std::span<const double> s, std::span<const int> y, double t) {
  std::uint64_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    (y[i] ? pos : neg)++;
    if (y[i] && s[i] >= t) ++tp;
    if (!y[i] && s[i] < t) ++tn;
  }
  return tp * neg + tn * pos;
}

// Two-sided signed-rank p-value by enumerating all 2^n sign patterns of the
// nonzero differences' mid-ranks.
inline double wilcoxon_enumerate(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  std::uint64_t le = 0, ge = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double t = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) t += rank[i];
    if (t <= observed) ++le;
    if (t >= observed) ++ge;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / std::ldexp(1.0, static_cast<int>(n)));
}

// Percentile bootstrap written out longhand on the library's resample streams.
struct PercentileCi {
  double lo, hi;
};

inline double linear_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <typename Metric>
PercentileCi bootstrap_percentile(std::span<const double> s, std::span<const int> y, Metric metric, std::size_t n_boot,
                                  std::uint64_t seed) {
  std::vector<double> reps;
  for (std::size_t b = 0; b < n_boot; ++b) {
    const auto idx = periop::resample_indices(seed, b, s.size());
    std::vector<double> rs;
    std::vector<int> ry;
    for (auto i : idx) {
      rs.push_back(s[i]);
      ry.push_back(y[i]);
    }
    const double v = metric(rs, ry);
    if (!std::isnan(v)) reps.push_back(v);
  }
  return {linear_quantile(reps, 0.025), linear_quantile(reps, 0.975)};
}

// One-sample Kolmogorov-Smirnov statistic against Uniform(lo, hi).
inline double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic KS critical value at alpha = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Random scores with frequent ties.
inline void fuzz_scores(periop::Rng& rng, std::size_t n, std::vector<double>& s, std::vector<int>& y) {
  s.resize(n);
  y.resize(n);
  const std::size_t levels = 1 + periop::uniform_index(rng, 20);
  const double prevalence = 0.05 + 0.9 * periop::uniform01(rng);
  do {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = periop::bernoulli(rng, prevalence);
      s[i] = static_cast<double>(periop::uniform_index(rng, levels)) / static_cast<double>(levels) + 0.1 * y[i];
    }
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
}

}  // namespace oracle
