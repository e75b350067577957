#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "periop/error.hpp"

namespace periop {

struct WilcoxonResult {
  double statistic = 0.0;  // W+: rank sum of positive differences a - b
  double p_value = 1.0;    // two-sided
  std::size_t n_used = 0;  // nonzero differences
  bool exact = true;
  double z = 0.0;          // normal-approximation score (0 when exact)
};

namespace detail {

struct SignedRanks {
  std::vector<std::uint32_t> doubled_ranks;  // 2 * mid-rank, always an integer
  std::vector<bool> positive;
  std::vector<std::size_t> tie_sizes;
};

inline SignedRanks signed_ranks(std::span<const double> diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  SignedRanks r;
  r.doubled_ranks.resize(d.size());
  r.positive.resize(d.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && std::abs(d[idx[j]]) == std::abs(d[idx[i]])) ++j;
    // Positions i+1..j share the mid-rank (i+1+j)/2.
    for (std::size_t k = i; k < j; ++k) r.doubled_ranks[k] = static_cast<std::uint32_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r.positive[k] = d[idx[k]] > 0.0;
    r.tie_sizes.push_back(j - i);
    i = j;
  }
  return r;
}

}  // namespace detail

// Exact two-sided p-value, p = min(1, 2 min(P(T <= t), P(T >= t))), from the
// full null distribution of the (doubled) signed-rank sum.
inline double wilcoxon_exact_p(std::span<const double> diffs) {
  const auto r = detail::signed_ranks(diffs);
  const std::size_t n = r.doubled_ranks.size();
  if (n == 0) return 1.0;
  if (n > 62) throw ShapeError("wilcoxon_exact_p: n too large for exact enumeration");
  std::uint64_t total = 0, observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += r.doubled_ranks[i];
    if (r.positive[i]) observed += r.doubled_ranks[i];
  }
  std::vector<std::uint64_t> dist(total + 1, 0);
  dist[0] = 1;
  for (auto rank : r.doubled_ranks)
    for (std::uint64_t s = total; s >= rank; --s) dist[s] += dist[s - rank];
  std::uint64_t le = 0, ge = 0;
  for (std::uint64_t s = 0; s <= total; ++s) {
    if (s <= observed) le += dist[s];
    if (s >= observed) ge += dist[s];
  }
  const double p = 2.0 * static_cast<double>(std::min(le, ge)) / std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, p);
}

// Normal approximation with tie correction and continuity correction.
inline double wilcoxon_normal_p(std::span<const double> diffs, double* z_out = nullptr) {
  const auto r = detail::signed_ranks(diffs);
  const auto n = static_cast<double>(r.doubled_ranks.size());
  if (n == 0) return 1.0;
  double w = 0.0;
  for (std::size_t i = 0; i < r.doubled_ranks.size(); ++i)
    if (r.positive[i]) w += 0.5 * r.doubled_ranks[i];
  const double mu = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  for (auto t : r.tie_sizes) var -= (std::pow(static_cast<double>(t), 3) - static_cast<double>(t)) / 48.0;
  if (var <= 0.0) return 1.0;
  const double dev = std::max(0.0, std::abs(w - mu) - 0.5);
  const double z = (w >= mu ? dev : -dev) / std::sqrt(var);
  if (z_out) *z_out = z;
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

// Two-sided signed-rank test on paired samples. Zero differences are
// dropped; exact null distribution up to `exact_max_n` nonzero pairs.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           std::size_t exact_max_n = 25) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon_signed_rank: paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto r = detail::signed_ranks(d);
  WilcoxonResult res;
  res.n_used = r.doubled_ranks.size();
  for (std::size_t i = 0; i < r.doubled_ranks.size(); ++i)
    if (r.positive[i]) res.statistic += 0.5 * r.doubled_ranks[i];
  if (res.n_used == 0) return res;
  if (res.n_used <= exact_max_n) {
    res.exact = true;
    res.p_value = wilcoxon_exact_p(d);
  } else {
    res.exact = false;
    res.p_value = wilcoxon_normal_p(d, &res.z);
  }
  return res;
}

}  // namespace periop
