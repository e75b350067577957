#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "periop/cohort.hpp"
#include "periop/numeric.hpp"

namespace periop {

// A sample is a spike when it deviates from the centred rolling median by
// more than `mad_multiplier` times the channel's (unscaled) median absolute
// deviation.
struct SpikeParams {
  std::size_t window = 5;
  double mad_multiplier = 6.0;
  std::size_t max_passes = 64;
};

struct CleanResult {
  TimeSeriesChannel channel;
  std::size_t out_of_range = 0;
  std::size_t duplicates_merged = 0;
  std::size_t spikes_replaced = 0;
};

namespace detail {

inline std::vector<double> rolling_median(const std::vector<double>& v, std::size_t window) {
  const std::size_t n = v.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  std::vector<double> buf;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    buf.assign(v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    std::sort(buf.begin(), buf.end());
    out[i] = percentile_sorted(buf, 0.5);
  }
  return out;
}

}  // namespace detail

// Range filter, then duplicate-time averaging, then spike replacement by the
// encounter median. Spike replacement is repeated until a pass changes
// nothing, which makes the whole operation idempotent.
inline CleanResult clean_timeseries_detailed(const TimeSeriesChannel& channel, const Range& range,
                                             const SpikeParams& spike = {}) {
  CleanResult res;
  res.channel.name = channel.name;

  std::vector<Sample> kept;
  kept.reserve(channel.samples.size());
  for (const auto& s : channel.samples) {
    if (std::isfinite(s.value) && range.contains(s.value))
      kept.push_back(s);
    else
      ++res.out_of_range;
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Sample& a, const Sample& b) { return a.time_s < b.time_s; });

  auto& out = res.channel.samples;
  for (std::size_t i = 0; i < kept.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < kept.size() && kept[j].time_s == kept[i].time_s) sum += kept[j++].value;
    const std::size_t count = j - i;
    out.push_back({kept[i].time_s, count == 1 ? kept[i].value : sum / static_cast<double>(count)});
    res.duplicates_merged += count - 1;
    i = j;
  }
  if (out.size() < 3) return res;

  std::vector<double> values(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) values[i] = out[i].value;
  std::vector<bool> replaced(values.size(), false);
  for (std::size_t pass = 0; pass < spike.max_passes; ++pass) {
    const double med = median(values);
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - med);
    const double mad = median(dev);
    const auto roll = detail::rolling_median(values, spike.window);
    bool changed = false;
    std::vector<double> next = values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (std::abs(values[i] - roll[i]) > spike.mad_multiplier * mad && values[i] != med) {
        next[i] = med;
        replaced[i] = true;
        changed = true;
      }
    }
    values = std::move(next);
    if (!changed) break;
  }
  for (std::size_t i = 0; i < values.size(); ++i) out[i].value = values[i];
  res.spikes_replaced = static_cast<std::size_t>(std::count(replaced.begin(), replaced.end(), true));
  return res;
}

inline TimeSeriesChannel clean_timeseries(const TimeSeriesChannel& channel, const Range& range,
                                          const SpikeParams& spike = {}) {
  return clean_timeseries_detailed(channel, range, spike).channel;
}

struct TimeSeriesFeatures {
  double min = kMissing;
  double max = kMissing;
  double mean = kMissing;
  double sd = kMissing;
  double short_term_var = kMissing;  // mean squared successive difference
  double long_term_var = kMissing;   // variance of window means
  std::vector<double> band_fraction;  // time fraction spent inside each band

  std::vector<double> values() const {
    std::vector<double> v = {min, max, mean, sd, short_term_var, long_term_var};
    v.insert(v.end(), band_fraction.begin(), band_fraction.end());
    return v;
  }
};

inline std::vector<std::string> timeseries_feature_names(const std::string& channel, const std::vector<Range>& bands) {
  std::vector<std::string> names;
  for (const char* s : {"min", "max", "mean", "sd", "stv", "ltv"}) names.push_back(channel + "__" + s);
  for (const auto& b : bands) names.push_back(channel + "__band_" + format_double(b.lo) + "_" + format_double(b.hi));
  return names;
}

// Per-sample holding times under last-observation-carried-forward. The final
// sample is held for the median inter-sample gap (1 s for a single sample).
inline std::vector<double> holding_times(const std::vector<Sample>& s) {
  std::vector<double> d(s.size(), 1.0);
  if (s.size() < 2) return d;
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) gaps.push_back(s[i + 1].time_s - s[i].time_s);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) d[i] = gaps[i];
  d.back() = median(gaps);
  return d;
}

// Expects a cleaned channel (ascending unique times). An empty channel yields
// all-missing features for downstream median imputation.
inline TimeSeriesFeatures extract_ts_features(const TimeSeriesChannel& channel, const std::vector<Range>& bands,
                                              double window_s = 300.0) {
  TimeSeriesFeatures f;
  const auto& s = channel.samples;
  if (s.empty()) {
    f.band_fraction.assign(bands.size(), kMissing);
    return f;
  }
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].value;
  f.min = *std::min_element(v.begin(), v.end());
  f.max = *std::max_element(v.begin(), v.end());
  f.mean = mean(v);
  f.sd = std::sqrt(variance(v));

  f.short_term_var = 0.0;
  if (v.size() >= 2) {
    double acc = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) acc += (v[i] - v[i - 1]) * (v[i] - v[i - 1]);
    f.short_term_var = acc / static_cast<double>(v.size() - 1);
  }

  std::vector<double> window_means;
  for (std::size_t i = 0; i < s.size();) {
    const double w = std::floor(s[i].time_s / window_s);
    double sum = 0.0;
    std::size_t j = i;
    while (j < s.size() && std::floor(s[j].time_s / window_s) == w) sum += s[j++].value;
    window_means.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  f.long_term_var = variance(window_means);

  const auto hold = holding_times(s);
  double total = 0.0;
  for (double d : hold) total += d;
  for (const auto& b : bands) {
    double inside = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (b.contains(v[i])) inside += hold[i];
    f.band_fraction.push_back(total > 0.0 ? inside / total : kMissing);
  }
  return f;
}

}  // namespace periop
