#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "periop/bootstrap.hpp"
#include "periop/error.hpp"

namespace periop {

// Net reclassification between an old and a new model at their own
// low/high cut-offs (score >= threshold is high risk).
struct NriReport {
  double event_improvement = 0.0;     // (events up - events down) / events
  double nonevent_improvement = 0.0;  // (non-events down - non-events up) / non-events
  double nri = 0.0;                   // event + non-event improvement
  double overall_improvement = 0.0;   // prevalence-weighted improvement
  double prevalence = 0.0;
  std::size_t n_events = 0, n_nonevents = 0;
  std::size_t events_up = 0, events_down = 0, nonevents_up = 0, nonevents_down = 0;
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

inline NriReport nri_from_components(double event_improvement, double nonevent_improvement, double prevalence) {
  NriReport r;
  r.event_improvement = event_improvement;
  r.nonevent_improvement = nonevent_improvement;
  r.prevalence = prevalence;
  r.nri = event_improvement + nonevent_improvement;
  r.overall_improvement = prevalence * event_improvement + (1.0 - prevalence) * nonevent_improvement;
  return r;
}

inline NriReport nri(std::span<const double> scores_old, std::span<const double> scores_new, std::span<const int> labels,
                     double thr_old, double thr_new) {
  if (scores_old.size() != labels.size() || scores_new.size() != labels.size())
    throw ShapeError("nri: inputs differ in length");
  std::size_t ev = 0, nev = 0, eu = 0, ed = 0, nu = 0, nd = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool hi_old = scores_old[i] >= thr_old;
    const bool hi_new = scores_new[i] >= thr_new;
    const bool up = !hi_old && hi_new;
    const bool down = hi_old && !hi_new;
    if (labels[i]) {
      ++ev;
      eu += up;
      ed += down;
    } else {
      ++nev;
      nu += up;
      nd += down;
    }
  }
  if (ev == 0 || nev == 0) throw UndefinedMetricError("nri: both classes required");
  const double e = (static_cast<double>(eu) - static_cast<double>(ed)) / static_cast<double>(ev);
  const double ne = (static_cast<double>(nd) - static_cast<double>(nu)) / static_cast<double>(nev);
  NriReport r = nri_from_components(e, ne, static_cast<double>(ev) / static_cast<double>(labels.size()));
  r.n_events = ev;
  r.n_nonevents = nev;
  r.events_up = eu;
  r.events_down = ed;
  r.nonevents_up = nu;
  r.nonevents_down = nd;
  return r;
}

// Adds a percentile CI and a two-sided bootstrap p-value,
// p = min(1, 2 min(#{nri_b <= 0}, #{nri_b >= 0}) / B).
inline NriReport nri_with_ci(std::span<const double> scores_old, std::span<const double> scores_new,
                             std::span<const int> labels, double thr_old, double thr_new, std::size_t n_boot,
                             std::uint64_t seed, int jobs = 1) {
  NriReport r = nri(scores_old, scores_new, labels, thr_old, thr_new);
  auto boot = bootstrap_statistic(
      labels.size(),
      [&](std::span<const std::size_t> idx) {
        std::vector<double> a(idx.size()), b(idx.size());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          a[i] = scores_old[idx[i]];
          b[i] = scores_new[idx[i]];
          y[i] = labels[idx[i]];
        }
        try {
          return nri(a, b, y, thr_old, thr_new).nri;
        } catch (const UndefinedMetricError&) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      n_boot, seed, jobs);
  r.ci_lo = boot.lo;
  r.ci_hi = boot.hi;
  const auto vals = boot.defined();
  std::size_t le = 0, ge = 0;
  for (double v : vals) {
    le += v <= 0.0;
    ge += v >= 0.0;
  }
  r.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(vals.size()));
  return r;
}

}  // namespace periop
