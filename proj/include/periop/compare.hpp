#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "periop/bootstrap.hpp"
#include "periop/error.hpp"
#include "periop/metrics.hpp"
#include "periop/nri.hpp"
#include "periop/pipeline.hpp"
#include "periop/wilcoxon.hpp"

namespace periop {

struct CompareOptions {
  std::size_t n_boot = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Column order of the text table.
inline const std::vector<MetricKind>& report_metrics() {
  static const std::vector<MetricKind> m = {MetricKind::sensitivity, MetricKind::specificity, MetricKind::npv,
                                            MetricKind::ppv,         MetricKind::accuracy,    MetricKind::auroc,
                                            MetricKind::auprc};
  return m;
}

struct ModelSummary {
  std::string label;
  double threshold = 0.0;
  ConfusionSummary confusion;
  std::map<std::string, BootstrapResult> metrics;  // keyed by MetricSpec::name()
};

struct OutcomeComparison {
  std::string outcome;
  std::size_t n = 0;
  double prevalence = 0.0;
  ModelSummary old_model, new_model;
  WilcoxonResult p_auroc, p_auprc, p_accuracy;
  NriReport nri;
};

struct ComparisonReport {
  std::string old_label = "preop";
  std::string new_label = "postop";
  std::size_t n_boot = 0;
  std::uint64_t seed = 0;
  std::vector<OutcomeComparison> outcomes;
};

namespace detail {

inline BootstrapResult metric_bootstrap(std::span<const double> s, std::span<const int> y, MetricKind kind,
                                        double threshold, const CompareOptions& o) {
  MetricSpec spec{kind, threshold};
  try {
    return bootstrap_ci(s, y, spec, o.n_boot, o.seed, o.jobs);
  } catch (const UndefinedMetricError&) {
    // Keep the replicates for reporting; CI stays undefined.
    BootstrapResult r;
    r.point = evaluate_metric(spec, s, y);
    r.lo = r.hi = std::numeric_limits<double>::quiet_NaN();
    r.replicates.resize(o.n_boot);
    for (std::size_t b = 0; b < o.n_boot; ++b) {
      const auto idx = resample_indices(o.seed, b, s.size());
      std::vector<double> ss(idx.size());
      std::vector<int> yy(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        ss[i] = s[idx[i]];
        yy[i] = y[idx[i]];
      }
      r.replicates[b] = evaluate_metric(spec, ss, yy);
    }
    r.n_undefined = r.defined().size() < o.n_boot ? o.n_boot - r.defined().size() : 0;
    return r;
  }
}

inline ModelSummary summarize_model(std::string label, std::span<const double> s, std::span<const int> y,
                                    double threshold, const CompareOptions& o) {
  ModelSummary m;
  m.label = std::move(label);
  m.threshold = threshold;
  m.confusion = confusion_metrics(s, y, threshold);
  for (auto kind : report_metrics()) {
    MetricSpec spec{kind, threshold};
    m.metrics.emplace(spec.name(), metric_bootstrap(s, y, kind, threshold, o));
  }
  return m;
}

// Wilcoxon on per-replicate differences, skipping replicates where either
// model's metric is undefined.
inline WilcoxonResult paired_test(const BootstrapResult& a, const BootstrapResult& b) {
  std::vector<double> x, z;
  for (std::size_t i = 0; i < a.replicates.size() && i < b.replicates.size(); ++i)
    if (!std::isnan(a.replicates[i]) && !std::isnan(b.replicates[i])) {
      x.push_back(a.replicates[i]);
      z.push_back(b.replicates[i]);
    }
  return wilcoxon_signed_rank(z, x);
}

}  // namespace detail

// Both models are scored on the same resample indices, so replicate b of
// every metric refers to the same bootstrap cohort.
inline OutcomeComparison compare_models(std::string outcome, std::span<const double> scores_old,
                                        std::span<const double> scores_new, std::span<const int> labels,
                                        double thr_old, double thr_new, const CompareOptions& o = {},
                                        const std::string& old_label = "preop", const std::string& new_label = "postop") {
  if (scores_old.size() != labels.size() || scores_new.size() != labels.size())
    throw ShapeError("compare_models: inputs differ in length");
  OutcomeComparison c;
  c.outcome = std::move(outcome);
  c.n = labels.size();
  c.prevalence = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / static_cast<double>(c.n);
  c.old_model = detail::summarize_model(old_label, scores_old, labels, thr_old, o);
  c.new_model = detail::summarize_model(new_label, scores_new, labels, thr_new, o);
  auto key = [](MetricKind k) { return MetricSpec{k}.name(); };
  c.p_auroc = detail::paired_test(c.old_model.metrics.at(key(MetricKind::auroc)), c.new_model.metrics.at(key(MetricKind::auroc)));
  c.p_auprc = detail::paired_test(c.old_model.metrics.at(key(MetricKind::auprc)), c.new_model.metrics.at(key(MetricKind::auprc)));
  c.p_accuracy =
      detail::paired_test(c.old_model.metrics.at(key(MetricKind::accuracy)), c.new_model.metrics.at(key(MetricKind::accuracy)));
  c.nri = nri_with_ci(scores_old, scores_new, labels, thr_old, thr_new, o.n_boot, o.seed, o.jobs);
  return c;
}

// Panels keyed by case_id. The three maps must cover the same cases.
inline OutcomeComparison compare_panels(std::string outcome, const std::map<std::string, double>& old_panel,
                                        const std::map<std::string, double>& new_panel,
                                        const std::map<std::string, int>& labels, double thr_old, double thr_new,
                                        const CompareOptions& o = {}) {
  auto same_keys = [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return false;
    for (auto i = a.begin(), j = b.begin(); i != a.end(); ++i, ++j)
      if (i->first != j->first) return false;
    return true;
  };
  if (!same_keys(old_panel, new_panel) || !same_keys(old_panel, labels))
    throw AlignmentError("compare: panels and labels cover different case sets for " + outcome);
  std::vector<double> a, b;
  std::vector<int> y;
  for (const auto& [id, p] : old_panel) {
    a.push_back(p);
    b.push_back(new_panel.at(id));
    y.push_back(labels.at(id));
  }
  return compare_models(std::move(outcome), a, b, y, thr_old, thr_new, o);
}

struct LayerScores {
  std::vector<std::string> case_ids;
  std::vector<double> preop, postop;
  std::vector<int> labels;
};

// Cases that carry a label and both layer probabilities for `outcome`.
inline LayerScores collect_layer_scores(const std::vector<RiskPanel>& panels, const CohortTable& cohort,
                                        const std::string& outcome) {
  LayerScores s;
  for (const auto& p : panels) {
    const auto* a = p.find(outcome, Layer::preop_only);
    const auto* b = p.find(outcome, Layer::preop_plus_intraop);
    const auto* c = cohort.find(p.case_id);
    if (!a || !b || !c) continue;
    const auto y = c->outcome(outcome);
    if (!y) continue;
    s.case_ids.push_back(p.case_id);
    s.preop.push_back(a->probability);
    s.postop.push_back(b->probability);
    s.labels.push_back(*y);
  }
  return s;
}

// Preop vs postop layer for every outcome trained on both layers. Thresholds
// come from the bundle unless `thresholds_from_data` asks for Youden cut-offs
// on the evaluated cases.
inline ComparisonReport compare_layers(const PipelineBundle& bundle, const std::vector<RiskPanel>& panels,
                                       const CohortTable& cohort, const CompareOptions& o = {},
                                       bool thresholds_from_data = false) {
  ComparisonReport r;
  r.n_boot = o.n_boot;
  r.seed = o.seed;
  for (const auto& outcome : bundle.trained_outcomes()) {
    const auto* mo = bundle.find(outcome, Layer::preop_only);
    const auto* mn = bundle.find(outcome, Layer::preop_plus_intraop);
    if (!mo || !mn) continue;
    const auto s = collect_layer_scores(panels, cohort, outcome);
    const auto pos = std::count(s.labels.begin(), s.labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(s.labels.size())) {
      warn("compare: " + outcome + " has a single class on the evaluated cases; skipped");
      continue;
    }
    double t_old = mo->threshold, t_new = mn->threshold;
    if (thresholds_from_data) {
      t_old = youden_threshold(s.preop, s.labels).threshold;
      t_new = youden_threshold(s.postop, s.labels).threshold;
    }
    r.outcomes.push_back(compare_models(outcome, s.preop, s.postop, s.labels, t_old, t_new, o));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline nlohmann::json num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline nlohmann::json wilcoxon_json(const WilcoxonResult& w) {
  return {{"statistic", num(w.statistic)}, {"p_value", num(w.p_value)}, {"n", w.n_used}, {"exact", w.exact}};
}

inline nlohmann::json model_json(const ModelSummary& m) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, b] : m.metrics)
    metrics[name] = {{"point", num(b.point)}, {"ci_lo", num(b.lo)}, {"ci_hi", num(b.hi)}, {"n_undefined", b.n_undefined}};
  const auto& c = m.confusion;
  return {{"label", m.label},
          {"threshold", m.threshold},
          {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
          {"metrics", metrics}};
}

inline std::string fmt3(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string with_ci(double point, double lo, double hi) {
  return fmt3(point) + " (" + fmt3(lo) + "-" + fmt3(hi) + ")";
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& c : r.outcomes) {
    const auto& n = c.nri;
    outs.push_back({{"outcome", c.outcome},
                    {"n", c.n},
                    {"prevalence", c.prevalence},
                    {"models", {detail::model_json(c.old_model), detail::model_json(c.new_model)}},
                    {"paired_tests",
                     {{"auroc", detail::wilcoxon_json(c.p_auroc)},
                      {"auprc", detail::wilcoxon_json(c.p_auprc)},
                      {"accuracy", detail::wilcoxon_json(c.p_accuracy)}}},
                    {"nri",
                     {{"nri", n.nri},
                      {"ci_lo", detail::num(n.ci_lo)},
                      {"ci_hi", detail::num(n.ci_hi)},
                      {"p_value", detail::num(n.p_value)},
                      {"event_improvement", n.event_improvement},
                      {"nonevent_improvement", n.nonevent_improvement},
                      {"overall_improvement", n.overall_improvement},
                      {"events_up", n.events_up},
                      {"events_down", n.events_down},
                      {"nonevents_up", n.nonevents_up},
                      {"nonevents_down", n.nonevents_down}}}});
  }
  return {{"format", "periop-comparison"},
          {"old_model", r.old_label},
          {"new_model", r.new_label},
          {"n_boot", r.n_boot},
          {"seed", r.seed},
          {"paired_test_method", "Wilcoxon signed-rank on per-replicate metric differences over shared bootstrap resamples"},
          {"outcomes", outs}};
}

// Aligned 3-decimal table: one row per model with the performance columns,
// then the paired p-values and the reclassification block.
inline std::string format_report_text(const ComparisonReport& r) {
  std::ostringstream os;
  const std::vector<std::string> cols = {"Sensitivity", "Specificity", "NPV", "PPV", "Accuracy", "AUROC", "AUPRC"};
  constexpr std::size_t w0 = 8, w = 22;
  for (const auto& c : r.outcomes) {
    os << "Outcome: " << c.outcome << "  (n=" << c.n << ", prevalence " << detail::fmt3(c.prevalence) << ")\n";
    os << detail::pad("Model", w0);
    for (const auto& h : cols) os << detail::pad(h, w);
    os << "Threshold\n";
    for (const auto* m : {&c.old_model, &c.new_model}) {
      os << detail::pad(m->label, w0);
      for (auto kind : report_metrics()) {
        const auto& b = m->metrics.at(MetricSpec{kind}.name());
        os << detail::pad(detail::with_ci(b.point, b.lo, b.hi), w);
      }
      os << detail::fmt3(m->threshold) << '\n';
    }
    os << "Paired Wilcoxon p-value (bootstrap replicates): AUROC " << detail::fmt3(c.p_auroc.p_value) << "  AUPRC "
       << detail::fmt3(c.p_auprc.p_value) << "  Accuracy " << detail::fmt3(c.p_accuracy.p_value) << '\n';
    os << detail::pad("NRI (95% CI)", w) << detail::pad("P-value", 10) << detail::pad("Event", 10)
       << detail::pad("Non-Event", 11) << "Overall\n";
    const auto& n = c.nri;
    os << detail::pad(detail::with_ci(n.nri, n.ci_lo, n.ci_hi), w) << detail::pad(detail::fmt3(n.p_value), 10)
       << detail::pad(detail::fmt3(n.event_improvement), 10) << detail::pad(detail::fmt3(n.nonevent_improvement), 11)
       << detail::fmt3(n.overall_improvement) << "\n\n";
  }
  return os.str();
}

inline void write_roc_csv(const RocCurve& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : c.points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ',' << format_double(p.threshold) << '\n';
}

inline void write_pr_csv(const PrCurve& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "recall,precision,threshold\n";
  for (const auto& p : c.points)
    out << format_double(p.recall) << ',' << format_double(p.precision) << ',' << format_double(p.threshold) << '\n';
}

}  // namespace periop
