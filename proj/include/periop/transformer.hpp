#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "periop/cohort.hpp"
#include "periop/encoding.hpp"
#include "periop/log.hpp"
#include "periop/numeric.hpp"
#include "periop/parallel.hpp"
#include "periop/rng.hpp"
#include "periop/timeseries.hpp"

namespace periop {

enum class Layer { preop_only, preop_plus_intraop };

NLOHMANN_JSON_SERIALIZE_ENUM(Layer, {{Layer::preop_only, "preop_only"}, {Layer::preop_plus_intraop, "preop_plus_intraop"}})

inline std::string to_string(Layer l) { return nlohmann::json(l).get<std::string>(); }
inline constexpr std::array<Layer, 2> kLayers = {Layer::preop_only, Layer::preop_plus_intraop};

// Continuous features whose missing values mean "none recorded".
inline bool zero_imputed_feature(std::string_view name) {
  return name == "estimated_blood_loss" || name == "urine_output";
}

using FeatureVector = std::vector<double>;

struct TransformerOptions {
  SpikeParams spike;
  double ts_window_s = 300.0;
  std::size_t procedure_depth = 3;
  std::size_t procedure_min_support = 10;
  double smoothing_k = 0.5;
};

inline void to_json(nlohmann::json& j, const TransformerOptions& o) {
  j = {{"spike_window", o.spike.window},
       {"spike_mad_multiplier", o.spike.mad_multiplier},
       {"spike_max_passes", o.spike.max_passes},
       {"ts_window_s", o.ts_window_s},
       {"procedure_depth", o.procedure_depth},
       {"procedure_min_support", o.procedure_min_support},
       {"smoothing_k", o.smoothing_k}};
}

inline void from_json(const nlohmann::json& j, TransformerOptions& o) {
  o.spike.window = j.at("spike_window").get<std::size_t>();
  o.spike.mad_multiplier = j.at("spike_mad_multiplier").get<double>();
  o.spike.max_passes = j.at("spike_max_passes").get<std::size_t>();
  o.ts_window_s = j.at("ts_window_s").get<double>();
  o.procedure_depth = j.at("procedure_depth").get<std::size_t>();
  o.procedure_min_support = j.at("procedure_min_support").get<std::size_t>();
  o.smoothing_k = j.at("smoothing_k").get<double>();
}

// One column of the transformed feature vector.
struct OutputSlot {
  std::string name;
  std::size_t feature = 0;  // index into the schema
  FeatureKind kind = FeatureKind::continuous;
  Phase phase = Phase::preoperative;
};

inline std::vector<OutputSlot> output_layout(const FeatureSchema& schema) {
  std::vector<OutputSlot> out;
  const auto& fs = schema.features();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (fs[i].kind == FeatureKind::timeseries) {
      for (auto& n : timeseries_feature_names(fs[i].name, fs[i].bands)) out.push_back({n, i, fs[i].kind, fs[i].phase});
    } else {
      out.push_back({fs[i].name, i, fs[i].kind, fs[i].phase});
    }
  }
  return out;
}

inline bool slot_in_layer(const OutputSlot& s, Layer layer) {
  return layer == Layer::preop_plus_intraop || s.phase == Phase::preoperative;
}

// Label-free per-case extraction: numeric slots hold raw values (NaN when
// missing or outside the allowed range), token slots hold category tokens.
struct RawCase {
  std::string case_id;
  std::vector<double> values;
  std::vector<std::optional<std::string>> tokens;
};

inline RawCase extract_raw(const FeatureSchema& schema, const CaseRecord& c, const TransformerOptions& opts = {}) {
  RawCase raw;
  raw.case_id = c.case_id;
  for (const auto& f : schema.features()) {
    if (f.kind == FeatureKind::timeseries) {
      const TimeSeriesChannel* ch = c.channel(f.name);
      TimeSeriesFeatures tf;
      if (ch && !ch->samples.empty()) {
        tf = extract_ts_features(clean_timeseries(*ch, *f.allowed_range, opts.spike), f.bands, opts.ts_window_s);
      } else {
        tf.band_fraction.assign(f.bands.size(), kMissing);
      }
      for (double v : tf.values()) {
        raw.values.push_back(v);
        raw.tokens.emplace_back();
      }
      continue;
    }
    auto it = c.tabular.find(f.name);
    const Value v = it == c.tabular.end() ? Value{Missing{}} : it->second;
    if (f.kind == FeatureKind::nominal || f.kind == FeatureKind::procedure_code) {
      raw.values.push_back(kMissing);
      if (const auto* s = std::get_if<std::string>(&v))
        raw.tokens.emplace_back(*s);
      else if (const auto* d = std::get_if<double>(&v))
        raw.tokens.emplace_back(format_double(*d));
      else
        raw.tokens.emplace_back();
    } else {
      double x = kMissing;
      if (const auto* d = std::get_if<double>(&v)) x = *d;
      if (f.allowed_range && !is_missing(x) && !f.allowed_range->contains(x)) x = kMissing;
      raw.values.push_back(x);
      raw.tokens.emplace_back();
    }
  }
  return raw;
}

struct NumericStats {
  double median = 0.0;
  double p005 = 0.0, p01 = 0.0, p05 = 0.0, p95 = 0.0, p99 = 0.0, p995 = 0.0;
};

struct SlotState {
  enum class Rule { outlier_and_median, median, zero_fill, nominal, procedure };
  Rule rule = Rule::median;
  NumericStats stats;
  CategoryEncoder nominal;
  ProcedureTree procedure;
};

NLOHMANN_JSON_SERIALIZE_ENUM(SlotState::Rule, {{SlotState::Rule::outlier_and_median, "outlier_and_median"},
                                               {SlotState::Rule::median, "median"},
                                               {SlotState::Rule::zero_fill, "zero_fill"},
                                               {SlotState::Rule::nominal, "nominal"},
                                               {SlotState::Rule::procedure, "procedure"}})

// Fitted preprocessing for one outcome. Applying it never reads labels.
struct TransformerState {
  static constexpr int kVersion = 1;

  std::string outcome;
  std::uint64_t seed = 0;
  std::string fitted_on;  // fingerprint of the training case ids
  FeatureSchema schema;
  TransformerOptions options;
  std::vector<OutputSlot> layout;
  std::vector<SlotState> slots;

  std::vector<std::string> output_names(Layer layer) const {
    std::vector<std::string> names;
    for (const auto& s : layout)
      if (slot_in_layer(s, layer)) names.push_back(s.name);
    return names;
  }

  std::size_t output_size(Layer layer) const {
    return static_cast<std::size_t>(
        std::count_if(layout.begin(), layout.end(), [&](const auto& s) { return slot_in_layer(s, layer); }));
  }
};

inline std::string fingerprint_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& id : ids) {
    h = fnv1a(id, h);
    h = fnv1a("\n", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Fits on pre-extracted cases; labels[i] is the outcome label of raws[i]
// (nullopt when unlabelled, which excludes the row from encoding fits only).
inline TransformerState fit_transformer_raw(const std::vector<const RawCase*>& raws,
                                            const std::vector<std::optional<int>>& labels,
                                            const FeatureSchema& schema, const std::string& outcome,
                                            std::uint64_t seed, const TransformerOptions& opts = {}) {
  if (raws.empty()) throw FitError("fit_transformer: empty training set");
  if (std::none_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); }))
    throw FitError("fit_transformer: no training labels for outcome " + outcome);
  TransformerState st;
  st.outcome = outcome;
  st.seed = seed;
  st.schema = schema;
  st.options = opts;
  st.layout = output_layout(schema);
  std::vector<std::string> ids;
  for (const auto* r : raws) ids.push_back(r->case_id);
  st.fitted_on = fingerprint_ids(std::move(ids));

  st.slots.resize(st.layout.size());
  for (std::size_t s = 0; s < st.layout.size(); ++s) {
    const auto& slot = st.layout[s];
    auto& ss = st.slots[s];
    if (slot.kind == FeatureKind::nominal || slot.kind == FeatureKind::procedure_code) {
      std::vector<std::pair<std::string, int>> pairs;
      for (std::size_t i = 0; i < raws.size(); ++i) {
        if (!labels[i]) continue;
        const auto& tok = raws[i]->tokens[s];
        if (slot.kind == FeatureKind::nominal)
          pairs.emplace_back(tok ? *tok : std::string(CategoryEncoder::kMissingLevel), *labels[i]);
        else
          pairs.emplace_back(tok ? *tok : std::string(), *labels[i]);
      }
      if (slot.kind == FeatureKind::nominal) {
        ss.rule = SlotState::Rule::nominal;
        ss.nominal = CategoryEncoder::fit(pairs, opts.smoothing_k);
        if (ss.nominal.constant())
          warn("nominal feature '" + slot.name + "' has no observed values; encoded as constant fallback");
      } else {
        ss.rule = SlotState::Rule::procedure;
        ss.procedure = ProcedureTree::fit(pairs, opts.procedure_depth, opts.procedure_min_support, opts.smoothing_k);
      }
      continue;
    }
    if (slot.kind == FeatureKind::continuous && zero_imputed_feature(slot.name)) {
      ss.rule = SlotState::Rule::zero_fill;
      continue;
    }
    ss.rule = slot.kind == FeatureKind::continuous ? SlotState::Rule::outlier_and_median : SlotState::Rule::median;
    std::vector<double> vals;
    for (const auto* r : raws)
      if (!is_missing(r->values[s])) vals.push_back(r->values[s]);
    if (vals.empty()) {
      warn("feature '" + slot.name + "' has no observed training values; imputed as 0");
      continue;
    }
    std::sort(vals.begin(), vals.end());
    auto& p = ss.stats;
    p.median = percentile_sorted(vals, 0.5);
    p.p005 = percentile_sorted(vals, 0.005);
    p.p01 = percentile_sorted(vals, 0.01);
    p.p05 = percentile_sorted(vals, 0.05);
    p.p95 = percentile_sorted(vals, 0.95);
    p.p99 = percentile_sorted(vals, 0.99);
    p.p995 = percentile_sorted(vals, 0.995);
  }
  return st;
}

inline TransformerState fit_transformer(const CohortTable& train, const FeatureSchema& schema,
                                        const std::string& outcome, std::uint64_t seed,
                                        const TransformerOptions& opts = {}) {
  if (train.empty()) throw FitError("fit_transformer: empty training cohort");
  std::vector<RawCase> raws;
  std::vector<std::optional<int>> labels;
  for (const auto& c : train) {
    raws.push_back(extract_raw(schema, c, opts));
    labels.push_back(c.outcome(outcome));
  }
  std::vector<const RawCase*> ptrs;
  for (const auto& r : raws) ptrs.push_back(&r);
  return fit_transformer_raw(ptrs, labels, schema, outcome, seed, opts);
}

// The random stream for outlier draws is keyed on (seed, case_id, slot), so
// results do not depend on processing order.
inline FeatureVector apply_transformer_raw(const TransformerState& st, const RawCase& raw, Layer layer) {
  if (raw.values.size() != st.layout.size()) throw ShapeError("raw case does not match transformer layout");
  FeatureVector out;
  out.reserve(st.layout.size());
  const std::uint64_t case_key = fnv1a(raw.case_id);
  for (std::size_t s = 0; s < st.layout.size(); ++s) {
    if (!slot_in_layer(st.layout[s], layer)) continue;
    const auto& ss = st.slots[s];
    const double x = raw.values[s];
    switch (ss.rule) {
      case SlotState::Rule::nominal: {
        const auto& tok = raw.tokens[s];
        out.push_back(ss.nominal.encode(tok ? std::string_view(*tok) : CategoryEncoder::kMissingLevel));
        break;
      }
      case SlotState::Rule::procedure: {
        const auto& tok = raw.tokens[s];
        out.push_back(ss.procedure.encode(tok ? std::string_view(*tok) : std::string_view()));
        break;
      }
      case SlotState::Rule::zero_fill:
        out.push_back(is_missing(x) ? 0.0 : x);
        break;
      case SlotState::Rule::median:
        out.push_back(is_missing(x) ? ss.stats.median : x);
        break;
      case SlotState::Rule::outlier_and_median: {
        const auto& p = ss.stats;
        if (is_missing(x)) {
          out.push_back(p.median);
        } else if (x > p.p99) {
          Rng rng(derive_seed(st.seed, case_key, s));
          out.push_back(uniform(rng, p.p95, p.p995));
        } else if (x < p.p01) {
          Rng rng(derive_seed(st.seed, case_key, s));
          out.push_back(uniform(rng, p.p005, p.p05));
        } else {
          out.push_back(x);
        }
        break;
      }
    }
  }
  return out;
}

inline FeatureVector apply_transformer(const TransformerState& st, const CaseRecord& c, Layer layer) {
  return apply_transformer_raw(st, extract_raw(st.schema, c, st.options), layer);
}

inline std::vector<RawCase> extract_all(const FeatureSchema& schema, const CohortTable& cohort,
                                        const TransformerOptions& opts = {}, int jobs = 1) {
  std::vector<RawCase> out(cohort.size());
  parallel_for(cohort.size(), jobs, [&](std::size_t i) { out[i] = extract_raw(schema, cohort[i], opts); });
  return out;
}

inline void to_json(nlohmann::json& j, const TransformerState& st) {
  auto slots = nlohmann::json::array();
  for (std::size_t s = 0; s < st.layout.size(); ++s) {
    const auto& slot = st.layout[s];
    const auto& ss = st.slots[s];
    nlohmann::json js = {{"name", slot.name}, {"feature", slot.feature}, {"kind", slot.kind},
                         {"phase", slot.phase}, {"rule", ss.rule}};
    switch (ss.rule) {
      case SlotState::Rule::nominal: js["encoder"] = ss.nominal; break;
      case SlotState::Rule::procedure: js["procedure_tree"] = ss.procedure; break;
      case SlotState::Rule::zero_fill: break;
      default:
        js["median"] = ss.stats.median;
        js["p005"] = ss.stats.p005;
        js["p01"] = ss.stats.p01;
        js["p05"] = ss.stats.p05;
        js["p95"] = ss.stats.p95;
        js["p99"] = ss.stats.p99;
        js["p995"] = ss.stats.p995;
    }
    slots.push_back(std::move(js));
  }
  j = {{"format", "periop-transformer"},
       {"version", TransformerState::kVersion},
       {"outcome", st.outcome},
       {"seed", st.seed},
       {"fitted_on", st.fitted_on},
       {"options", st.options},
       {"schema", st.schema},
       {"slots", slots}};
}

inline void from_json(const nlohmann::json& j, TransformerState& st) {
  if (j.at("format") != "periop-transformer" || j.at("version").get<int>() != TransformerState::kVersion)
    throw ConfigError("unsupported transformer document");
  st.outcome = j.at("outcome").get<std::string>();
  st.seed = j.at("seed").get<std::uint64_t>();
  st.fitted_on = j.at("fitted_on").get<std::string>();
  st.options = j.at("options").get<TransformerOptions>();
  st.schema = j.at("schema").get<FeatureSchema>();
  st.layout = output_layout(st.schema);
  const auto& slots = j.at("slots");
  if (slots.size() != st.layout.size()) throw ConfigError("transformer slots do not match schema");
  st.slots.assign(st.layout.size(), {});
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& js = slots[s];
    if (js.at("name") != st.layout[s].name) throw ConfigError("transformer slot order does not match schema");
    auto& ss = st.slots[s];
    ss.rule = js.at("rule").get<SlotState::Rule>();
    switch (ss.rule) {
      case SlotState::Rule::nominal: ss.nominal = js.at("encoder").get<CategoryEncoder>(); break;
      case SlotState::Rule::procedure: ss.procedure = js.at("procedure_tree").get<ProcedureTree>(); break;
      case SlotState::Rule::zero_fill: break;
      default:
        ss.stats.median = js.at("median").get<double>();
        ss.stats.p005 = js.at("p005").get<double>();
        ss.stats.p01 = js.at("p01").get<double>();
        ss.stats.p05 = js.at("p05").get<double>();
        ss.stats.p95 = js.at("p95").get<double>();
        ss.stats.p99 = js.at("p99").get<double>();
        ss.stats.p995 = js.at("p995").get<double>();
    }
  }
}

}  // namespace periop
