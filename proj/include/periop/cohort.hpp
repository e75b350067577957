#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "periop/csv.hpp"
#include "periop/error.hpp"
#include "periop/numeric.hpp"
#include "periop/rng.hpp"

namespace periop {

// ---------------------------------------------------------------------------
// Feature schema

enum class FeatureKind { continuous, binary, nominal, timeseries, procedure_code };
enum class Phase { preoperative, intraoperative };

NLOHMANN_JSON_SERIALIZE_ENUM(FeatureKind, {{FeatureKind::continuous, "continuous"},
                                           {FeatureKind::binary, "binary"},
                                           {FeatureKind::nominal, "nominal"},
                                           {FeatureKind::timeseries, "timeseries"},
                                           {FeatureKind::procedure_code, "procedure_code"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Phase, {{Phase::preoperative, "preoperative"},
                                     {Phase::intraoperative, "intraoperative"}})

inline std::string to_string(FeatureKind k) { return nlohmann::json(k).get<std::string>(); }
inline std::string to_string(Phase p) { return nlohmann::json(p).get<std::string>(); }

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  Phase phase = Phase::preoperative;
  std::optional<Range> allowed_range;
  // Fraction-of-time bands; timeseries features only.
  std::vector<Range> bands;
  friend bool operator==(const FeatureDef&, const FeatureDef&) = default;
};

inline void to_json(nlohmann::json& j, const FeatureDef& f) {
  j = {{"name", f.name}, {"kind", f.kind}, {"phase", f.phase}};
  if (f.allowed_range) j["allowed_range"] = {f.allowed_range->lo, f.allowed_range->hi};
  if (!f.bands.empty()) {
    auto bands = nlohmann::json::array();
    for (const auto& b : f.bands) bands.push_back({b.lo, b.hi});
    j["bands"] = bands;
  }
}

inline void from_json(const nlohmann::json& j, FeatureDef& f) {
  f.name = j.at("name").get<std::string>();
  f.kind = j.at("kind").get<FeatureKind>();
  f.phase = j.at("phase").get<Phase>();
  if (j.contains("allowed_range") && !j["allowed_range"].is_null()) {
    const auto& r = j["allowed_range"];
    if (!r.is_array() || r.size() != 2) throw SchemaError("allowed_range of '" + f.name + "' must be [lo, hi]");
    f.allowed_range = Range{r[0].get<double>(), r[1].get<double>()};
  }
  if (j.contains("bands")) {
    for (const auto& b : j["bands"]) {
      if (!b.is_array() || b.size() != 2) throw SchemaError("band of '" + f.name + "' must be [lo, hi]");
      f.bands.push_back({b[0].get<double>(), b[1].get<double>()});
    }
  }
}

inline constexpr std::array<std::string_view, 4> kOutcomes = {"icu_gt_48h", "mv_gt_48h",
                                                              "neuro_delirium", "mortality"};
inline constexpr std::array<std::string_view, 3> kComplications = {"icu_gt_48h", "mv_gt_48h",
                                                                   "neuro_delirium"};
inline constexpr std::array<std::string_view, 2> kExternalProbs = {"aki", "sepsis"};

inline bool is_outcome_name(std::string_view s) {
  return std::find(kOutcomes.begin(), kOutcomes.end(), s) != kOutcomes.end();
}

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureDef> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const auto& f = features_[i];
      if (f.name.empty()) throw SchemaError("feature with empty name");
      if (!index_.emplace(f.name, i).second) throw SchemaError("duplicate feature name '" + f.name + "'");
      if (f.allowed_range) {
        if (f.kind != FeatureKind::continuous && f.kind != FeatureKind::timeseries)
          throw SchemaError("allowed_range on non-continuous feature '" + f.name + "'");
        if (!(f.allowed_range->lo < f.allowed_range->hi))
          throw SchemaError("allowed_range of '" + f.name + "' needs lo < hi");
      }
      if (!f.bands.empty() && f.kind != FeatureKind::timeseries)
        throw SchemaError("bands on non-timeseries feature '" + f.name + "'");
      for (const auto& b : f.bands)
        if (!(b.lo <= b.hi)) throw SchemaError("band of '" + f.name + "' needs lo <= hi");
      if (f.kind == FeatureKind::timeseries && !f.allowed_range)
        throw SchemaError("timeseries feature '" + f.name + "' requires allowed_range");
      if (is_outcome_name(f.name) || reserved_column(f.name))
        throw SchemaError("feature name '" + f.name + "' collides with a reserved column");
    }
  }

  static bool reserved_column(std::string_view name) {
    return name == "case_id" || name == "patient_id" || name == "admission_id" ||
           name == "surgery_time" || name == "aki_prob" || name == "sepsis_prob";
  }

  const std::vector<FeatureDef>& features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }

  const FeatureDef* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &features_[it->second];
  }

  std::size_t count(Phase p) const {
    return static_cast<std::size_t>(
        std::count_if(features_.begin(), features_.end(), [p](const auto& f) { return f.phase == p; }));
  }

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) { return a.features_ == b.features_; }

 private:
  std::vector<FeatureDef> features_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void to_json(nlohmann::json& j, const FeatureSchema& s) {
  j = {{"features", s.features()}};
}

inline void from_json(const nlohmann::json& j, FeatureSchema& s) {
  s = FeatureSchema(j.at("features").get<std::vector<FeatureDef>>());
}

inline FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open schema file");
  try {
    return nlohmann::json::parse(in).get<FeatureSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void save_schema(const FeatureSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << nlohmann::json(schema).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Cases

struct Sample {
  double time_s = 0.0;
  double value = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct TimeSeriesChannel {
  std::string name;
  std::vector<Sample> samples;
  friend bool operator==(const TimeSeriesChannel&, const TimeSeriesChannel&) = default;
};

struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};
using Value = std::variant<Missing, double, std::string>;

inline constexpr std::string_view kMissingToken = "__missing__";

struct CaseRecord {
  std::string case_id;
  std::string patient_id;
  std::string admission_id;  // empty when unknown
  std::string surgery_time;  // ISO-8601, compared lexicographically; may be empty
  std::map<std::string, Value> tabular;
  std::vector<TimeSeriesChannel> channels;
  std::map<std::string, int> outcomes;        // absent key = label unavailable
  std::map<std::string, double> external_probs;  // keys from kExternalProbs

  const TimeSeriesChannel* channel(std::string_view name) const {
    for (const auto& c : channels)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool has_intraop_channels() const {
    return std::any_of(channels.begin(), channels.end(), [](const auto& c) { return !c.samples.empty(); });
  }

  std::optional<int> outcome(std::string_view name) const {
    auto it = outcomes.find(std::string(name));
    if (it == outcomes.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

// Immutable collection of cases with unique case ids.
class CohortTable {
 public:
  CohortTable() = default;
  explicit CohortTable(std::vector<CaseRecord> cases, std::vector<std::string> diagnostics = {})
      : cases_(std::move(cases)), diagnostics_(std::move(diagnostics)) {
    for (std::size_t i = 0; i < cases_.size(); ++i) {
      const auto& c = cases_[i];
      if (c.case_id.empty()) throw IntegrityError("case with empty case_id");
      if (c.patient_id.empty()) throw IntegrityError("case " + c.case_id + " has empty patient_id");
      if (!index_.emplace(c.case_id, i).second) throw IntegrityError("duplicate case_id " + c.case_id);
      for (const auto& [name, label] : c.outcomes) {
        if (!is_outcome_name(name)) throw IntegrityError("unknown outcome '" + name + "' in case " + c.case_id);
        if (label != 0 && label != 1) throw IntegrityError("non-binary outcome in case " + c.case_id);
      }
      for (const auto& [name, p] : c.external_probs) {
        if (name != "aki" && name != "sepsis")
          throw IntegrityError("unknown external probability '" + name + "' in case " + c.case_id);
        if (!(p >= 0.0 && p <= 1.0)) throw IntegrityError("external probability outside [0,1] in case " + c.case_id);
      }
    }
  }

  const std::vector<CaseRecord>& cases() const noexcept { return cases_; }
  std::size_t size() const noexcept { return cases_.size(); }
  bool empty() const noexcept { return cases_.empty(); }
  const CaseRecord& operator[](std::size_t i) const { return cases_[i]; }
  auto begin() const { return cases_.begin(); }
  auto end() const { return cases_.end(); }

  const CaseRecord* find(std::string_view case_id) const {
    auto it = index_.find(std::string(case_id));
    return it == index_.end() ? nullptr : &cases_[it->second];
  }

  // Notes produced while loading, such as dropped repeat surgeries.
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

  CohortTable subset(const std::set<std::string>& ids) const {
    std::vector<CaseRecord> out;
    for (const auto& c : cases_)
      if (ids.count(c.case_id)) out.push_back(c);
    return CohortTable(std::move(out));
  }

  bool has_outcome(std::string_view name) const {
    return std::any_of(cases_.begin(), cases_.end(), [&](const auto& c) { return c.outcome(name).has_value(); });
  }

 private:
  std::vector<CaseRecord> cases_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> diagnostics_;
};

namespace detail {

// Keeps only the earliest surgery per (patient, admission). Cases without an
// admission id are never merged.
inline std::vector<CaseRecord> first_surgery_per_admission(std::vector<CaseRecord> cases,
                                                           std::vector<std::string>& diagnostics) {
  std::map<std::pair<std::string, std::string>, std::size_t> keep;
  std::vector<bool> dropped(cases.size(), false);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].admission_id.empty()) continue;
    auto key = std::make_pair(cases[i].patient_id, cases[i].admission_id);
    auto [it, inserted] = keep.emplace(key, i);
    if (inserted) continue;
    std::size_t& held = it->second;
    if (cases[i].surgery_time < cases[held].surgery_time) {
      dropped[held] = true;
      held = i;
    } else {
      dropped[i] = true;
    }
  }
  std::vector<CaseRecord> out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (dropped[i]) {
      diagnostics.push_back("dropped case " + cases[i].case_id + ": not the first surgery of admission " +
                            cases[i].admission_id + " for patient " + cases[i].patient_id);
    } else {
      out.push_back(std::move(cases[i]));
    }
  }
  return out;
}

inline Value parse_cell(const FeatureDef& def, const std::string& raw, const std::string& source,
                        std::size_t line) {
  switch (def.kind) {
    case FeatureKind::continuous:
    case FeatureKind::binary: {
      if (raw.empty()) return Missing{};
      auto v = parse_double(raw);
      if (!v) throw ParseError(source, line, "non-numeric value '" + raw + "' for feature " + def.name);
      if (def.kind == FeatureKind::binary && *v != 0.0 && *v != 1.0)
        throw ParseError(source, line, "binary feature " + def.name + " must be 0 or 1");
      return *v;
    }
    case FeatureKind::nominal:
      if (raw.empty() || raw == kMissingToken) return Missing{};
      return raw;
    case FeatureKind::procedure_code:
      if (raw.empty()) return Missing{};
      return raw;
    case FeatureKind::timeseries:
      break;
  }
  throw SchemaError("timeseries feature " + def.name + " cannot be a cohort column");
}

inline std::string format_cell(const FeatureDef& def, const Value& v) {
  if (std::holds_alternative<Missing>(v)) return def.kind == FeatureKind::nominal ? std::string(kMissingToken) : "";
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::get<std::string>(v);
}

}  // namespace detail

// Reads the cohort CSV (and optional channel sidecar). Repeat surgeries within
// one admission are reduced to the earliest one; diagnostics record the drops.
inline CohortTable load_cohort(const std::string& path, const FeatureSchema& schema,
                               const std::string& channels_path = "") {
  csv::Reader reader(path);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ParseError(path, 1, "empty cohort file");
  if (header.size() < 2 || header[0] != "case_id" || header[1] != "patient_id")
    throw ParseError(path, reader.line(), "header must start with case_id,patient_id");

  enum class Col { admission, surgery_time, feature, outcome, external };
  struct Column {
    Col kind;
    const FeatureDef* def = nullptr;
    std::string name;
  };
  std::vector<Column> columns;
  std::set<std::string> seen;
  for (std::size_t i = 2; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (!seen.insert(h).second) throw SchemaError(path + ": duplicate column '" + h + "'");
    if (h == "admission_id") {
      columns.push_back({Col::admission, nullptr, h});
    } else if (h == "surgery_time") {
      columns.push_back({Col::surgery_time, nullptr, h});
    } else if (is_outcome_name(h)) {
      columns.push_back({Col::outcome, nullptr, h});
    } else if (h == "aki_prob" || h == "sepsis_prob") {
      columns.push_back({Col::external, nullptr, h.substr(0, h.size() - 5)});
    } else if (const FeatureDef* def = schema.find(h)) {
      if (def->kind == FeatureKind::timeseries)
        throw SchemaError(path + ": timeseries feature '" + h + "' belongs in the channel file");
      columns.push_back({Col::feature, def, h});
    } else {
      throw SchemaError(path + ": unknown column '" + h + "'");
    }
  }

  std::vector<CaseRecord> cases;
  std::set<std::string> ids;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const std::size_t line = reader.line();
    if (fields.size() != header.size())
      throw ParseError(path, line, "expected " + std::to_string(header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    CaseRecord rec;
    rec.case_id = fields[0];
    rec.patient_id = fields[1];
    if (rec.case_id.empty()) throw ParseError(path, line, "empty case_id");
    if (rec.patient_id.empty()) throw ParseError(path, line, "empty patient_id");
    if (!ids.insert(rec.case_id).second)
      throw IntegrityError(path + ":" + std::to_string(line) + ": duplicate case_id " + rec.case_id);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const auto& col = columns[i];
      const std::string& raw = fields[i + 2];
      switch (col.kind) {
        case Col::admission: rec.admission_id = raw; break;
        case Col::surgery_time: rec.surgery_time = raw; break;
        case Col::feature: rec.tabular[col.name] = detail::parse_cell(*col.def, raw, path, line); break;
        case Col::outcome:
          if (raw.empty()) break;
          if (raw != "0" && raw != "1") throw ParseError(path, line, "outcome " + col.name + " must be 0, 1 or empty");
          rec.outcomes[col.name] = raw == "1" ? 1 : 0;
          break;
        case Col::external: {
          if (raw.empty()) break;
          auto v = parse_double(raw);
          if (!v || *v < 0.0 || *v > 1.0)
            throw ParseError(path, line, col.name + "_prob must be a probability, got '" + raw + "'");
          rec.external_probs[col.name] = *v;
          break;
        }
      }
    }
    // Features absent from the file are missing for every case.
    for (const auto& f : schema.features())
      if (f.kind != FeatureKind::timeseries && !rec.tabular.count(f.name)) rec.tabular[f.name] = Missing{};
    cases.push_back(std::move(rec));
  }

  std::vector<std::string> diagnostics;
  cases = detail::first_surgery_per_admission(std::move(cases), diagnostics);

  if (!channels_path.empty()) {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < cases.size(); ++i) pos.emplace(cases[i].case_id, i);
    csv::Reader cr(channels_path);
    std::vector<std::string> ch;
    if (!cr.next(ch)) throw ParseError(channels_path, 1, "empty channel file");
    if (ch != std::vector<std::string>{"case_id", "channel", "time_s", "value"})
      throw ParseError(channels_path, cr.line(), "header must be case_id,channel,time_s,value");
    while (cr.next(ch)) {
      const std::size_t line = cr.line();
      if (ch.size() != 4) throw ParseError(channels_path, line, "expected 4 fields");
      auto it = pos.find(ch[0]);
      if (it == pos.end()) {
        if (ids.count(ch[0])) continue;  // belongs to a dropped repeat surgery
        throw IntegrityError(channels_path + ":" + std::to_string(line) + ": unknown case_id " + ch[0]);
      }
      const FeatureDef* def = schema.find(ch[1]);
      if (!def || def->kind != FeatureKind::timeseries)
        throw SchemaError(channels_path + ":" + std::to_string(line) + ": unknown channel '" + ch[1] + "'");
      auto t = parse_double(ch[2]);
      auto v = parse_double(ch[3]);
      if (!t || !v) throw ParseError(channels_path, line, "non-numeric time or value");
      if (*t < 0.0) throw ParseError(channels_path, line, "negative sample time");
      auto& rec = cases[it->second];
      auto cit = std::find_if(rec.channels.begin(), rec.channels.end(), [&](const auto& c) { return c.name == ch[1]; });
      if (cit == rec.channels.end()) {
        rec.channels.push_back({ch[1], {}});
        cit = std::prev(rec.channels.end());
      }
      cit->samples.push_back({*t, *v});
    }
    // Channel order follows the schema, independent of file order.
    for (auto& rec : cases) {
      std::stable_sort(rec.channels.begin(), rec.channels.end(), [&](const auto& a, const auto& b) {
        return schema.find(a.name) < schema.find(b.name);
      });
    }
  }
  return CohortTable(std::move(cases), std::move(diagnostics));
}

// Writes the normalized column order: case_id, patient_id, [admission_id,
// surgery_time], schema features, outcomes, [aki_prob, sepsis_prob].
inline void save_cohort(const CohortTable& cohort, const FeatureSchema& schema, const std::string& path,
                        const std::string& channels_path = "") {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const bool has_adm = std::any_of(cohort.begin(), cohort.end(), [](const auto& c) { return !c.admission_id.empty(); });
  const bool has_time = std::any_of(cohort.begin(), cohort.end(), [](const auto& c) { return !c.surgery_time.empty(); });
  std::vector<std::string> outcome_cols;
  for (auto o : kOutcomes)
    if (cohort.has_outcome(o)) outcome_cols.emplace_back(o);
  std::vector<std::string> external_cols;
  for (auto e : kExternalProbs)
    if (std::any_of(cohort.begin(), cohort.end(), [&](const auto& c) { return c.external_probs.count(std::string(e)); }))
      external_cols.emplace_back(e);

  std::vector<std::string> header = {"case_id", "patient_id"};
  if (has_adm) header.emplace_back("admission_id");
  if (has_time) header.emplace_back("surgery_time");
  std::vector<const FeatureDef*> feats;
  for (const auto& f : schema.features())
    if (f.kind != FeatureKind::timeseries) {
      feats.push_back(&f);
      header.push_back(f.name);
    }
  for (const auto& o : outcome_cols) header.push_back(o);
  for (const auto& e : external_cols) header.push_back(e + "_prob");
  out << csv::join(header) << '\n';

  for (const auto& c : cohort) {
    std::vector<std::string> row = {c.case_id, c.patient_id};
    if (has_adm) row.push_back(c.admission_id);
    if (has_time) row.push_back(c.surgery_time);
    for (const auto* f : feats) {
      auto it = c.tabular.find(f->name);
      row.push_back(detail::format_cell(*f, it == c.tabular.end() ? Value{Missing{}} : it->second));
    }
    for (const auto& o : outcome_cols) {
      auto v = c.outcome(o);
      row.push_back(v ? std::to_string(*v) : "");
    }
    for (const auto& e : external_cols) {
      auto it = c.external_probs.find(e);
      row.push_back(it == c.external_probs.end() ? "" : format_double(it->second));
    }
    out << csv::join(row) << '\n';
  }

  if (!channels_path.empty()) {
    std::ofstream ch(channels_path);
    if (!ch) throw Error("cannot write " + channels_path);
    ch << "case_id,channel,time_s,value\n";
    for (const auto& c : cohort)
      for (const auto& channel : c.channels)
        for (const auto& s : channel.samples)
          ch << csv::escape(c.case_id) << ',' << channel.name << ',' << format_double(s.time_s) << ','
             << format_double(s.value) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splits

struct SplitPlan {
  int n_folds = 0;
  std::map<std::string, int> fold_assignment;  // case_id -> fold in [0, n_folds)
  std::set<std::string> holdout;

  std::vector<std::string> fold_cases(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_assignment)
      if (f == fold) out.push_back(id);
    return out;
  }

  int fold_of(const std::string& case_id) const {
    auto it = fold_assignment.find(case_id);
    return it == fold_assignment.end() ? -1 : it->second;
  }

  bool is_holdout(const std::string& case_id) const { return holdout.count(case_id) > 0; }

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

inline void to_json(nlohmann::json& j, const SplitPlan& s) {
  j = {{"n_folds", s.n_folds}, {"fold_assignment", s.fold_assignment}, {"holdout", s.holdout}};
}

inline void from_json(const nlohmann::json& j, SplitPlan& s) {
  s.n_folds = j.at("n_folds").get<int>();
  s.fold_assignment = j.at("fold_assignment").get<std::map<std::string, int>>();
  s.holdout = j.at("holdout").get<std::set<std::string>>();
}

namespace detail {

struct PatientGroup {
  std::string patient_id;
  std::vector<std::string> case_ids;
  std::string first_time;
};

inline std::vector<PatientGroup> patient_groups(const CohortTable& cohort) {
  std::map<std::string, PatientGroup> by_patient;
  for (const auto& c : cohort) {
    auto& g = by_patient[c.patient_id];
    if (g.case_ids.empty() || c.surgery_time < g.first_time) g.first_time = c.surgery_time;
    g.patient_id = c.patient_id;
    g.case_ids.push_back(c.case_id);
  }
  std::vector<PatientGroup> out;
  for (auto& [_, g] : by_patient) out.push_back(std::move(g));
  return out;
}

inline void shuffle_groups(std::vector<PatientGroup>& groups, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5917ULL));
  for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[uniform_index(rng, i)]);
}

inline void assign_folds(SplitPlan& plan, const std::vector<PatientGroup>& dev, int n_folds) {
  if (dev.size() < static_cast<std::size_t>(n_folds))
    throw SizingError("only " + std::to_string(dev.size()) + " patient groups for " + std::to_string(n_folds) +
                      " folds");
  plan.n_folds = n_folds;
  // Greedy: next group goes to the fold holding the fewest cases so far, so
  // fold sizes differ by at most one group.
  std::vector<std::size_t> load(n_folds, 0);
  for (const auto& g : dev) {
    const auto f = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    for (const auto& id : g.case_ids) plan.fold_assignment[id] = f;
    load[f] += g.case_ids.size();
  }
}

}  // namespace detail

// Random patient-grouped split: a holdout of about holdout_fraction of the
// cases, and n_folds disjoint folds over the rest.
inline SplitPlan make_split(const CohortTable& cohort, int n_folds = 5, double holdout_fraction = 0.0,
                            std::uint64_t seed = 0) {
  if (n_folds < 2) throw SizingError("n_folds must be >= 2");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw SizingError("holdout_fraction must be in [0, 1)");
  auto groups = detail::patient_groups(cohort);
  detail::shuffle_groups(groups, seed);
  const auto target = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(cohort.size())));
  SplitPlan plan;
  std::vector<detail::PatientGroup> dev;
  std::size_t taken = 0;
  for (auto& g : groups) {
    if (taken < target) {
      for (const auto& id : g.case_ids) plan.holdout.insert(id);
      taken += g.case_ids.size();
    } else {
      dev.push_back(std::move(g));
    }
  }
  detail::assign_folds(plan, dev, n_folds);
  return plan;
}

// Temporal split: patients whose first surgery is at or after `cutoff`
// (ISO-8601 prefix compare) form the holdout.
inline SplitPlan make_split_by_date(const CohortTable& cohort, const std::string& cutoff, int n_folds = 5,
                                    std::uint64_t seed = 0) {
  if (n_folds < 2) throw SizingError("n_folds must be >= 2");
  auto groups = detail::patient_groups(cohort);
  for (const auto& g : groups)
    if (g.first_time.empty()) throw IntegrityError("patient " + g.patient_id + " has no surgery_time for date split");
  detail::shuffle_groups(groups, seed);
  SplitPlan plan;
  std::vector<detail::PatientGroup> dev;
  for (auto& g : groups) {
    if (g.first_time >= cutoff) {
      for (const auto& id : g.case_ids) plan.holdout.insert(id);
    } else {
      dev.push_back(std::move(g));
    }
  }
  detail::assign_folds(plan, dev, n_folds);
  return plan;
}

}  // namespace periop
