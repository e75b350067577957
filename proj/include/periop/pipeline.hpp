#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "periop/cohort.hpp"
#include "periop/csv.hpp"
#include "periop/error.hpp"
#include "periop/forest.hpp"
#include "periop/grid_search.hpp"
#include "periop/log.hpp"
#include "periop/matrix.hpp"
#include "periop/metrics.hpp"
#include "periop/numeric.hpp"
#include "periop/parallel.hpp"
#include "periop/rng.hpp"
#include "periop/transformer.hpp"

namespace periop {

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::vector<HyperParams> grid;  // empty = default_grid()
  TransformerOptions transformer;
  std::vector<std::string> outcomes{kOutcomes.begin(), kOutcomes.end()};
  std::vector<Layer> layers{kLayers.begin(), kLayers.end()};
  int jobs = 1;

  bool wants(std::string_view outcome) const {
    return std::find(outcomes.begin(), outcomes.end(), outcome) != outcomes.end();
  }
  bool wants(Layer l) const { return std::find(layers.begin(), layers.end(), l) != layers.end(); }

  // Everything that affects the trained artifacts; `jobs` is excluded.
  nlohmann::json fingerprint_json() const {
    return {{"seed", seed},
            {"grid", grid.empty() ? default_grid(seed) : grid},
            {"transformer", transformer},
            {"outcomes", outcomes},
            {"layers", layers}};
  }
};

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const PipelineConfig& cfg) { return hex64(fnv1a(cfg.fingerprint_json().dump())); }

// One trained (outcome, layer) model. Mortality models have no transformer;
// their inputs are the complication probabilities named in feature_names.
struct LayerModel {
  std::string outcome;
  Layer layer = Layer::preop_only;
  std::optional<TransformerState> transformer;
  Forest forest;
  double threshold = 0.5;
  std::vector<std::string> feature_names;
  std::vector<GridPointResult> cv_table;
  std::size_t best_index = 0;
  std::size_t n_train = 0;
  std::size_t n_positive = 0;
};

struct PipelineBundle {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
  std::vector<LayerModel> models;  // outcome order of kOutcomes, then layer order
  std::vector<std::string> external_features;  // e.g. "aki", "sepsis"
  std::vector<double> external_medians;
  std::vector<std::string> training_case_ids;
  std::vector<std::string> holdout_case_ids;

  const LayerModel* find(std::string_view outcome, Layer layer) const {
    for (const auto& m : models)
      if (m.outcome == outcome && m.layer == layer) return &m;
    return nullptr;
  }

  std::vector<std::string> trained_outcomes() const {
    std::vector<std::string> out;
    for (const auto& m : models)
      if (std::find(out.begin(), out.end(), m.outcome) == out.end()) out.push_back(m.outcome);
    return out;
  }
};

struct TrainResult {
  PipelineBundle bundle;
  std::vector<std::string> log;
  std::vector<std::string> skipped;
};

namespace detail {

inline std::size_t outcome_index(std::string_view o) {
  for (std::size_t i = 0; i < kOutcomes.size(); ++i)
    if (kOutcomes[i] == o) return i;
  throw ConfigError("unknown outcome '" + std::string(o) + "'");
}

inline std::size_t layer_index(Layer l) { return l == Layer::preop_only ? 0 : 1; }

inline std::vector<HyperParams> seeded_grid(const PipelineConfig& cfg, std::size_t outcome, Layer layer) {
  auto grid = cfg.grid.empty() ? default_grid(cfg.seed) : cfg.grid;
  const std::uint64_t s = derive_seed(cfg.seed, 0xf0e57ULL, outcome, layer_index(layer));
  for (auto& hp : grid) hp.seed = s;
  return grid;
}

inline std::string format_cv_table(const LayerModel& m) {
  std::ostringstream os;
  os << m.outcome << " / " << to_string(m.layer) << ": " << m.n_train << " cases, " << m.n_positive
     << " positive\n";
  for (std::size_t g = 0; g < m.cv_table.size(); ++g) {
    const auto& pt = m.cv_table[g];
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", pt.mean_auroc);
    os << (g == m.best_index ? "  * " : "    ") << pt.hp.label() << "  cv_auroc=" << buf << '\n';
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", m.threshold);
  os << "  youden threshold (out-of-fold) = " << buf;
  return os.str();
}

struct LayerFit {
  LayerModel model;
  std::vector<double> oof;  // by training row
};

// CV grid search, Youden on pooled out-of-fold predictions, final refit.
inline LayerFit fit_layer(const std::vector<FoldData>& folds, const Matrix& full_x, const std::vector<int>& y,
                          const std::vector<HyperParams>& grid, int jobs) {
  LayerFit out;
  auto gs = grid_search_cv(folds, grid, y.size(), jobs);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isnan(gs.oof_predictions[i])) {
      scores.push_back(gs.oof_predictions[i]);
      labels.push_back(y[i]);
    }
  out.model.threshold = youden_threshold(scores, labels).threshold;
  out.model.forest = fit_forest(full_x, y, gs.best, jobs);
  out.model.cv_table = std::move(gs.table);
  out.model.best_index = gs.best_index;
  out.model.n_train = y.size();
  out.model.n_positive = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  out.oof = std::move(gs.oof_predictions);
  return out;
}

inline bool both_classes(const std::vector<int>& y) {
  const auto pos = std::count(y.begin(), y.end(), 1);
  return pos > 0 && pos < static_cast<std::ptrdiff_t>(y.size());
}

inline bool single_class_fold(const std::vector<int>& y, const std::vector<int>& fold_of_row, int n_folds) {
  for (int k = 0; k < n_folds; ++k) {
    std::vector<int> train;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (fold_of_row[i] != k) train.push_back(y[i]);
    if (!both_classes(train)) return true;
  }
  return false;
}

}  // namespace detail

// Trains the complication outcome `outcome` on every requested layer. The
// transformer is refitted inside each training fold so encodings never see
// validation labels. Returns out-of-fold probabilities per layer keyed by
// case_id for downstream stacking.
struct ComplicationFit {
  std::vector<LayerModel> models;
  std::map<Layer, std::map<std::string, double>> oof;
};

inline ComplicationFit train_complication_models(const CohortTable& cohort, const std::vector<RawCase>& raws,
                                                 const FeatureSchema& schema, const std::string& outcome,
                                                 const SplitPlan& split, const PipelineConfig& cfg) {
  const std::size_t oi = detail::outcome_index(outcome);
  if (oi >= kComplications.size()) throw ConfigError(outcome + " is not a complication outcome");
  std::vector<std::size_t> rows;
  std::vector<int> y, fold_of_row;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& c = cohort[i];
    const int f = split.fold_of(c.case_id);
    const auto label = c.outcome(outcome);
    if (f < 0 || !label) continue;
    rows.push_back(i);
    y.push_back(*label);
    fold_of_row.push_back(f);
  }
  if (!detail::both_classes(y)) throw FitError(outcome + ": training labels contain a single class");
  if (detail::single_class_fold(y, fold_of_row, split.n_folds))
    throw FitError(outcome + ": a training fold contains a single class");

  const std::uint64_t tseed = derive_seed(cfg.seed, 0x7a4ULL, oi);
  auto fit_state = [&](auto&& keep) {
    std::vector<const RawCase*> ptrs;
    std::vector<std::optional<int>> labels;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (keep(r)) {
        ptrs.push_back(&raws[rows[r]]);
        labels.push_back(y[r]);
      }
    return fit_transformer_raw(ptrs, labels, schema, outcome, tseed, cfg.transformer);
  };

  // Fold states, fitted once and applied per layer.
  const auto n_folds = static_cast<std::size_t>(split.n_folds);
  std::vector<TransformerState> fold_states(n_folds);
  parallel_for(n_folds, cfg.jobs, [&](std::size_t k) {
    fold_states[k] = fit_state([&](std::size_t r) { return fold_of_row[r] != static_cast<int>(k); });
  });
  const TransformerState final_state = fit_state([](std::size_t) { return true; });

  ComplicationFit out;
  for (Layer layer : kLayers) {
    if (!cfg.wants(layer)) continue;
    std::vector<FoldData> folds(n_folds);
    parallel_for(n_folds, cfg.jobs, [&](std::size_t k) {
      auto& fd = folds[k];
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto v = apply_transformer_raw(fold_states[k], raws[rows[r]], layer);
        if (fold_of_row[r] == static_cast<int>(k)) {
          fd.val_x.append_row(v);
          fd.val_y.push_back(y[r]);
          fd.val_rows.push_back(r);
        } else {
          fd.train_x.append_row(v);
          fd.train_y.push_back(y[r]);
        }
      }
    });
    Matrix full;
    for (std::size_t r = 0; r < rows.size(); ++r) full.append_row(apply_transformer_raw(final_state, raws[rows[r]], layer));
    auto fit = detail::fit_layer(folds, full, y, detail::seeded_grid(cfg, oi, layer), cfg.jobs);
    fit.model.outcome = outcome;
    fit.model.layer = layer;
    fit.model.transformer = final_state;
    fit.model.feature_names = final_state.output_names(layer);
    auto& oof = out.oof[layer];
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (!std::isnan(fit.oof[r])) oof[cohort[rows[r]].case_id] = fit.oof[r];
    out.models.push_back(std::move(fit.model));
  }
  return out;
}

// Stacking inputs of one case: complication probabilities for the layer,
// then external probabilities (median-imputed when absent).
inline std::vector<std::string> stacker_feature_names(const std::vector<std::string>& external) {
  std::vector<std::string> names;
  for (auto o : kComplications) names.push_back(std::string(o) + "_prob");
  for (const auto& e : external) names.push_back(e + "_prob");
  return names;
}

struct StackerInputs {
  std::vector<std::string> external_features;
  std::vector<double> external_medians;
};

// External probability columns are used when any training case carries them.
inline StackerInputs stacker_inputs(const CohortTable& cohort, const std::vector<std::size_t>& rows) {
  StackerInputs in;
  for (auto e : kExternalProbs) {
    std::vector<double> vals;
    for (std::size_t r : rows) {
      auto it = cohort[r].external_probs.find(std::string(e));
      if (it != cohort[r].external_probs.end()) vals.push_back(it->second);
    }
    if (vals.empty()) continue;
    in.external_features.emplace_back(e);
    in.external_medians.push_back(median(vals));
  }
  return in;
}

inline void append_external(std::vector<double>& v, const CaseRecord& c, const std::vector<std::string>& names,
                            const std::vector<double>& medians) {
  for (std::size_t e = 0; e < names.size(); ++e) {
    auto it = c.external_probs.find(names[e]);
    v.push_back(it == c.external_probs.end() ? medians[e] : it->second);
  }
}

// Mortality forest per layer on out-of-fold complication probabilities.
inline std::vector<LayerModel> train_mortality_stacker(const CohortTable& cohort,
                                                       const std::map<std::string, ComplicationFit>& complications,
                                                       const SplitPlan& split, const PipelineConfig& cfg,
                                                       StackerInputs* inputs_out = nullptr) {
  const std::size_t oi = detail::outcome_index("mortality");
  std::vector<LayerModel> models;
  std::vector<std::size_t> all_rows;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (split.fold_of(cohort[i].case_id) >= 0 && cohort[i].outcome("mortality")) all_rows.push_back(i);
  const StackerInputs inputs = stacker_inputs(cohort, all_rows);
  if (inputs_out) *inputs_out = inputs;

  for (Layer layer : kLayers) {
    if (!cfg.wants(layer)) continue;
    std::vector<const std::map<std::string, double>*> oofs;
    for (auto o : kComplications) {
      auto it = complications.find(std::string(o));
      if (it == complications.end() || !it->second.oof.count(layer))
        throw FitError("mortality: complication " + std::string(o) + " not trained for layer " + to_string(layer));
      oofs.push_back(&it->second.oof.at(layer));
    }
    Matrix X;
    std::vector<int> y, fold_of_row;
    for (std::size_t i : all_rows) {
      const auto& c = cohort[i];
      std::vector<double> v;
      for (const auto* m : oofs) {
        auto it = m->find(c.case_id);
        if (it == m->end()) break;
        v.push_back(it->second);
      }
      if (v.size() != oofs.size()) continue;
      append_external(v, c, inputs.external_features, inputs.external_medians);
      X.append_row(v);
      y.push_back(*c.outcome("mortality"));
      fold_of_row.push_back(split.fold_of(c.case_id));
    }
    if (!detail::both_classes(y)) throw FitError("mortality: training labels contain a single class");
    if (detail::single_class_fold(y, fold_of_row, split.n_folds))
      throw FitError("mortality: a training fold contains a single class");
    auto fit = detail::fit_layer(make_folds(X, y, fold_of_row), X, y, detail::seeded_grid(cfg, oi, layer), cfg.jobs);
    fit.model.outcome = "mortality";
    fit.model.layer = layer;
    fit.model.feature_names = stacker_feature_names(inputs.external_features);
    models.push_back(std::move(fit.model));
  }
  return models;
}

// Full two-layer training on the non-holdout cases of `split`. Outcomes whose
// training labels are single-class are skipped and reported.
inline TrainResult train_pipeline(const CohortTable& cohort, const FeatureSchema& schema, const SplitPlan& split,
                                  const PipelineConfig& cfg) {
  for (const auto& o : cfg.outcomes) detail::outcome_index(o);
  if (cfg.layers.empty()) throw ConfigError("no layers selected");
  TrainResult res;
  auto& b = res.bundle;
  b.seed = cfg.seed;
  b.config = cfg.fingerprint_json();
  b.config_hash = config_hash(cfg);
  for (const auto& c : cohort) {
    if (split.fold_of(c.case_id) >= 0) b.training_case_ids.push_back(c.case_id);
    if (split.is_holdout(c.case_id)) b.holdout_case_ids.push_back(c.case_id);
  }

  const auto raws = extract_all(schema, cohort, cfg.transformer, cfg.jobs);
  std::map<std::string, ComplicationFit> fits;
  const bool need_all = cfg.wants("mortality");
  for (auto o : kComplications) {
    const std::string name(o);
    if (!cfg.wants(name) && !need_all) continue;
    try {
      auto fit = train_complication_models(cohort, raws, schema, name, split, cfg);
      if (cfg.wants(name))
        for (const auto& m : fit.models) {
          res.log.push_back(detail::format_cv_table(m));
          b.models.push_back(m);
        }
      fits.emplace(name, std::move(fit));
    } catch (const FitError& e) {
      res.skipped.push_back(name);
      res.log.push_back("skipped " + name + ": " + e.what());
    }
  }
  if (need_all) {
    try {
      StackerInputs inputs;
      auto models = train_mortality_stacker(cohort, fits, split, cfg, &inputs);
      b.external_features = inputs.external_features;
      b.external_medians = inputs.external_medians;
      for (auto& m : models) {
        res.log.push_back(detail::format_cv_table(m));
        b.models.push_back(std::move(m));
      }
      // Complications trained only to feed the stacker are kept so that
      // panels can compute mortality inputs.
      for (auto& [name, fit] : fits)
        if (!cfg.wants(name))
          for (auto& m : fit.models) b.models.push_back(std::move(m));
    } catch (const FitError& e) {
      res.skipped.push_back("mortality");
      res.log.push_back("skipped mortality: " + std::string(e.what()));
    }
  }
  std::stable_sort(b.models.begin(), b.models.end(), [](const LayerModel& a, const LayerModel& c) {
    const auto ka = std::pair(detail::outcome_index(a.outcome), detail::layer_index(a.layer));
    const auto kc = std::pair(detail::outcome_index(c.outcome), detail::layer_index(c.layer));
    return ka < kc;
  });
  return res;
}

// ---------------------------------------------------------------------------
// Panels

struct PanelEntry {
  std::string outcome;
  Layer layer = Layer::preop_only;
  double probability = 0.0;
  bool high_risk = false;
};

struct RiskPanel {
  std::string case_id;
  std::vector<PanelEntry> entries;

  const PanelEntry* find(std::string_view outcome, Layer layer) const {
    for (const auto& e : entries)
      if (e.outcome == outcome && e.layer == layer) return &e;
    return nullptr;
  }
};

// Probability exactly at the threshold is high risk.
inline bool classify_high(double probability, double threshold) { return probability >= threshold; }

inline void check_case_schema(const FeatureSchema& schema, const CaseRecord& c) {
  for (const auto& [name, v] : c.tabular) {
    const auto* def = schema.find(name);
    if (!def) throw ShapeError("case " + c.case_id + ": feature '" + name + "' is not in the model schema");
  }
  for (const auto& ch : c.channels)
    if (!schema.find(ch.name)) throw ShapeError("case " + c.case_id + ": channel '" + ch.name + "' is not in the model schema");
}

// Postoperative entries appear only for cases with intraoperative channels.
inline RiskPanel predict_panel_raw(const PipelineBundle& bundle, const CaseRecord& c, const RawCase* raw) {
  RiskPanel panel;
  panel.case_id = c.case_id;
  const bool intraop = c.has_intraop_channels();
  std::map<std::pair<std::string, Layer>, double> probs;
  for (const auto& m : bundle.models) {
    if (m.layer == Layer::preop_plus_intraop && !intraop) continue;
    double p;
    if (m.transformer) {
      p = m.forest.predict_proba(apply_transformer_raw(*m.transformer, *raw, m.layer));
    } else {
      std::vector<double> v;
      for (auto o : kComplications) {
        auto it = probs.find({std::string(o), m.layer});
        if (it == probs.end()) throw ShapeError("mortality stacker input " + std::string(o) + " unavailable");
        v.push_back(it->second);
      }
      append_external(v, c, bundle.external_features, bundle.external_medians);
      p = m.forest.predict_proba(v);
    }
    probs[{m.outcome, m.layer}] = p;
  }
  for (const auto& m : bundle.models) {
    auto it = probs.find({m.outcome, m.layer});
    if (it == probs.end()) continue;
    panel.entries.push_back({m.outcome, m.layer, it->second, classify_high(it->second, m.threshold)});
  }
  return panel;
}

inline const FeatureSchema* bundle_schema(const PipelineBundle& bundle) {
  for (const auto& m : bundle.models)
    if (m.transformer) return &m.transformer->schema;
  return nullptr;
}

inline RiskPanel predict_panel(const PipelineBundle& bundle, const CaseRecord& c) {
  const auto* schema = bundle_schema(bundle);
  if (!schema) throw ShapeError("bundle holds no trained models");
  check_case_schema(*schema, c);
  const auto raw = extract_raw(*schema, c, bundle.models.front().transformer->options);
  return predict_panel_raw(bundle, c, &raw);
}

inline std::vector<RiskPanel> predict_panels(const PipelineBundle& bundle, const CohortTable& cohort, int jobs = 1) {
  std::vector<RiskPanel> out(cohort.size());
  parallel_for(cohort.size(), jobs, [&](std::size_t i) { out[i] = predict_panel(bundle, cohort[i]); });
  return out;
}

inline void write_panels_csv(const std::vector<RiskPanel>& panels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "case_id,outcome,layer,probability,risk_class\n";
  for (const auto& p : panels)
    for (const auto& e : p.entries)
      out << csv::escape(p.case_id) << ',' << e.outcome << ',' << to_string(e.layer) << ','
          << format_double(e.probability) << ',' << (e.high_risk ? "high" : "low") << '\n';
  if (!out) throw Error("failed writing " + path);
}

inline std::vector<RiskPanel> read_panels_csv(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f != std::vector<std::string>{"case_id", "outcome", "layer", "probability", "risk_class"})
    throw ParseError(path, 1, "unexpected panel header");
  std::vector<RiskPanel> panels;
  std::map<std::string, std::size_t> index;
  while (reader.next(f)) {
    if (f.size() != 5) throw ParseError(path, reader.line(), "expected 5 fields");
    auto [it, fresh] = index.emplace(f[0], panels.size());
    if (fresh) panels.push_back({f[0], {}});
    PanelEntry e;
    e.outcome = f[1];
    e.layer = nlohmann::json(f[2]).get<Layer>();
    const auto p = parse_double(f[3]);
    if (!p) throw ParseError(path, reader.line(), "bad probability");
    e.probability = *p;
    e.high_risk = f[4] == "high";
    panels[it->second].entries.push_back(e);
  }
  return panels;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline std::string model_stem(const LayerModel& m) { return m.outcome + "_" + to_string(m.layer); }

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
  if (!out) throw Error("failed writing " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline nlohmann::json manifest_json(const PipelineBundle& b) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : b.models) {
    nlohmann::json cv = nlohmann::json::array();
    for (const auto& pt : m.cv_table)
      cv.push_back({{"hyperparams", pt.hp}, {"fold_auroc", pt.fold_auroc}, {"mean_auroc", pt.mean_auroc}});
    const auto stem = detail::model_stem(m);
    models.push_back({{"outcome", m.outcome},
                      {"layer", m.layer},
                      {"threshold", m.threshold},
                      {"feature_names", m.feature_names},
                      {"feature_count", m.forest.feature_count},
                      {"hyperparams", m.forest.hyperparams},
                      {"best_index", m.best_index},
                      {"cv", cv},
                      {"n_train", m.n_train},
                      {"n_positive", m.n_positive},
                      {"forest", "forest_" + stem + ".json"},
                      {"transformer", m.transformer ? nlohmann::json("transformer_" + stem + ".json") : nlohmann::json()}});
  }
  return {{"format", "periop-bundle"},
          {"version", PipelineBundle::kVersion},
          {"seed", b.seed},
          {"config_hash", b.config_hash},
          {"config", b.config},
          {"models", models},
          {"external_features", b.external_features},
          {"external_medians", b.external_medians},
          {"training_case_ids", b.training_case_ids},
          {"holdout_case_ids", b.holdout_case_ids}};
}

// Writes manifest.json plus one forest (and transformer) file per model.
// Returns a hash over every written byte.
inline std::string save_bundle(const PipelineBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create bundle directory " + dir + ": " + ec.message());
  std::uint64_t h = fnv1a("periop-bundle");
  auto put = [&](const std::string& name, const std::string& text) {
    detail::write_text(fs::path(dir) / name, text);
    h = fnv1a(name, h);
    h = fnv1a(text, h);
  };
  for (const auto& m : b.models) {
    const auto stem = detail::model_stem(m);
    put("forest_" + stem + ".json", nlohmann::json(m.forest).dump());
    if (m.transformer) put("transformer_" + stem + ".json", nlohmann::json(*m.transformer).dump(1));
  }
  put("manifest.json", manifest_json(b).dump(2) + "\n");
  return hex64(h);
}

inline PipelineBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  PipelineBundle b;
  try {
    const auto j = nlohmann::json::parse(detail::read_text(fs::path(dir) / "manifest.json"));
    if (j.value("format", "") != "periop-bundle") throw ConfigError(dir + ": not a pipeline bundle");
    if (j.at("version").get<int>() != PipelineBundle::kVersion) throw ConfigError(dir + ": unsupported bundle version");
    b.seed = j.at("seed").get<std::uint64_t>();
    b.config_hash = j.at("config_hash").get<std::string>();
    b.config = j.at("config");
    b.external_features = j.at("external_features").get<std::vector<std::string>>();
    b.external_medians = j.at("external_medians").get<std::vector<double>>();
    b.training_case_ids = j.at("training_case_ids").get<std::vector<std::string>>();
    b.holdout_case_ids = j.at("holdout_case_ids").get<std::vector<std::string>>();
    for (const auto& jm : j.at("models")) {
      LayerModel m;
      m.outcome = jm.at("outcome").get<std::string>();
      m.layer = jm.at("layer").get<Layer>();
      m.threshold = jm.at("threshold").get<double>();
      m.feature_names = jm.at("feature_names").get<std::vector<std::string>>();
      m.best_index = jm.at("best_index").get<std::size_t>();
      m.n_train = jm.at("n_train").get<std::size_t>();
      m.n_positive = jm.at("n_positive").get<std::size_t>();
      for (const auto& pt : jm.at("cv")) {
        GridPointResult g;
        g.hp = pt.at("hyperparams").get<HyperParams>();
        for (const auto& v : pt.at("fold_auroc"))
          g.fold_auroc.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        g.mean_auroc = pt.at("mean_auroc").get<double>();
        m.cv_table.push_back(std::move(g));
      }
      m.forest = nlohmann::json::parse(detail::read_text(fs::path(dir) / jm.at("forest").get<std::string>()))
                     .get<Forest>();
      if (!jm.at("transformer").is_null())
        m.transformer = nlohmann::json::parse(detail::read_text(fs::path(dir) / jm.at("transformer").get<std::string>()))
                            .get<TransformerState>();
      const std::size_t expected = m.transformer ? m.transformer->output_size(m.layer) : m.feature_names.size();
      if (m.forest.feature_count != expected)
        throw ShapeError(dir + ": model " + m.outcome + "/" + to_string(m.layer) +
                         " feature count does not match its inputs");
      b.models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(dir + ": malformed bundle: " + e.what());
  }
  return b;
}

}  // namespace periop
