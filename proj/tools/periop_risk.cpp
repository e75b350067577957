// periop_risk: simulate, train, evaluate and compare two-layer surgical
// complication risk models.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 output not writable,
// 3 every selected outcome was skipped during training, 4 generation
// warnings under --strict.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "periop/periop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace periop;

namespace {

enum Exit { kOk = 0, kInput = 1, kUnwritable = 2, kAllSkipped = 3, kStrict = 4 };

struct ExitError : std::runtime_error {
  int code;
  ExitError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ExitError(kUnwritable, "cannot create output directory " + dir + ": " + ec.message());
  const auto probe = fs::path(dir) / ".periop_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ExitError(kUnwritable, "output directory " + dir + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ExitError(kUnwritable, "cannot write " + p.string());
  out << text;
}

// Values from --config fill options the command line left unset.
class ConfigFile {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw ExitError(kInput, "cannot open config file " + path);
    try {
      j_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ExitError(kInput, path + ": " + e.what());
    }
    if (!j_.is_object()) throw ExitError(kInput, path + ": config must be a JSON object");
  }

  const json& raw() const { return j_; }

  template <typename T>
  void fill(const CLI::Option* opt, const std::string& key, T& value) const {
    if (opt->count() > 0 || !j_.contains(key)) return;
    try {
      value = j_[key].get<T>();
    } catch (const json::exception& e) {
      throw ExitError(kInput, "config key '" + key + "': " + e.what());
    }
  }

 private:
  json j_ = json::object();
};

// Flag, then config file, then PERIOP_RISK_SEED, then 0.
std::uint64_t resolve_seed(const CLI::Option* opt, const ConfigFile& cfg, std::uint64_t flag_value) {
  if (opt->count() > 0) return flag_value;
  if (cfg.raw().contains("seed")) {
    std::uint64_t v = 0;
    cfg.fill(opt, "seed", v);
    return v;
  }
  if (const char* env = std::getenv("PERIOP_RISK_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ExitError(kInput, "PERIOP_RISK_SEED is not an unsigned integer");
    }
  }
  return 0;
}

std::map<std::string, double> parse_kv(const std::vector<std::string>& items, const char* what) {
  std::map<std::string, double> out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ExitError(kInput, std::string(what) + " expects outcome=value, got " + s);
    const auto v = parse_double(s.substr(eq + 1));
    if (!v) throw ExitError(kInput, std::string(what) + ": bad number in " + s);
    out[s.substr(0, eq)] = *v;
  }
  return out;
}

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config_path;
  std::string out = "simulated";
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::vector<std::string> prevalence, preop_signal, intraop_signal;
  double missingness = -1, spike_rate = -1;
  bool no_external = false;
  bool strict = false;
  int jobs = 0;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub) {
  ConfigFile cf;
  cf.load(a.config_path);
  GeneratorConfig g;
  try {
    if (cf.raw().contains("generator")) g = cf.raw()["generator"].get<GeneratorConfig>();
  } catch (const std::exception& e) {
    throw ExitError(kInput, std::string("config key 'generator': ") + e.what());
  }
  std::size_t n = a.n;
  cf.fill(sub.get_option("--n"), "n", n);
  g.n_cases = n;
  std::uint64_t seed_flag = a.seed;
  g.seed = resolve_seed(sub.get_option("--seed"), cf, seed_flag);
  for (const auto& [k, v] : parse_kv(a.prevalence, "--prevalence")) g.prevalence[k] = v;
  for (const auto& [k, v] : parse_kv(a.preop_signal, "--preop-signal")) g.preop_signal[k] = v;
  for (const auto& [k, v] : parse_kv(a.intraop_signal, "--intraop-signal")) g.intraop_signal[k] = v;
  if (a.missingness >= 0) g.missingness_rate = a.missingness;
  if (a.spike_rate >= 0) g.spike_rate = a.spike_rate;
  if (a.no_external) g.external_probs = false;
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw ExitError(kInput, e.what());
  }
  std::string out = a.out;
  cf.fill(sub.get_option("--out"), "out", out);
  ensure_writable_dir(out);

  const auto gen = generate_cohort(g);
  const fs::path dir(out);
  save_cohort(gen.cohort, gen.schema, (dir / "cohort.csv").string(), (dir / "channels.csv").string());
  save_schema(gen.schema, (dir / "schema.json").string());
  write_file(dir / "generator.json", json(g).dump(2) + "\n");

  std::cout << "simulated " << gen.cohort.size() << " cases (seed " << g.seed << ") into " << out << "\n";
  std::cout << "outcome            target  achieved\n";
  for (auto o : kOutcomes) {
    const std::string name(o);
    std::cout << name << std::string(19 - name.size(), ' ') << fmt(g.prevalence.at(name)) << "  "
              << fmt(gen.achieved_prevalence.at(name)) << "\n";
  }
  std::cout << "channel samples " << gen.channel_samples << ", spikes injected " << gen.spikes_injected
            << ", out-of-range injected " << gen.out_of_range_injected << "\n";
  if (a.strict && !gen.warnings.empty()) {
    std::cerr << "error: generation produced " << gen.warnings.size() << " warning(s) under --strict\n";
    return kStrict;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct CohortArgs {
  std::string cohort, channels, schema;
};

FeatureSchema load_schema_or_exit(const std::string& path) {
  if (path.empty()) throw ExitError(kInput, "--schema is required");
  return load_schema(path);
}

// Defaults: the schema and channels next to the cohort file.
void default_siblings(CohortArgs& c) {
  const auto dir = fs::path(c.cohort).parent_path();
  if (c.schema.empty() && fs::exists(dir / "schema.json")) c.schema = (dir / "schema.json").string();
  if (c.channels.empty() && fs::exists(dir / "channels.csv")) c.channels = (dir / "channels.csv").string();
}

struct TrainArgs {
  std::string config_path;
  CohortArgs in;
  std::string out = "bundle";
  std::uint64_t seed = 0;
  std::string grid;
  std::string split_mode = "random";
  double holdout_fraction = 0.2;
  std::string cutoff_date;
  int folds = 5;
  std::vector<std::string> outcomes, layers;
  int jobs = 0;
};

int cmd_train(TrainArgs a, const CLI::App& sub) {
  ConfigFile cf;
  cf.load(a.config_path);
  cf.fill(sub.get_option("--cohort"), "cohort", a.in.cohort);
  cf.fill(sub.get_option("--channels"), "channels", a.in.channels);
  cf.fill(sub.get_option("--schema"), "schema", a.in.schema);
  cf.fill(sub.get_option("--out"), "out", a.out);
  cf.fill(sub.get_option("--grid"), "grid", a.grid);
  cf.fill(sub.get_option("--split-mode"), "split_mode", a.split_mode);
  cf.fill(sub.get_option("--holdout-fraction"), "holdout_fraction", a.holdout_fraction);
  cf.fill(sub.get_option("--cutoff-date"), "cutoff_date", a.cutoff_date);
  cf.fill(sub.get_option("--folds"), "folds", a.folds);
  cf.fill(sub.get_option("--outcome"), "outcomes", a.outcomes);
  cf.fill(sub.get_option("--layer"), "layers", a.layers);
  cf.fill(sub.get_option("--jobs"), "jobs", a.jobs);
  if (a.in.cohort.empty()) throw ExitError(kInput, "--cohort is required");
  default_siblings(a.in);

  PipelineConfig pc;
  pc.seed = resolve_seed(sub.get_option("--seed"), cf, a.seed);
  pc.jobs = a.jobs > 0 ? a.jobs : default_jobs();
  if (!a.grid.empty()) pc.grid = load_grid(a.grid, pc.seed);
  if (!a.outcomes.empty()) {
    for (const auto& o : a.outcomes)
      if (!is_outcome_name(o)) throw ExitError(kInput, "unknown outcome " + o);
    pc.outcomes = a.outcomes;
  }
  if (!a.layers.empty()) {
    pc.layers.clear();
    for (const auto& l : a.layers) {
      if (l == "preop_only") pc.layers.push_back(Layer::preop_only);
      else if (l == "preop_plus_intraop") pc.layers.push_back(Layer::preop_plus_intraop);
      else throw ExitError(kInput, "unknown layer " + l);
    }
  }
  ensure_writable_dir(a.out);

  const auto schema = load_schema_or_exit(a.in.schema);
  const auto cohort = load_cohort(a.in.cohort, schema, a.in.channels);
  for (const auto& d : cohort.diagnostics()) std::cout << "note: " << d << "\n";

  SplitPlan split;
  if (a.split_mode == "random") {
    split = make_split(cohort, a.folds, a.holdout_fraction, pc.seed);
  } else if (a.split_mode == "date") {
    if (a.cutoff_date.empty()) throw ExitError(kInput, "--split-mode date requires --cutoff-date");
    split = make_split_by_date(cohort, a.cutoff_date, a.folds, pc.seed);
  } else {
    throw ExitError(kInput, "--split-mode must be random or date");
  }
  std::cout << "training on " << split.fold_assignment.size() << " cases in " << split.n_folds << " folds; "
            << split.holdout.size() << " held out\n";

  const auto res = train_pipeline(cohort, schema, split, pc);
  const auto hash = save_bundle(res.bundle, a.out);
  std::ostringstream log;
  log << "config_hash " << res.bundle.config_hash << "\n";
  for (const auto& line : res.log) log << line << "\n";
  log << "bundle_hash " << hash << "\n";
  write_file(fs::path(a.out) / "training_log.txt", log.str());
  write_file(fs::path(a.out) / "split.json", json(split).dump(1) + "\n");
  std::cout << log.str();
  if (res.bundle.models.empty()) {
    std::cerr << "error: every selected outcome was skipped\n";
    return kAllSkipped;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config_path;
  CohortArgs in;
  std::string bundle = "bundle";
  std::string out = "evaluation";
  std::string subset = "auto";
  std::uint64_t seed = 0;
  std::size_t n_boot = 1000;
  std::string thresholds = "bundle";
  int jobs = 0;
};

struct Loaded {
  PipelineBundle bundle;
  CohortTable cohort;
  bool leakage = false;
};

Loaded load_for_scoring(EvalArgs& a) {
  if (a.in.cohort.empty()) throw ExitError(kInput, "--cohort is required");
  default_siblings(a.in);
  Loaded L;
  L.bundle = load_bundle(a.bundle);
  const auto* schema = bundle_schema(L.bundle);
  if (!schema) throw ExitError(kInput, "bundle has no models");
  FeatureSchema s = a.in.schema.empty() ? *schema : load_schema(a.in.schema);
  auto cohort = load_cohort(a.in.cohort, s, a.in.channels);

  std::string subset = a.subset;
  if (subset == "auto") subset = L.bundle.holdout_case_ids.empty() ? "all" : "holdout";
  if (subset == "holdout") {
    std::set<std::string> ids(L.bundle.holdout_case_ids.begin(), L.bundle.holdout_case_ids.end());
    cohort = cohort.subset(ids);
    if (cohort.empty()) throw ExitError(kInput, "none of the bundle's holdout cases are in the cohort");
  } else if (subset != "all") {
    throw ExitError(kInput, "--subset must be auto, holdout or all");
  }
  const std::set<std::string> train(L.bundle.training_case_ids.begin(), L.bundle.training_case_ids.end());
  for (const auto& c : cohort)
    if (train.count(c.case_id)) {
      L.leakage = true;
      break;
    }
  if (L.leakage) {
    std::cerr << "==============================================================\n"
              << "WARNING: evaluated cases overlap the training cases of this\n"
              << "bundle. Metrics below are optimistic and are not a holdout\n"
              << "estimate of performance.\n"
              << "==============================================================\n";
  }
  L.cohort = std::move(cohort);
  return L;
}

void fill_eval(EvalArgs& a, const ConfigFile& cf, const CLI::App& sub) {
  cf.fill(sub.get_option("--cohort"), "cohort", a.in.cohort);
  cf.fill(sub.get_option("--channels"), "channels", a.in.channels);
  cf.fill(sub.get_option("--schema"), "schema", a.in.schema);
  cf.fill(sub.get_option("--bundle"), "bundle", a.bundle);
  cf.fill(sub.get_option("--out"), "out", a.out);
  cf.fill(sub.get_option("--subset"), "subset", a.subset);
  cf.fill(sub.get_option("--jobs"), "jobs", a.jobs);
  if (auto* o = sub.get_option_no_throw("--n-boot")) cf.fill(o, "n_boot", a.n_boot);
  if (auto* o = sub.get_option_no_throw("--thresholds")) cf.fill(o, "thresholds", a.thresholds);
}

int cmd_evaluate(EvalArgs a, const CLI::App& sub) {
  ConfigFile cf;
  cf.load(a.config_path);
  fill_eval(a, cf, sub);
  const int jobs = a.jobs > 0 ? a.jobs : default_jobs();
  ensure_writable_dir(a.out);
  auto L = load_for_scoring(a);
  const auto panels = predict_panels(L.bundle, L.cohort, jobs);
  write_panels_csv(panels, (fs::path(a.out) / "panel.csv").string());

  json models = json::array();
  std::cout << "outcome          layer               n      auroc   auprc   threshold\n";
  for (const auto& m : L.bundle.models) {
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& p : panels) {
      const auto* e = p.find(m.outcome, m.layer);
      const auto label = L.cohort.find(p.case_id)->outcome(m.outcome);
      if (!e || !label) continue;
      s.push_back(e->probability);
      y.push_back(*label);
    }
    json row = {{"outcome", m.outcome}, {"layer", m.layer}, {"n", s.size()}, {"threshold", m.threshold}};
    double roc = std::numeric_limits<double>::quiet_NaN(), pr = roc;
    if (!s.empty()) {
      roc = evaluate_metric({MetricKind::auroc}, s, y);
      pr = evaluate_metric({MetricKind::auprc}, s, y);
      const auto c = confusion_metrics(s, y, m.threshold);
      row["n_positive"] = c.tp + c.fn;
      row["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
      for (const auto& [k, v] : std::map<std::string, double>{{"sensitivity", c.sensitivity},
                                                              {"specificity", c.specificity},
                                                              {"ppv", c.ppv},
                                                              {"npv", c.npv},
                                                              {"accuracy", c.accuracy}})
        row[k] = std::isnan(v) ? json(nullptr) : json(v);
    }
    row["auroc"] = std::isnan(roc) ? json(nullptr) : json(roc);
    row["auprc"] = std::isnan(pr) ? json(nullptr) : json(pr);
    models.push_back(row);
    const auto layer = to_string(m.layer);
    std::cout << m.outcome << std::string(17 - m.outcome.size(), ' ') << layer << std::string(20 - layer.size(), ' ')
              << s.size() << std::string(7 - std::min<std::size_t>(6, std::to_string(s.size()).size()), ' ')
              << fmt(roc) << "  " << fmt(pr) << "  " << fmt(m.threshold) << "\n";
  }
  const json metrics = {{"format", "periop-metrics"},
                        {"bundle_config_hash", L.bundle.config_hash},
                        {"cases", L.cohort.size()},
                        {"leakage_warning", L.leakage},
                        {"models", models}};
  write_file(fs::path(a.out) / "metrics.json", metrics.dump(2) + "\n");
  return kOk;
}

int cmd_compare(EvalArgs a, const CLI::App& sub) {
  ConfigFile cf;
  cf.load(a.config_path);
  fill_eval(a, cf, sub);
  const int jobs = a.jobs > 0 ? a.jobs : default_jobs();
  if (a.thresholds != "bundle" && a.thresholds != "data")
    throw ExitError(kInput, "--thresholds must be bundle or data");
  ensure_writable_dir(a.out);
  auto L = load_for_scoring(a);
  CompareOptions o;
  o.n_boot = a.n_boot;
  o.seed = resolve_seed(sub.get_option("--seed"), cf, a.seed);
  o.jobs = jobs;
  const auto panels = predict_panels(L.bundle, L.cohort, jobs);
  const auto report = compare_layers(L.bundle, panels, L.cohort, o, a.thresholds == "data");
  if (report.outcomes.empty()) throw ExitError(kInput, "no outcome has both layers and both classes to compare");
  const fs::path dir(a.out);
  write_file(dir / "report.json", to_json(report).dump(2) + "\n");
  const auto text = format_report_text(report);
  write_file(dir / "report.txt", text);
  for (const auto& c : report.outcomes) {
    const auto s = collect_layer_scores(panels, L.cohort, c.outcome);
    for (auto [layer, scores] : {std::pair{Layer::preop_only, &s.preop}, std::pair{Layer::preop_plus_intraop, &s.postop}}) {
      const auto stem = c.outcome + "_" + to_string(layer);
      write_roc_csv(roc_curve(*scores, s.labels), (dir / ("roc_" + stem + ".csv")).string());
      write_pr_csv(pr_curve(*scores, s.labels), (dir / ("pr_" + stem + ".csv")).string());
    }
  }
  std::cout << text;
  return kOk;
}

void add_cohort_opts(CLI::App* s, CohortArgs& c) {
  s->add_option("--cohort", c.cohort, "Cohort CSV");
  s->add_option("--channels", c.channels, "Channel sidecar CSV (default: channels.csv next to the cohort)");
  s->add_option("--schema", c.schema, "Feature schema JSON (default: schema.json next to the cohort)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-layer perioperative complication risk models"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Generate a synthetic cohort");
  s_sim->add_option("--config", sim.config_path, "JSON config; flags take precedence");
  s_sim->add_option("--out", sim.out, "Output directory");
  s_sim->add_option("--n", sim.n, "Number of cases");
  s_sim->add_option("--seed", sim.seed, "Random seed");
  s_sim->add_option("--prevalence", sim.prevalence, "outcome=proportion (repeatable)");
  s_sim->add_option("--preop-signal", sim.preop_signal, "outcome=log-odds per SD (repeatable)");
  s_sim->add_option("--intraop-signal", sim.intraop_signal, "outcome=log-odds per SD (repeatable)");
  s_sim->add_option("--missingness", sim.missingness, "Missing-value rate for tabular features");
  s_sim->add_option("--spike-rate", sim.spike_rate, "Per-sample spike injection rate");
  s_sim->add_flag("--no-external-probs", sim.no_external, "Omit aki_prob/sepsis_prob columns");
  s_sim->add_flag("--strict", sim.strict, "Fail (exit 4) on generation warnings");
  s_sim->add_option("--jobs", sim.jobs, "Worker threads (unused; generation is serial)");

  TrainArgs tr;
  auto* s_tr = app.add_subcommand("train", "Train the preop/postop models and the mortality stacker");
  s_tr->add_option("--config", tr.config_path, "JSON config; flags take precedence");
  add_cohort_opts(s_tr, tr.in);
  s_tr->add_option("--out", tr.out, "Bundle directory");
  s_tr->add_option("--seed", tr.seed, "Random seed");
  s_tr->add_option("--grid", tr.grid, "Hyperparameter grid JSON");
  s_tr->add_option("--split-mode", tr.split_mode, "random | date");
  s_tr->add_option("--holdout-fraction", tr.holdout_fraction, "Holdout share for --split-mode random");
  s_tr->add_option("--cutoff-date", tr.cutoff_date, "Holdout patients first operated on or after this date");
  s_tr->add_option("--folds", tr.folds, "Cross-validation folds");
  s_tr->add_option("--outcome", tr.outcomes, "Outcome to train (repeatable; default all)");
  s_tr->add_option("--layer", tr.layers, "preop_only | preop_plus_intraop (repeatable; default both)");
  s_tr->add_option("--jobs", tr.jobs, "Worker threads (default: all cores)");

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("evaluate", "Score a cohort and write the risk panel and metrics");
  s_ev->add_option("--config", ev.config_path, "JSON config; flags take precedence");
  add_cohort_opts(s_ev, ev.in);
  s_ev->add_option("--bundle", ev.bundle, "Bundle directory");
  s_ev->add_option("--out", ev.out, "Output directory");
  s_ev->add_option("--subset", ev.subset, "auto | holdout | all");
  s_ev->add_option("--jobs", ev.jobs, "Worker threads (default: all cores)");

  EvalArgs cmp;
  cmp.out = "comparison";
  auto* s_cmp = app.add_subcommand("compare", "Compare the preop and postop layers");
  s_cmp->add_option("--config", cmp.config_path, "JSON config; flags take precedence");
  add_cohort_opts(s_cmp, cmp.in);
  s_cmp->add_option("--bundle", cmp.bundle, "Bundle directory");
  s_cmp->add_option("--out", cmp.out, "Output directory");
  s_cmp->add_option("--subset", cmp.subset, "auto | holdout | all");
  s_cmp->add_option("--seed", cmp.seed, "Bootstrap seed");
  s_cmp->add_option("--n-boot", cmp.n_boot, "Bootstrap replicates");
  s_cmp->add_option("--thresholds", cmp.thresholds, "bundle (out-of-fold Youden) | data (Youden on evaluated cases)");
  s_cmp->add_option("--jobs", cmp.jobs, "Worker threads (default: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(sim, *s_sim);
    if (s_tr->parsed()) return cmd_train(tr, *s_tr);
    if (s_ev->parsed()) return cmd_evaluate(ev, *s_ev);
    if (s_cmp->parsed()) return cmd_compare(cmp, *s_cmp);
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
