#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "periop/cohort.hpp"
#include "periop/error.hpp"
#include "periop/log.hpp"
#include "periop/numeric.hpp"
#include "periop/rng.hpp"

namespace periop {

struct GeneratorConfig {
  std::size_t n_cases = 2000;
  std::map<std::string, double> prevalence = {
      {"icu_gt_48h", 0.26}, {"mv_gt_48h", 0.06}, {"neuro_delirium", 0.16}, {"mortality", 0.02}};
  // Log-odds per standard deviation of the preoperative / intraoperative
  // latent risk of each outcome.
  std::map<std::string, double> preop_signal = {
      {"icu_gt_48h", 1.2}, {"mv_gt_48h", 1.2}, {"neuro_delirium", 1.2}, {"mortality", 0.6}};
  std::map<std::string, double> intraop_signal = {
      {"icu_gt_48h", 1.5}, {"mv_gt_48h", 1.5}, {"neuro_delirium", 1.5}, {"mortality", 0.0}};
  // Mortality log-odds per standard deviation of the mean complication logit.
  double mortality_coupling = 1.5;
  double missingness_rate = 0.05;
  double spike_rate = 0.01;
  double duplicate_rate = 0.01;
  double out_of_range_rate = 0.002;
  double no_channel_rate = 0.0;
  double repeat_patient_rate = 0.15;
  bool external_probs = true;
  double sample_interval_s = 60.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_cases == 0) throw ConfigError("n_cases must be positive");
    for (const auto& [o, p] : prevalence) {
      if (!is_outcome_name(o)) throw ConfigError("unknown outcome '" + o + "' in prevalence");
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("prevalence of " + o + " must be in (0, 1)");
    }
    for (double r : {missingness_rate, spike_rate, duplicate_rate, out_of_range_rate, no_channel_rate,
                     repeat_patient_rate})
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("rates must be in [0, 1]");
    if (!(sample_interval_s > 0.0)) throw ConfigError("sample_interval_s must be positive");
  }

  double signal(const std::map<std::string, double>& m, const std::string& o) const {
    auto it = m.find(o);
    return it == m.end() ? 0.0 : it->second;
  }
};

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"n_cases", c.n_cases},
       {"prevalence", c.prevalence},
       {"preop_signal", c.preop_signal},
       {"intraop_signal", c.intraop_signal},
       {"mortality_coupling", c.mortality_coupling},
       {"missingness_rate", c.missingness_rate},
       {"spike_rate", c.spike_rate},
       {"duplicate_rate", c.duplicate_rate},
       {"out_of_range_rate", c.out_of_range_rate},
       {"no_channel_rate", c.no_channel_rate},
       {"repeat_patient_rate", c.repeat_patient_rate},
       {"external_probs", c.external_probs},
       {"sample_interval_s", c.sample_interval_s},
       {"seed", c.seed}};
}

// Missing keys keep their defaults; maps are merged key by key.
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  auto merge = [&](const char* key, std::map<std::string, double>& m) {
    if (!j.contains(key)) return;
    for (const auto& [k, v] : j[key].items()) m[k] = v.get<double>();
  };
  if (j.contains("n_cases")) c.n_cases = j["n_cases"].get<std::size_t>();
  merge("prevalence", c.prevalence);
  merge("preop_signal", c.preop_signal);
  merge("intraop_signal", c.intraop_signal);
  if (j.contains("mortality_coupling")) c.mortality_coupling = j["mortality_coupling"].get<double>();
  if (j.contains("missingness_rate")) c.missingness_rate = j["missingness_rate"].get<double>();
  if (j.contains("spike_rate")) c.spike_rate = j["spike_rate"].get<double>();
  if (j.contains("duplicate_rate")) c.duplicate_rate = j["duplicate_rate"].get<double>();
  if (j.contains("out_of_range_rate")) c.out_of_range_rate = j["out_of_range_rate"].get<double>();
  if (j.contains("no_channel_rate")) c.no_channel_rate = j["no_channel_rate"].get<double>();
  if (j.contains("repeat_patient_rate")) c.repeat_patient_rate = j["repeat_patient_rate"].get<double>();
  if (j.contains("external_probs")) c.external_probs = j["external_probs"].get<bool>();
  if (j.contains("sample_interval_s")) c.sample_interval_s = j["sample_interval_s"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
}

struct GeneratedCohort {
  CohortTable cohort;
  FeatureSchema schema;
  std::map<std::string, double> achieved_prevalence;
  std::vector<std::string> warnings;
  std::size_t channel_samples = 0;   // emitted samples, duplicates included
  std::size_t spikes_injected = 0;
  std::size_t out_of_range_injected = 0;
};

namespace synth {

// Intraoperative latent factors drawn per case.
enum Latent { hypotension, tachycardia, respiratory, hypothermia, depth, kLatents };

struct ChannelSpec {
  const char* name;
  Range range;
  double base;
  std::array<double, kLatents> loading;
  double sd;  // stationary standard deviation of the walk
  std::vector<Range> bands;
};

inline const std::vector<ChannelSpec>& channel_specs() {
  static const std::vector<ChannelSpec> specs = {
      {"heart_rate", {0, 300}, 75, {0, 10, 0, 0, 0}, 5, {{0, 60}, {100, 300}}},
      {"sbp", {20, 300}, 120, {-15, 0, 0, 0, 0}, 8, {{20, 90}, {160, 300}}},
      {"dbp", {5, 225}, 70, {-8, 0, 0, 0, 0}, 5, {{5, 50}}},
      {"temperature", {24, 45}, 36.3, {0, 0, 0, -0.5, 0}, 0.2, {{24, 36}}},
      {"resp_rate", {0, 60}, 12, {0, 0, 2, 0, 0}, 1, {{0, 8}, {20, 60}}},
      {"mac", {0, 2}, 0.9, {0, 0, 0, 0, 0.15}, 0.05, {{0, 0.5}}},
      {"peep", {0, 30}, 5, {0, 0, 2, 0, 0}, 0.5, {{10, 30}}},
      {"pip", {0, 40}, 20, {0, 0, 3, 0, 0}, 1.5, {{30, 40}}},
      {"fio2", {21, 200}, 50, {0, 0, 12, 0, 0}, 3, {{60, 200}}},
      {"spo2", {0, 100}, 96, {0, 0, -1.5, 0, 0}, 1.0, {{0, 92}}},
      {"etco2", {10, 200}, 38, {0, 0, 4, 0, 0}, 2, {{10, 30}, {45, 200}}},
  };
  return specs;
}

struct LabSpec {
  const char* name;
  Range range;
};

inline const std::vector<LabSpec>& lab_specs() {
  static const std::vector<LabSpec> labs = {
      {"creatinine", {0.1, 20}}, {"bun", {1, 200}},        {"hemoglobin", {3, 23}}, {"glucose", {25, 1400}},
      {"sodium", {80, 190}},     {"wbc", {0.1, 240}},      {"platelet", {2, 1900}},
  };
  return labs;
}

inline const std::array<const char*, 12>& procedure_chapters() {
  static const std::array<const char*, 12> ch = {"35", "36", "38", "39", "45", "46",
                                                 "51", "54", "77", "81", "83", "86"};
  return ch;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Values are recorded at a fixed resolution, as monitors and labs report them.
inline double round_to(double v, double step) { return std::round(v / step) * step; }

inline void standardize(std::vector<double>& v) {
  const double m = mean(v);
  const double sd = std::sqrt(variance(v));
  for (auto& x : v) x = sd > 0.0 ? (x - m) / sd : 0.0;
}

// Intercept a with mean(logistic(a + z)) = target, by bisection.
inline double calibrate_intercept(const std::vector<double>& z, double target) {
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (double x : z) s += logistic(mid + x);
    (s / static_cast<double>(z.size()) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Days since 1970-01-01 to a civil date (proleptic Gregorian).
inline std::string civil_date(std::int64_t days, int hour, int minute) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const auto doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  const auto y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", y, m, d, hour, minute);
  return buf;
}

inline std::string two_digits(std::size_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu", v);
  return buf;
}

}  // namespace synth

inline FeatureSchema synthetic_schema() {
  std::vector<FeatureDef> f;
  auto add = [&](std::string name, FeatureKind k, Phase p, std::optional<Range> r = std::nullopt,
                 std::vector<Range> bands = {}) { f.push_back({std::move(name), k, p, r, std::move(bands)}); };
  const auto pre = Phase::preoperative;
  const auto intra = Phase::intraoperative;
  add("age", FeatureKind::continuous, pre, Range{18, 120});
  add("sex_male", FeatureKind::binary, pre);
  add("bmi", FeatureKind::continuous, pre, Range{10, 100});
  add("race", FeatureKind::nominal, pre);
  add("insurance", FeatureKind::nominal, pre);
  add("median_income", FeatureKind::continuous, pre);
  add("distance_km", FeatureKind::continuous, pre);
  add("charlson", FeatureKind::continuous, pre, Range{0, 40});
  add("emergency", FeatureKind::binary, pre);
  add("chf", FeatureKind::binary, pre);
  add("diabetes", FeatureKind::binary, pre);
  add("ckd", FeatureKind::binary, pre);
  add("med_betablocker", FeatureKind::binary, pre);
  add("med_statin", FeatureKind::binary, pre);
  for (const auto& lab : synth::lab_specs()) add(lab.name, FeatureKind::continuous, pre, lab.range);
  add("surgeon", FeatureKind::nominal, pre);
  add("procedure", FeatureKind::procedure_code, pre);
  for (const auto& ch : synth::channel_specs()) add(ch.name, FeatureKind::timeseries, intra, ch.range, ch.bands);
  add("duration_min", FeatureKind::continuous, intra);
  add("estimated_blood_loss", FeatureKind::continuous, intra);
  add("urine_output", FeatureKind::continuous, intra);
  add("night_surgery", FeatureKind::binary, intra);
  return FeatureSchema(std::move(f));
}

// Deterministic per seed: every case draws from its own stream keyed on
// (seed, case index), and cohort-level quantities are order-free sums.
inline GeneratedCohort generate_cohort(const GeneratorConfig& cfg) {
  cfg.validate();
  using synth::Latent;
  using synth::kLatents;
  GeneratedCohort out;
  out.schema = synthetic_schema();
  const std::size_t n = cfg.n_cases;

  // Fixed group effects shared by the cohort.
  Rng grng(derive_seed(cfg.seed, 0xc0ffeeULL));
  std::array<std::array<double, 3>, 12> chapter_effect{};
  for (auto& e : chapter_effect)
    for (auto& x : e) x = 0.8 * standard_normal(grng);
  std::array<double, 40> surgeon_effect{};
  for (auto& x : surgeon_effect) x = 0.6 * standard_normal(grng);

  struct Draft {
    CaseRecord rec;
    std::array<double, 4> pre_raw{};    // per outcome (icu, mv, neuro, mortality)
    std::array<double, kLatents> u{};   // intraoperative latents
  };
  std::vector<Draft> drafts(n);
  const auto& channels = synth::channel_specs();
  const auto& labs = synth::lab_specs();
  const std::int64_t day0 = 16222;   // 2014-06-01
  const std::int64_t day1 = 17956;   // 2019-02-28
  std::size_t patient_counter = 0;
  std::vector<std::string> patient_of(n);
  {
    Rng prng(derive_seed(cfg.seed, 0x9a71e47ULL));
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && bernoulli(prng, cfg.repeat_patient_rate)) {
        patient_of[i] = patient_of[uniform_index(prng, i)];
      } else {
        patient_of[i] = "P" + std::to_string(100000 + patient_counter++);
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    Draft& d = drafts[i];
    CaseRecord& r = d.rec;
    char id[32];
    std::snprintf(id, sizeof id, "C%06zu", i);
    r.case_id = id;
    r.patient_id = patient_of[i];
    r.admission_id = "A" + r.case_id.substr(1);
    const std::int64_t day = day0 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(day1 - day0 + 1)));
    const int hour = static_cast<int>(uniform_index(rng, 24));
    const int minute = static_cast<int>(uniform_index(rng, 60));
    r.surgery_time = synth::civil_date(day, hour, minute);

    auto missing = [&] { return bernoulli(rng, cfg.missingness_rate); };
    auto put = [&](const std::string& name, double v) { r.tabular[name] = synth::round_to(v, 0.01); };
    auto put_lab = [&](const synth::LabSpec& lab, double v) {
      v = std::clamp(v, lab.range.lo, lab.range.hi);
      if (bernoulli(rng, cfg.out_of_range_rate)) {
        v = lab.range.hi * 1.5 + 1.0;
        ++out.out_of_range_injected;
      }
      if (missing()) r.tabular[lab.name] = Missing{};
      else r.tabular[lab.name] = synth::round_to(v, 0.01);
    };

    const double age = std::clamp(57.0 + 17.0 * standard_normal(rng), 18.0, 95.0);
    const bool male = bernoulli(rng, 0.5);
    const double bmi = std::clamp(29.0 + 6.0 * standard_normal(rng), 15.0, 60.0);
    const double charlson = std::min(20.0, std::floor(-2.0 * std::log(1.0 - uniform01(rng))));
    const bool emergency = bernoulli(rng, 0.2);
    const bool chf = bernoulli(rng, 0.15);
    const bool diabetes = bernoulli(rng, 0.25);
    const double creat = std::exp(0.4 * standard_normal(rng)) * (chf ? 1.3 : 1.0);
    const bool ckd = bernoulli(rng, creat > 1.5 ? 0.7 : 0.05);
    const double bun = 15.0 * std::pow(creat, 0.8) * std::exp(0.25 * standard_normal(rng));
    const double hgb = 12.5 + 2.0 * standard_normal(rng);
    const double glucose = 110.0 * std::exp(0.3 * standard_normal(rng)) * (diabetes ? 1.4 : 1.0);
    const double sodium = 139.0 + 3.0 * standard_normal(rng);
    const double wbc = 8.0 * std::exp(0.35 * standard_normal(rng));
    const double platelet = 240.0 + 70.0 * standard_normal(rng);

    put("age", age);
    put("sex_male", male ? 1.0 : 0.0);
    if (missing()) r.tabular["bmi"] = Missing{};
    else put("bmi", bmi);
    {
      const double u = uniform01(rng);
      const char* race = u < 0.77 ? "white" : u < 0.92 ? "african_american" : u < 0.98 ? "hispanic" : "other";
      if (missing()) r.tabular["race"] = Missing{};
      else r.tabular["race"] = std::string(race);
      const double v = uniform01(rng);
      const char* ins = v < 0.46 ? "medicare" : v < 0.77 ? "private" : v < 0.93 ? "medicaid" : "uninsured";
      r.tabular["insurance"] = std::string(ins);
    }
    put("median_income", std::clamp(42000.0 + 9000.0 * standard_normal(rng), 10000.0, 150000.0));
    put("distance_km", 43.0 * std::exp(0.8 * standard_normal(rng)));
    put("charlson", charlson);
    put("emergency", emergency);
    put("chf", chf);
    put("diabetes", diabetes);
    put("ckd", ckd);
    put("med_betablocker", bernoulli(rng, chf ? 0.6 : 0.2));
    put("med_statin", bernoulli(rng, 0.3));
    put_lab(labs[0], creat);
    put_lab(labs[1], bun);
    put_lab(labs[2], hgb);
    put_lab(labs[3], glucose);
    put_lab(labs[4], sodium);
    put_lab(labs[5], wbc);
    put_lab(labs[6], platelet);
    const std::size_t surgeon = uniform_index(rng, surgeon_effect.size());
    r.tabular["surgeon"] = "S" + synth::two_digits(surgeon + 1);
    const std::size_t chapter = uniform_index(rng, chapter_effect.size());
    const std::size_t sub = uniform_index(rng, 10);
    const std::size_t leaf = uniform_index(rng, 10);
    r.tabular["procedure"] = std::string(synth::procedure_chapters()[chapter]) + "." + std::to_string(sub) +
                             std::to_string(leaf);

    const double z_age = (age - 57.0) / 17.0;
    const double z_charlson = (charlson - 2.0) / 2.0;
    const double z_creat = std::log(creat) / 0.4;
    const double z_bmi = (bmi - 29.0) / 6.0;
    const double z_hgb = (hgb - 12.5) / 2.0;
    const double z_glu = (std::log(glucose) - std::log(110.0)) / 0.3;
    const auto& ce = chapter_effect[chapter];
    d.pre_raw[0] = 0.5 * z_age + 0.8 * emergency + 0.4 * z_charlson + ce[0] + surgeon_effect[surgeon] + 0.3 * chf;
    d.pre_raw[1] = 0.6 * z_creat + 0.7 * chf + 0.4 * z_bmi + ce[1] + 0.5 * emergency;
    d.pre_raw[2] = 0.7 * z_age + 0.4 * diabetes - 0.4 * z_hgb + 0.3 * z_glu + 0.5 * ce[2];
    d.pre_raw[3] = 0.5 * z_age + 0.5 * z_charlson + 0.5 * emergency;

    for (auto& u : d.u) u = standard_normal(rng);

    // Intraoperative period.
    const double duration_min = std::round(45.0 + 135.0 * uniform01(rng));
    put("duration_min", duration_min);
    const double ebl = 200.0 * std::exp(0.9 * standard_normal(rng) + 0.3 * d.u[Latent::hypotension]);
    if (bernoulli(rng, 0.3)) r.tabular["estimated_blood_loss"] = Missing{};
    else put("estimated_blood_loss", std::round(ebl));
    const double urine = 300.0 * std::exp(0.6 * standard_normal(rng));
    if (bernoulli(rng, 0.3)) r.tabular["urine_output"] = Missing{};
    else put("urine_output", std::round(urine));
    put("night_surgery", (hour >= 19 || hour < 7) ? 1.0 : 0.0);

    if (!bernoulli(rng, cfg.no_channel_rate)) {
      const auto n_samples = static_cast<std::size_t>(duration_min * 60.0 / cfg.sample_interval_s);
      constexpr double theta = 0.2;
      for (const auto& spec : channels) {
        double mu = spec.base;
        for (int k = 0; k < kLatents; ++k) mu += spec.loading[static_cast<std::size_t>(k)] * d.u[static_cast<std::size_t>(k)];
        mu = std::clamp(mu, spec.range.lo, spec.range.hi);
        const double step_sd = spec.sd * std::sqrt(1.0 - (1.0 - theta) * (1.0 - theta));
        double x = std::clamp(mu + spec.sd * standard_normal(rng), spec.range.lo, spec.range.hi);
        TimeSeriesChannel ch{spec.name, {}};
        for (std::size_t s = 0; s < n_samples; ++s) {
          const double t = static_cast<double>(s) * cfg.sample_interval_s;
          x = std::clamp(x + theta * (mu - x) + step_sd * standard_normal(rng), spec.range.lo, spec.range.hi);
          double v = x;
          if (bernoulli(rng, cfg.spike_rate)) {
            const double mag = 10.0 * spec.sd;
            if (v + mag <= spec.range.hi) {
              v += mag;
              ++out.spikes_injected;
            } else if (v - mag >= spec.range.lo) {
              v -= mag;
              ++out.spikes_injected;
            }
          } else if (bernoulli(rng, cfg.out_of_range_rate)) {
            v = spec.range.hi + 0.5 * (spec.range.hi - spec.range.lo);
            ++out.out_of_range_injected;
          }
          ch.samples.push_back({t, synth::round_to(v, 0.01)});
          if (bernoulli(rng, cfg.duplicate_rate))
            ch.samples.push_back(
                {t, synth::round_to(std::clamp(x + 0.5 * spec.sd * standard_normal(rng), spec.range.lo, spec.range.hi),
                                    0.01)});
        }
        out.channel_samples += ch.samples.size();
        r.channels.push_back(std::move(ch));
      }
    }
  }

  // Latent risks, standardized over the cohort.
  std::array<std::vector<double>, 4> pre;
  std::array<std::vector<double>, 3> intra;
  for (auto& v : pre) v.resize(n);
  for (auto& v : intra) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = drafts[i].u;
    for (std::size_t o = 0; o < 4; ++o) pre[o][i] = drafts[i].pre_raw[o];
    intra[0][i] = u[Latent::hypotension] + u[Latent::tachycardia];
    intra[1][i] = 0.8 * u[Latent::respiratory] + 0.6 * u[Latent::hypotension];
    intra[2][i] = u[Latent::hypothermia] + u[Latent::depth];
  }
  for (auto& v : pre) synth::standardize(v);
  for (auto& v : intra) synth::standardize(v);

  std::array<std::vector<double>, 4> logit;
  for (std::size_t o = 0; o < 3; ++o) {
    const std::string name(kComplications[o]);
    logit[o].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      logit[o][i] = cfg.signal(cfg.preop_signal, name) * pre[o][i] + cfg.signal(cfg.intraop_signal, name) * intra[o][i];
    const double a = synth::calibrate_intercept(logit[o], cfg.prevalence.at(name));
    for (auto& x : logit[o]) x += a;
  }
  {
    std::vector<double> coupled(n);
    for (std::size_t i = 0; i < n; ++i) coupled[i] = (logit[0][i] + logit[1][i] + logit[2][i]) / 3.0;
    synth::standardize(coupled);
    std::vector<double> mixed(n);
    // Mortality carries no direct intraoperative term unless configured.
    const double direct_intra = cfg.signal(cfg.intraop_signal, "mortality");
    for (std::size_t i = 0; i < n; ++i)
      mixed[i] = cfg.mortality_coupling * coupled[i] + cfg.signal(cfg.preop_signal, "mortality") * pre[3][i] +
                 direct_intra * (intra[0][i] + intra[1][i] + intra[2][i]) / std::sqrt(3.0);
    const double a = synth::calibrate_intercept(mixed, cfg.prevalence.at("mortality"));
    logit[3] = mixed;
    for (auto& x : logit[3]) x += a;
  }

  std::vector<CaseRecord> cases;
  cases.reserve(n);
  std::array<std::size_t, 4> positives{};
  for (std::size_t i = 0; i < n; ++i) {
    Rng orng(derive_seed(cfg.seed, i, 0x0dcULL));
    CaseRecord rec = std::move(drafts[i].rec);
    for (std::size_t o = 0; o < 4; ++o) {
      const int y = bernoulli(orng, synth::logistic(logit[o][i])) ? 1 : 0;
      rec.outcomes[std::string(kOutcomes[o])] = y;
      positives[o] += static_cast<std::size_t>(y);
    }
    if (cfg.external_probs) {
      // Upstream models see preoperative information only.
      rec.external_probs["aki"] = synth::logistic(-2.0 + 0.8 * pre[1][i] + 0.5 * standard_normal(orng));
      rec.external_probs["sepsis"] = synth::logistic(-2.5 + 0.6 * pre[0][i] + 0.5 * standard_normal(orng));
    }
    cases.push_back(std::move(rec));
  }
  for (std::size_t o = 0; o < 4; ++o) {
    const std::string name(kOutcomes[o]);
    const double achieved = static_cast<double>(positives[o]) / static_cast<double>(n);
    out.achieved_prevalence[name] = achieved;
    const double target = cfg.prevalence.at(name);
    if (std::abs(achieved - target) > 0.02) {
      std::string msg = "achieved prevalence of " + name + " is " + format_double(achieved) + " (target " +
                        format_double(target) + ")";
      out.warnings.push_back(msg);
      warn(msg);
    }
  }
  out.cohort = CohortTable(std::move(cases));
  return out;
}

}  // namespace periop
