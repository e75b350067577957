#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace periop;
using testutil::TempDir;

namespace {

const char* kThreeRows =
    "case_id,patient_id,admission_id,surgery_time,age,sex,ward,proc,estimated_blood_loss,icu_gt_48h,mortality\n"
    "S001,P1,A1,2015-01-02T08:00,64,1,surgical,45.13,200,1,0\n"
    "S002,P2,A2,2015-02-03T09:30,,0,__missing__,81.5,,0,\n"
    "S003,P3,A3,2016-03-04T10:15,41.5,0,\"medical, general\",,0,0,0\n";

CohortTable cohort_of(std::size_t n_patients, std::size_t cases_per_patient = 1) {
  std::vector<CaseRecord> cases;
  for (std::size_t p = 0; p < n_patients; ++p)
    for (std::size_t k = 0; k < cases_per_patient; ++k) {
      CaseRecord c;
      c.case_id = "C" + std::to_string(p) + "_" + std::to_string(k);
      c.patient_id = "P" + std::to_string(p);
      c.surgery_time = "2016-01-01T00:00";
      cases.push_back(c);
    }
  return CohortTable(cases);
}

void expect_partition(const CohortTable& cohort, const SplitPlan& plan) {
  std::set<std::string> covered;
  for (int f = 0; f < plan.n_folds; ++f)
    for (const auto& id : plan.fold_cases(f)) {
      EXPECT_TRUE(covered.insert(id).second) << id << " in two folds";
      EXPECT_FALSE(plan.is_holdout(id)) << id << " in a fold and the holdout";
    }
  for (const auto& c : cohort) {
    const bool in_fold = covered.count(c.case_id) > 0;
    EXPECT_NE(in_fold, plan.is_holdout(c.case_id)) << c.case_id;
  }
  // All cases of a patient share one partition.
  std::map<std::string, std::set<int>> parts;
  for (const auto& c : cohort) parts[c.patient_id].insert(plan.is_holdout(c.case_id) ? -1 : plan.fold_of(c.case_id));
  for (const auto& [p, s] : parts) EXPECT_EQ(s.size(), 1u) << p;
}

}  // namespace

TEST(Schema, RejectsDuplicateNamesAndBadRanges) {
  EXPECT_THROW(FeatureSchema({{"a", FeatureKind::continuous, Phase::preoperative, std::nullopt, {}},
                              {"a", FeatureKind::binary, Phase::preoperative, std::nullopt, {}}}),
               SchemaError);
  EXPECT_THROW(FeatureSchema({{"a", FeatureKind::continuous, Phase::preoperative, Range{5, 5}, {}}}), SchemaError);
  EXPECT_THROW(FeatureSchema({{"a", FeatureKind::nominal, Phase::preoperative, Range{0, 1}, {}}}), SchemaError);
  EXPECT_THROW(FeatureSchema({{"case_id", FeatureKind::binary, Phase::preoperative, std::nullopt, {}}}), SchemaError);
}

TEST(Schema, JsonRoundTrip) {
  TempDir dir("schema");
  const auto s = testutil::small_schema();
  save_schema(s, dir.file("schema.json"));
  const auto back = load_schema(dir.file("schema.json"));
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(s));
  EXPECT_EQ(back.count(Phase::preoperative), 4u);
  EXPECT_EQ(back.count(Phase::intraoperative), 2u);
}

TEST(LoadCohort, ThreeRows) {
  TempDir dir("cohort3");
  testutil::write(dir.file("c.csv"), kThreeRows);
  const auto cohort = load_cohort(dir.file("c.csv"), testutil::small_schema());
  ASSERT_EQ(cohort.size(), 3u);
  const auto& a = *cohort.find("S001");
  EXPECT_EQ(std::get<double>(a.tabular.at("age")), 64.0);
  EXPECT_EQ(std::get<std::string>(a.tabular.at("proc")), "45.13");
  EXPECT_EQ(a.outcome("icu_gt_48h"), 1);
  const auto& b = *cohort.find("S002");
  EXPECT_TRUE(std::holds_alternative<Missing>(b.tabular.at("age")));
  EXPECT_TRUE(std::holds_alternative<Missing>(b.tabular.at("ward")));
  EXPECT_FALSE(b.outcome("mortality").has_value());
  EXPECT_EQ(std::get<std::string>(cohort.find("S003")->tabular.at("ward")), "medical, general");
}

TEST(LoadCohort, DuplicateCaseIdNamesTheId) {
  TempDir dir("dup");
  testutil::write(dir.file("c.csv"),
                  "case_id,patient_id,age\n"
                  "S001,P1,50\n"
                  "S001,P2,60\n");
  try {
    load_cohort(dir.file("c.csv"), testutil::small_schema());
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("S001"), std::string::npos);
  }
}

TEST(LoadCohort, UnknownColumnIsSchemaError) {
  TempDir dir("unknown");
  testutil::write(dir.file("c.csv"), "case_id,patient_id,height\nS1,P1,170\n");
  EXPECT_THROW(load_cohort(dir.file("c.csv"), testutil::small_schema()), SchemaError);
}

TEST(LoadCohort, MalformedRowReportsLine) {
  TempDir dir("malformed");
  testutil::write(dir.file("c.csv"), "case_id,patient_id,age\nS1,P1,50\nS2,P2,abc\n");
  try {
    load_cohort(dir.file("c.csv"), testutil::small_schema());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadCohort, KeepsEarliestSurgeryOfAdmission) {
  TempDir dir("repeat");
  testutil::write(dir.file("c.csv"),
                  "case_id,patient_id,admission_id,surgery_time,age\n"
                  "S2,P1,A1,2016-05-02T10:00,70\n"
                  "S1,P1,A1,2016-05-01T09:00,70\n"
                  "S3,P1,A2,2016-09-01T09:00,70\n");
  const auto cohort = load_cohort(dir.file("c.csv"), testutil::small_schema());
  ASSERT_EQ(cohort.size(), 2u);
  EXPECT_NE(cohort.find("S1"), nullptr);
  EXPECT_EQ(cohort.find("S2"), nullptr);
  EXPECT_NE(cohort.find("S3"), nullptr);
  ASSERT_EQ(cohort.diagnostics().size(), 1u);
  EXPECT_NE(cohort.diagnostics()[0].find("S2"), std::string::npos);
}

TEST(LoadCohort, ChannelSidecar) {
  TempDir dir("channels");
  testutil::write(dir.file("c.csv"), "case_id,patient_id,age\nS1,P1,50\nS2,P2,60\n");
  testutil::write(dir.file("ch.csv"),
                  "case_id,channel,time_s,value\n"
                  "S1,hr,0,70\nS1,hr,60,72\nS2,hr,0,90\n");
  const auto cohort = load_cohort(dir.file("c.csv"), testutil::small_schema(), dir.file("ch.csv"));
  ASSERT_NE(cohort.find("S1")->channel("hr"), nullptr);
  EXPECT_EQ(cohort.find("S1")->channel("hr")->samples.size(), 2u);
  EXPECT_TRUE(cohort.find("S2")->has_intraop_channels());

  testutil::write(dir.file("bad.csv"), "case_id,channel,time_s,value\nS9,hr,0,70\n");
  EXPECT_THROW(load_cohort(dir.file("c.csv"), testutil::small_schema(), dir.file("bad.csv")), IntegrityError);
}

TEST(LoadCohort, SaveLoadRoundTripIsByteStable) {
  TempDir dir("roundtrip");
  testutil::write(dir.file("c.csv"), kThreeRows);
  const auto schema = testutil::small_schema();
  const auto a = load_cohort(dir.file("c.csv"), schema);
  save_cohort(a, schema, dir.file("out1.csv"));
  const auto b = load_cohort(dir.file("out1.csv"), schema);
  save_cohort(b, schema, dir.file("out2.csv"));
  EXPECT_EQ(testutil::slurp(dir.file("out1.csv")), testutil::slurp(dir.file("out2.csv")));
  ASSERT_EQ(b.size(), a.size());
  for (const auto& c : a) {
    const auto* d = b.find(c.case_id);
    ASSERT_NE(d, nullptr);
    EXPECT_EQ(d->outcomes, c.outcomes);
    EXPECT_EQ(d->surgery_time, c.surgery_time);
  }
}

TEST(Split, TenSinglesFiveFolds) {
  const auto cohort = cohort_of(10);
  const auto plan = make_split(cohort, 5, 0.0, 3);
  for (int f = 0; f < 5; ++f) EXPECT_EQ(plan.fold_cases(f).size(), 2u);
  EXPECT_TRUE(plan.holdout.empty());
  expect_partition(cohort, plan);
}

TEST(Split, Deterministic) {
  const auto cohort = cohort_of(37, 2);
  EXPECT_EQ(make_split(cohort, 5, 0.3, 11), make_split(cohort, 5, 0.3, 11));
  EXPECT_NE(make_split(cohort, 5, 0.3, 11), make_split(cohort, 5, 0.3, 12));
}

TEST(Split, HundredCasesTwentyPercentHoldout) {
  const auto cohort = cohort_of(100);
  const auto plan = make_split(cohort, 5, 0.2, 1);
  EXPECT_EQ(plan.holdout.size(), 20u);
  EXPECT_EQ(plan.fold_assignment.size(), 80u);
  expect_partition(cohort, plan);
}

TEST(Split, PartitionPropertyOverRandomCohorts) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CaseRecord> cases;
    const std::size_t patients = 20 + uniform_index(rng, 60);
    for (std::size_t p = 0; p < patients; ++p) {
      const std::size_t k = 1 + uniform_index(rng, 3);
      for (std::size_t j = 0; j < k; ++j) {
        CaseRecord c;
        c.case_id = "T" + std::to_string(trial) + "_" + std::to_string(p) + "_" + std::to_string(j);
        c.patient_id = "P" + std::to_string(p);
        c.surgery_time = "2017-0" + std::to_string(1 + uniform_index(rng, 9)) + "-01";
        cases.push_back(c);
      }
    }
    const CohortTable cohort(cases);
    const auto plan = make_split(cohort, 5, uniform01(rng) * 0.3, trial);
    expect_partition(cohort, plan);
    const auto dated = make_split_by_date(cohort, "2017-08", 5, trial);
    expect_partition(cohort, dated);
  }
}

TEST(Split, TooFewGroupsIsSizingError) {
  EXPECT_THROW(make_split(cohort_of(4), 5), SizingError);
  EXPECT_THROW(make_split(cohort_of(4), 1), SizingError);
}

TEST(Split, DateCutoffUsesFirstSurgery) {
  std::vector<CaseRecord> cases;
  auto add = [&](std::string id, std::string pid, std::string t) {
    CaseRecord c;
    c.case_id = std::move(id);
    c.patient_id = std::move(pid);
    c.surgery_time = std::move(t);
    cases.push_back(c);
  };
  for (int i = 0; i < 6; ++i) add("E" + std::to_string(i), "PE" + std::to_string(i), "2017-01-01");
  add("L1", "PL", "2018-06-01");
  add("X1", "PX", "2017-12-01");
  add("X2", "PX", "2018-05-01");  // later surgery of an early patient stays in development
  const CohortTable cohort(cases);
  const auto plan = make_split_by_date(cohort, "2018-03-01", 2, 0);
  EXPECT_EQ(plan.holdout, (std::set<std::string>{"L1"}));
  EXPECT_EQ(plan.fold_of("X1"), plan.fold_of("X2"));
}
