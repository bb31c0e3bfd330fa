// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "latkd/harness.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "latkd/errors.h"
#include "latkd/io.h"
#include "test_util.h"

namespace latkd {
namespace {

// Four small frames: positions 0..2 train, 3 tests.
ExperimentConfig SmallExperiment(std::vector<std::string> variants = {"XG", "XG-LATKD"}) {
  ExperimentConfig c;
  c.scenario = RecurringPatternScenario(1, 4, 300, 1, 3);
  c.variants = std::move(variants);
  c.baseline = c.variants.front();
  c.runs = 2;
  c.seed = 5;
  c.gbt.n_estimators = 5;
  c.benchmark_variant = "XG";
  c.benchmark_repetitions = 2;
  return c;
}

TEST(VariantSpecTest, ParsesLearnerAndStrategy) {
  VariantSpec v = VariantSpec::Parse("MLP-XG-LATKD");
  EXPECT_EQ(v.learner, ModelKind::kEnsemble);
  EXPECT_EQ(v.strategy, Strategy::kLatkd);
  EXPECT_EQ(VariantSpec::Parse("XG").strategy, Strategy::kCumulative);
  EXPECT_EQ(VariantSpec::Parse("MLP-WINDOW").strategy, Strategy::kWindow);
  EXPECT_THROW(VariantSpec::Parse("SVM"), Error);
  EXPECT_THROW(VariantSpec::Parse("XG-LATKD-LATKD"), Error);
}

TEST(ExperimentConfigTest, JsonRoundTripAndTeacherDefaults) {
  ExperimentConfig c = SmallExperiment();
  c.truncation_start = 1;
  c.kl_weight = 0.5;
  ExperimentConfig back = ExperimentConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.Hash(), c.Hash());
  EXPECT_EQ(back.ResolvedRunId(), c.ResolvedRunId());
  EXPECT_EQ(c.LatkdFor(VariantSpec::Parse("MLP-XG-LATKD"), 1).teacher_source,
            TeacherSource::kEnsembleChain);
  EXPECT_EQ(c.LatkdFor(VariantSpec::Parse("XG-LATKD"), 1).teacher_source,
            TeacherSource::kSameLearner);
  EXPECT_EQ(c.LatkdFor(VariantSpec::Parse("XG-LATKD"), 1).truncation_start, 1);
  c.baseline = "MLP";
  EXPECT_THROW(c.Validate(), Error);
  c = SmallExperiment();
  c.frames_dir = "/nowhere";
  EXPECT_THROW(c.Validate(), Error);
}

TEST(RunRootTest, EnvironmentOverridesDefault) {
  ::setenv(kRunRootEnv, "/tmp/somewhere", 1);
  EXPECT_EQ(DefaultRunRoot(), std::filesystem::path("/tmp/somewhere"));
  ::unsetenv(kRunRootEnv);
  EXPECT_EQ(DefaultRunRoot(), std::filesystem::path("latkd-runs"));
}

TEST(ExperimentTest, TwoVariantsGiveOneDiffColumn) {
  testing::TempDir root;
  ExperimentResult r = RunExperiment(SmallExperiment(), root.path());
  ASSERT_TRUE(r.completed);
  const auto& diff = r.reports.json.at("relative_diff_percent");
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff.at("XG-LATKD").size(), 3u);
  EXPECT_NE(r.reports.table2.find("%"), std::string::npos);
  EXPECT_EQ(r.reports.json.at("periods").size(), 3u);
  // 2 variants x 2 runs x 3 periods.
  RunManifest m = RunManifest::Load(r.run_dir / "manifest.json");
  EXPECT_EQ(m.frames.size(), 12u);
  for (const auto& f : m.frames) {
    if (f.variant == "XG-LATKD") {
      EXPECT_EQ(f.window, std::to_string(f.index) + ".." + std::to_string(f.index));
    } else {
      EXPECT_EQ(f.window, "0.." + std::to_string(f.index));
    }
  }
  EXPECT_TRUE(std::filesystem::exists(r.run_dir / "reports/table1.txt"));
}

TEST(ExperimentTest, SingleVariantDegeneratesToMeans) {
  testing::TempDir root;
  ExperimentConfig c = SmallExperiment({"XG-WINDOW"});
  c.runs = 1;
  ExperimentResult r = RunExperiment(c, root.path());
  EXPECT_EQ(r.reports.table2, r.reports.auprc);
  EXPECT_TRUE(r.reports.json.at("relative_diff_percent").empty());
}

TEST(ExperimentTest, RerunsHashEqualAndReportsRegenerateExactly) {
  testing::TempDir a;
  testing::TempDir b;
  ExperimentConfig c = SmallExperiment();
  ExperimentResult first = RunExperiment(c, a.path());
  ExperimentResult second = RunExperiment(c, b.path());
  EXPECT_EQ(first.manifest_hash, second.manifest_hash);
  EXPECT_EQ(first.reports.table2, second.reports.table2);

  // Running again over a finished run only re-reads it.
  ExperimentResult again = RunExperiment(c, a.path());
  EXPECT_EQ(again.manifest_hash, first.manifest_hash);

  Reports rebuilt = BuildReports(RunManifest::Load(first.run_dir / "manifest.json"));
  EXPECT_EQ(rebuilt.table1, first.reports.table1);
  EXPECT_EQ(rebuilt.table2, first.reports.table2);
  EXPECT_EQ(rebuilt.auprc, first.reports.auprc);
  EXPECT_EQ(rebuilt.json.dump(), first.reports.json.dump());
  testing::TempDir out;
  WriteReports(rebuilt, out.path());
  EXPECT_EQ(ReadFile(out / "table2.txt"), ReadFile(first.run_dir / "reports/table2.txt"));
  EXPECT_EQ(ReadFile(out / "report.json"), ReadFile(first.run_dir / "reports/report.json"));
}

TEST(ExperimentTest, InterruptedRunResumesToSameHash) {
  testing::TempDir a;
  testing::TempDir b;
  ExperimentConfig c = SmallExperiment();
  const std::string full = RunExperiment(c, a.path()).manifest_hash;
  ExperimentOptions o;
  for (std::size_t stop : {4u, 5u}) {
    o.stop_after_entries = stop;
    ExperimentResult partial = RunExperiment(c, b.path(), o);
    EXPECT_FALSE(partial.completed);
  }
  ExperimentResult resumed = RunExperiment(c, b.path());
  EXPECT_TRUE(resumed.completed);
  EXPECT_EQ(resumed.manifest_hash, full);
}

TEST(KSweepTest, FirstFrameHasOneRow) {
  testing::TempDir root;
  KSweepResult r = RunKSweep(SmallExperiment(), 0, root.path());
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].teachers, 0u);
  EXPECT_EQ(r.variant, "XG-LATKD");
  EXPECT_THROW(RunKSweep(SmallExperiment(), 3, root.path()), Error);
}

TEST(KSweepTest, KEqualsTIsTheWindowBaseline) {
  testing::TempDir root;
  ExperimentConfig c = SmallExperiment();
  KSweepResult r = RunKSweep(c, 2, root.path());
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].teachers, 2u);
  EXPECT_EQ(r.rows[1].teachers, 1u);
  EXPECT_EQ(r.rows[2].teachers, 0u);
  FrameSet set = LoadFrames(c);
  const LatkdConfig latkd = c.LatkdFor(VariantSpec::Parse("XG-LATKD"), c.seed);
  EXPECT_EQ(r.rows[2].model_hash,
            TrainLearner(set.frames[2], std::vector<ProbMatrix>{}, latkd).primary->ContentHash());
  double best = 0;
  for (const auto& row : r.rows) best = std::max(best, row.auprc);
  EXPECT_EQ(r.rows[static_cast<std::size_t>(r.best_truncation_start)].auprc, best);
  EXPECT_TRUE(std::filesystem::exists(root / ("runs/" + c.ResolvedRunId() + "-ksweep/ksweep_t2.json")));
}

TEST(BenchmarkTest, RowsAndRatios) {
  testing::TempDir root;
  ExperimentConfig c = SmallExperiment();
  BenchmarkResult r = RunBenchmark(c, root.path());
  ASSERT_EQ(r.rows.size(), 3u);
  FrameSet set = LoadFrames(c);
  std::size_t cumulative = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    cumulative += set.frames[t].rows();
    EXPECT_EQ(r.rows[t].baseline_rows, cumulative);
    EXPECT_EQ(r.rows[t].latkd_rows, set.frames[t].rows());
    EXPECT_EQ(r.rows[t].baseline_seconds.size(), 2u);
    EXPECT_NEAR(r.rows[t].ratio, r.rows[t].baseline_mean / r.rows[t].latkd_mean, 1e-12);
  }
  EXPECT_FALSE(std::filesystem::exists(root / "scratch" / (c.ResolvedRunId() + "-benchmark")));
  EXPECT_TRUE(std::filesystem::exists(root / ("runs/" + c.ResolvedRunId() + "-benchmark/benchmark.csv")));
}

TEST(PreprocessTest, SmallCsvToFrames) {
  testing::TempDir dir;
  const double day = 86400;
  std::ofstream csv(dir / "train.csv");
  csv << "TransactionID,TransactionDT,isFraud,TransactionAmt,ProductCD\n";
  // Nov: 3 rows, Dec: none, Jan: 2 rows, one row past the schedule.
  csv << "1," << 1 * day << ",0,10,W\n";
  csv << "2," << 2 * day << ",1,99,C\n";
  csv << "3," << 3 * day << ",0,,W\n";
  csv << "4," << 62 * day << ",0,5,H\n";
  csv << "5," << 63 * day << ",1,7,W\n";
  csv << "6," << 200 * day << ",0,7,W\n";
  csv.close();
  std::ofstream id(dir / "identity.csv");
  id << "TransactionID,DeviceType\n2,mobile\n";
  id.close();

  PreprocessConfig c;
  c.input = dir / "train.csv";
  c.identity = dir / "identity.csv";
  c.months = 3;
  ColumnSpec amt;
  amt.name = "TransactionAmt";
  amt.transform = ColumnTransform::kLog10p;
  ColumnSpec product;
  product.name = "ProductCD";
  product.kind = ColumnKind::kCategorical;
  ColumnSpec device;
  device.name = "DeviceType";
  device.kind = ColumnKind::kCategorical;
  c.columns = {amt, product, device};
  EXPECT_EQ(PreprocessConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());

  PreprocessResult r = RunPreprocess(c, dir / "frames");
  ASSERT_EQ(r.frames.size(), 3u);
  EXPECT_EQ(r.frames[0].normal, 2u);
  EXPECT_EQ(r.frames[0].anomalous, 1u);
  EXPECT_EQ(r.frames[1].normal + r.frames[1].anomalous, 0u);
  EXPECT_EQ(r.frames[2].anomalous, 1u);
  EXPECT_EQ(r.dropped_rows, 1u);
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_EQ(r.frames[0].start, "2017-11-01");

  FrameSet set = ReadFrameSet(dir / "frames");
  ASSERT_EQ(set.frames.size(), 3u);
  // amt | ProductCD [W, C] | DeviceType [mobile, NA]
  EXPECT_EQ(set.frames[0].cols(), 5u);
  EXPECT_DOUBLE_EQ(set.frames[0].features(1, 0), 2.0);
  EXPECT_EQ(set.frames[0].features(2, 0), kMissingMarker);
  EXPECT_EQ(set.frames[0].features(1, 3), 1.0);
  EXPECT_EQ(set.frames[0].features(0, 4), 1.0);
  EXPECT_NE(FormatFrameCounts(r.frames).find("Nov-17"), std::string::npos);
}

TEST(FrameSetTest, TamperedSchemaIsDetected) {
  testing::TempDir dir;
  ExperimentConfig c = SmallExperiment();
  RunGenerate(*c.scenario, dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "data.csv"));
  FrameSet set = ReadFrameSet(dir / "frames");
  EXPECT_EQ(set.frames.size(), 4u);
  DriftScenario back = DriftScenario::Load(dir / "scenario.json");
  EXPECT_EQ(back.ToJson(), c.scenario->ToJson());
  std::string schema = ReadFile(dir / "frames/schema.json");
  schema.replace(schema.find("\"f0\""), 4, "\"g0\"");
  WriteFileAtomic(dir / "frames/schema.json", schema);
  EXPECT_THROW(ReadFrameSet(dir / "frames"), Error);
}

}  // namespace
}  // namespace latkd
