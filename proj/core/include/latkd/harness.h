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

#ifndef LATKD_HARNESS_H_
#define LATKD_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/data.h"
#include "latkd/distill.h"
#include "latkd/driftgen.h"
#include "latkd/eval.h"
#include "latkd/registry.h"

namespace latkd {

// Environment variable naming the default run-directory root.
inline constexpr char kRunRootEnv[] = "LATKD_RUN_ROOT";

// $LATKD_RUN_ROOT when set, else ./latkd-runs.
std::filesystem::path DefaultRunRoot();

// ---------------------------------------------------------------------------
// Frame sets on disk: frames.json, schema.json and one DesignMatrix per frame.

struct FrameDescriptor {
  int index = 0;
  std::string start;  // YYYY-MM-DD, inclusive
  std::string end;    // exclusive
  std::string file;   // relative to the frame-set directory
  std::size_t normal = 0;
  std::size_t anomalous = 0;
  std::size_t unlabeled = 0;

  nlohmann::json ToJson() const;
  static FrameDescriptor FromJson(const nlohmann::json& doc);
};

struct FrameSet {
  std::vector<DesignMatrix> frames;
  std::vector<FrameDescriptor> descriptors;
};

void WriteFrameSet(const std::filesystem::path& dir, const std::vector<DesignMatrix>& frames,
                   std::span<const TimeFrame> schedule, const FeatureSchema& schema);
FrameSet ReadFrameSet(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessConfig {
  std::filesystem::path input;
  std::optional<std::filesystem::path> identity;  // joined on join_key
  std::string join_key = "TransactionID";
  LoadOptions load;
  std::vector<ColumnSpec> columns = IeeeCisColumnSpecs();
  std::string first_month = "2017-11";
  int months = 6;
  int label_delay_days = 30;
  int fit_frame = 0;  // frame whose rows fit the vocabularies

  nlohmann::json ToJson() const;
  // Missing keys keep their defaults.
  static PreprocessConfig FromJson(const nlohmann::json& doc);
};

struct PreprocessResult {
  std::vector<FrameDescriptor> frames;
  std::size_t dropped_rows = 0;
  std::vector<std::string> warnings;
};

PreprocessResult RunPreprocess(const PreprocessConfig& config,
                               const std::filesystem::path& out_dir);

// Per-frame and cumulative class counts.
std::string FormatFrameCounts(const std::vector<FrameDescriptor>& frames);

// ---------------------------------------------------------------------------
// generate

// Writes data.csv, scenario.json, and a frame set for the scenario.
GeneratedStream RunGenerate(const DriftScenario& scenario, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Experiments

enum class Strategy { kCumulative, kWindow, kLatkd };

// "MLP", "XG", "MLP-XG", optionally suffixed by "-WINDOW" (latest frame only,
// no teachers) or "-LATKD".
struct VariantSpec {
  std::string name;
  ModelKind learner = ModelKind::kMlp;
  Strategy strategy = Strategy::kCumulative;

  static VariantSpec Parse(const std::string& name);
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> frames_dir;
  std::optional<DriftScenario> scenario;
  // Positions in the frame set; defaults: all but the last / the last.
  std::vector<int> train_frames;
  std::vector<int> test_frames;
  std::vector<std::string> variants = {"MLP", "XG", "MLP-XG", "MLP-XG-LATKD"};
  std::string baseline = "MLP";
  int runs = 10;
  std::uint64_t seed = 0;
  int truncation_start = 0;
  double kl_weight = 1.0;
  double temperature = 1.0;
  // Unset: ensemble_chain for MLP-XG-LATKD, same_learner otherwise.
  std::optional<TeacherSource> teacher_source;
  MlpArchitecture mlp_architecture;
  MlpTrainOptions mlp;
  GbtConfig gbt;
  std::string run_id;  // empty: derived from the config hash
  std::string benchmark_variant = "MLP";
  int benchmark_repetitions = 10;
  std::string ksweep_variant;  // empty: first LATKD variant, else MLP-LATKD

  void Validate() const;
  nlohmann::json ToJson() const;
  static ExperimentConfig FromJson(const nlohmann::json& doc);
  static ExperimentConfig Load(const std::filesystem::path& path);
  std::string Hash() const;
  std::string ResolvedRunId() const;
  LatkdConfig LatkdFor(const VariantSpec& variant, std::uint64_t seed) const;
};

FrameSet LoadFrames(const ExperimentConfig& config);

struct ExperimentOptions {
  std::ostream* log = nullptr;
  // Stop after committing this many manifest entries (crash simulation).
  std::optional<std::size_t> stop_after_entries;
};

struct Reports {
  std::string table1;  // periods, frames and cumulative class counts
  std::string table2;  // relative AUPRC difference against the baseline
  std::string auprc;   // mean +- sd AUPRC per variant and period
  nlohmann::json json;
};

struct ExperimentResult {
  std::filesystem::path run_dir;
  std::string manifest_hash;
  bool completed = false;
  Reports reports;
};

ExperimentResult RunExperiment(const ExperimentConfig& config,
                               const std::filesystem::path& run_root,
                               const ExperimentOptions& options = {});

// Pure function of the manifest.
Reports BuildReports(const RunManifest& manifest);
void WriteReports(const Reports& reports, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// k-sweep

struct KSweepRow {
  int truncation_start = 0;
  std::size_t teachers = 0;
  double auprc = 0.0;
  std::string model_hash;
};

struct KSweepResult {
  std::string variant;
  int frame = 0;
  std::vector<KSweepRow> rows;
  int best_truncation_start = 0;  // highest AUPRC, lowest K on ties
  std::string table;
  nlohmann::json json;
};

// Trains one model per K in [0, t] on training position t, teachers from a
// chain over positions 0..t-1, evaluated on the test frames.
KSweepResult RunKSweep(const ExperimentConfig& config, int t,
                       const std::filesystem::path& run_root,
                       const ExperimentOptions& options = {});

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkRow {
  int frame = 0;
  std::size_t baseline_rows = 0;
  std::size_t latkd_rows = 0;
  std::vector<double> baseline_seconds;  // one per repetition
  std::vector<double> latkd_seconds;
  double baseline_mean = 0.0;
  double baseline_sd = 0.0;
  double latkd_mean = 0.0;
  double latkd_sd = 0.0;
  double ratio = 0.0;  // baseline mean / LATKD mean
};

struct BenchmarkResult {
  std::string variant;
  std::vector<BenchmarkRow> rows;
  std::string table;
  std::string csv;
  nlohmann::json json;
};

// Times the train call of cumulative training against per-frame LATKD
// training over all training positions, serially.
BenchmarkResult RunBenchmark(const ExperimentConfig& config,
                             const std::filesystem::path& run_root,
                             const ExperimentOptions& options = {});

}  // namespace latkd

#endif  // LATKD_HARNESS_H_
