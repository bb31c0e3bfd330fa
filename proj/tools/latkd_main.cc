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

// latkd command line: preprocess, generate, experiment, k-sweep, benchmark,
// report. Failures print {"error": {...}} on stderr and exit nonzero.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latkd/errors.h"
#include "latkd/harness.h"
#include "latkd/io.h"

namespace {

using json = nlohmann::json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void PrintError(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << std::endl;
}

json LoadJsonFile(const std::string& path) {
  try {
    return json::parse(latkd::ReadFile(path));
  } catch (const json::exception& e) {
    throw latkd::Error(latkd::ErrorCode::kParse, path + ": " + e.what());
  }
}

struct ExperimentFlags {
  std::string config;
  std::string run_root;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> variants;
  std::string baseline;
  std::string run_id;
  std::optional<int> k;
  std::string frames_dir;
  bool quiet = false;
};

void AddExperimentFlags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("-c,--config", f.config, "experiment config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run-root", f.run_root, "run directory root (default $LATKD_RUN_ROOT)");
  cmd->add_option("--runs", f.runs, "seeded runs per variant");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--variants", f.variants, "variants to run")->delimiter(',');
  cmd->add_option("--baseline", f.baseline, "baseline variant for relative differences");
  cmd->add_option("--run-id", f.run_id, "run identifier");
  cmd->add_option("-K,--truncation-start", f.k, "first frame whose model teaches");
  cmd->add_option("--frames-dir", f.frames_dir, "frame set produced by preprocess/generate");
  cmd->add_flag("-q,--quiet", f.quiet, "no progress output");
}

latkd::ExperimentConfig ResolveConfig(const ExperimentFlags& f) {
  // Flags override file values; the merged document is validated once.
  latkd::ExperimentConfig file = latkd::ExperimentConfig::Load(f.config);
  json doc = file.ToJson();
  if (f.runs) doc["runs"] = *f.runs;
  if (f.seed) doc["seed"] = *f.seed;
  if (!f.variants.empty()) doc["variants"] = f.variants;
  if (!f.baseline.empty()) doc["baseline"] = f.baseline;
  if (!f.run_id.empty()) doc["run_id"] = f.run_id;
  if (f.k) doc["latkd"]["K"] = *f.k;
  if (!f.frames_dir.empty()) {
    doc["frames_dir"] = f.frames_dir;
    doc["scenario"] = nullptr;
  }
  return latkd::ExperimentConfig::FromJson(doc);
}

std::filesystem::path RunRoot(const std::string& flag) {
  return flag.empty() ? latkd::DefaultRunRoot() : std::filesystem::path(flag);
}

latkd::ExperimentOptions Options(bool quiet) {
  latkd::ExperimentOptions o;
  if (!quiet) o.log = &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latkd: label-augmented training with knowledge distillation"};
  app.require_subcommand(1);

  // preprocess
  std::string pp_input, pp_identity, pp_out, pp_config, pp_first_month;
  std::optional<int> pp_months, pp_delay;
  auto* pre = app.add_subcommand("preprocess", "slice a transaction CSV into monthly frames");
  pre->add_option("-i,--input", pp_input, "transaction CSV");
  pre->add_option("--identity", pp_identity, "identity CSV joined on TransactionID");
  pre->add_option("-o,--out", pp_out, "output directory")->required();
  pre->add_option("-c,--config", pp_config, "preprocess config JSON")->check(CLI::ExistingFile);
  pre->add_option("--first-month", pp_first_month, "first frame, YYYY-MM");
  pre->add_option("--months", pp_months, "number of monthly frames");
  pre->add_option("--label-delay-days", pp_delay, "labeling delay in days");

  // generate
  std::string gen_scenario, gen_out;
  std::optional<std::uint64_t> gen_testbed_seed;
  auto* gen = app.add_subcommand("generate", "write a synthetic drift stream");
  gen->add_option("-s,--scenario", gen_scenario, "scenario JSON")->check(CLI::ExistingFile);
  gen->add_option("--testbed-seed", gen_testbed_seed,
                  "use the built-in recurring-pattern scenario with this seed");
  gen->add_option("-o,--out", gen_out, "output directory")->required();

  ExperimentFlags exp_flags, ks_flags, bench_flags;
  auto* exp = app.add_subcommand("experiment", "train and evaluate all variants");
  AddExperimentFlags(exp, exp_flags);

  int ks_frame = 0;
  auto* ks = app.add_subcommand("k-sweep", "validation AUPRC for every K in [0, t]");
  AddExperimentFlags(ks, ks_flags);
  ks->add_option("-t,--frame", ks_frame, "training position t")->required();

  std::optional<int> bench_reps;
  std::string bench_variant;
  auto* bench = app.add_subcommand("benchmark", "cumulative vs LATKD training time per frame");
  AddExperimentFlags(bench, bench_flags);
  bench->add_option("--repetitions", bench_reps, "timed repetitions per frame");
  bench->add_option("--variant", bench_variant, "learner to time (MLP, XG, MLP-XG)");

  std::string rep_manifest, rep_run_id, rep_root;
  auto* rep = app.add_subcommand("report", "regenerate tables from a run manifest");
  rep->add_option("-m,--manifest", rep_manifest, "manifest.json path");
  rep->add_option("--run-id", rep_run_id, "run identifier under the run root");
  rep->add_option("--run-root", rep_root, "run directory root (default $LATKD_RUN_ROOT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*pre) {
      latkd::PreprocessConfig config;
      if (!pp_config.empty()) config = latkd::PreprocessConfig::FromJson(LoadJsonFile(pp_config));
      if (!pp_input.empty()) config.input = pp_input;
      if (!pp_identity.empty()) config.identity = pp_identity;
      if (!pp_first_month.empty()) config.first_month = pp_first_month;
      if (pp_months) config.months = *pp_months;
      if (pp_delay) config.label_delay_days = *pp_delay;
      if (config.input.empty()) {
        PrintError("usage", "preprocess needs --input or an input in --config");
        return kExitUsage;
      }
      latkd::PreprocessResult result = latkd::RunPreprocess(config, pp_out);
      for (const auto& w : result.warnings) {
        std::cerr << json{{"warning", w}}.dump() << std::endl;
      }
      std::cout << latkd::FormatFrameCounts(result.frames);
    } else if (*gen) {
      if (gen_scenario.empty() == !gen_testbed_seed.has_value()) {
        PrintError("usage", "generate needs exactly one of --scenario and --testbed-seed");
        return kExitUsage;
      }
      latkd::DriftScenario scenario =
          gen_testbed_seed ? latkd::RecurringPatternScenario(*gen_testbed_seed)
                           : latkd::DriftScenario::Load(gen_scenario);
      latkd::RunGenerate(scenario, gen_out);
      std::cout << latkd::FormatFrameCounts(
          latkd::ReadFrameSet(std::filesystem::path(gen_out) / "frames").descriptors);
    } else if (*exp) {
      latkd::ExperimentConfig config = ResolveConfig(exp_flags);
      latkd::ExperimentResult result =
          latkd::RunExperiment(config, RunRoot(exp_flags.run_root), Options(exp_flags.quiet));
      std::cout << result.reports.table1 << "\n" << result.reports.auprc << "\n"
                << result.reports.table2 << "\nrun: " << result.run_dir.string()
                << "\nmanifest hash: " << result.manifest_hash << std::endl;
    } else if (*ks) {
      latkd::ExperimentConfig config = ResolveConfig(ks_flags);
      latkd::KSweepResult result =
          latkd::RunKSweep(config, ks_frame, RunRoot(ks_flags.run_root), Options(ks_flags.quiet));
      std::cout << result.table;
    } else if (*bench) {
      latkd::ExperimentConfig config = ResolveConfig(bench_flags);
      if (bench_reps || !bench_variant.empty()) {
        json doc = config.ToJson();
        if (bench_reps) doc["benchmark"]["repetitions"] = *bench_reps;
        if (!bench_variant.empty()) doc["benchmark"]["variant"] = bench_variant;
        config = latkd::ExperimentConfig::FromJson(doc);
      }
      latkd::BenchmarkResult result = latkd::RunBenchmark(config, RunRoot(bench_flags.run_root),
                                                          Options(bench_flags.quiet));
      std::cout << result.table;
    } else if (*rep) {
      std::filesystem::path manifest = rep_manifest;
      if (manifest.empty()) {
        if (rep_run_id.empty()) {
          PrintError("usage", "report needs --manifest or --run-id");
          return kExitUsage;
        }
        manifest = RunRoot(rep_root) / "runs" / rep_run_id / "manifest.json";
      }
      latkd::Reports reports = latkd::BuildReports(latkd::RunManifest::Load(manifest));
      latkd::WriteReports(reports, manifest.parent_path() / "reports");
      std::cout << reports.table1 << "\n" << reports.auprc << "\n" << reports.table2;
    }
  } catch (const latkd::Error& e) {
    PrintError(latkd::ErrorCodeName(e.code()), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return kExitFailure;
  }
  return 0;
}
