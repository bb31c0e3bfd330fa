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

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "latkd/errors.h"
#include "latkd/hash.h"
#include "latkd/io.h"

namespace latkd {
namespace {

using json = nlohmann::json;

constexpr char kFramesIndex[] = "frames.json";
constexpr char kSchemaFile[] = "schema.json";

std::string Fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

// Left-aligned first column, right-aligned others.
std::string FormatTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c > 0) out += "  ";
      out += c == 0 ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string MonthLabel(const std::string& iso_date) {
  static const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  if (iso_date.size() < 7) return iso_date;
  int month = std::stoi(iso_date.substr(5, 2));
  if (month < 1 || month > 12) return iso_date;
  return std::string(kMonths[month - 1]) + "-" + iso_date.substr(2, 2);
}

std::string JoinMonths(const std::vector<FrameDescriptor>& frames,
                       const std::vector<int>& positions) {
  std::string out;
  for (int p : positions) {
    if (!out.empty()) out += " + ";
    out += MonthLabel(frames.at(static_cast<std::size_t>(p)).start);
  }
  return out;
}

void Log(const ExperimentOptions& options, const std::string& message) {
  if (options.log != nullptr) *options.log << message << std::endl;
}

void WriteJson(const std::filesystem::path& path, const json& doc) {
  WriteFileAtomic(path, doc.dump(2) + "\n");
}

json ParseJsonFile(const std::filesystem::path& path) {
  try {
    return json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

struct Positions {
  std::vector<int> train;
  std::vector<int> test;
};

Positions ResolvePositions(const ExperimentConfig& config, std::size_t frame_count) {
  Positions p{config.train_frames, config.test_frames};
  const int n = static_cast<int>(frame_count);
  if (p.train.empty() && p.test.empty()) {
    if (n < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "need at least two frames to default the train/test split");
    }
    for (int i = 0; i + 1 < n; ++i) p.train.push_back(i);
    p.test.push_back(n - 1);
  }
  if (p.train.empty() || p.test.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "train_frames and test_frames must both be set");
  }
  for (int i : p.train) {
    if (i < 0 || i >= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "train frame " + std::to_string(i) + " outside 0.." + std::to_string(n - 1));
    }
  }
  for (int i : p.test) {
    if (i < 0 || i >= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "test frame " + std::to_string(i) + " outside 0.." + std::to_string(n - 1));
    }
  }
  return p;
}

std::vector<DesignMatrix> Select(const FrameSet& set, const std::vector<int>& positions) {
  std::vector<DesignMatrix> out;
  for (int p : positions) out.push_back(set.frames.at(static_cast<std::size_t>(p)));
  return out;
}

std::string PositionWindow(int first, int last) {
  return std::to_string(first) + ".." + std::to_string(last);
}

double TestAuprc(const Model& model, const DesignMatrix& test) {
  return Auprc(PositiveScores(model.Predict(test.features)), test.labels);
}

const FrameEntry* FindEntry(const RunManifest& manifest, const std::string& variant,
                            std::uint64_t seed, int index) {
  for (const auto& f : manifest.frames) {
    if (f.variant == variant && f.seed == seed && f.index == index) return &f;
  }
  return nullptr;
}

}  // namespace

std::filesystem::path DefaultRunRoot() {
  const char* root = std::getenv(kRunRootEnv);
  if (root != nullptr && *root != '\0') return root;
  return "latkd-runs";
}

json FrameDescriptor::ToJson() const {
  return {{"index", index},          {"start", start},         {"end", end},
          {"file", file},            {"normal", normal},       {"anomalous", anomalous},
          {"unlabeled", unlabeled}};
}

FrameDescriptor FrameDescriptor::FromJson(const json& doc) {
  FrameDescriptor d;
  d.index = doc.at("index").get<int>();
  d.start = doc.at("start").get<std::string>();
  d.end = doc.at("end").get<std::string>();
  d.file = doc.value("file", std::string());
  d.normal = doc.value("normal", std::size_t{0});
  d.anomalous = doc.value("anomalous", std::size_t{0});
  d.unlabeled = doc.value("unlabeled", std::size_t{0});
  return d;
}

namespace {

std::vector<FrameDescriptor> Describe(const std::vector<DesignMatrix>& frames,
                                      std::span<const TimeFrame> schedule) {
  if (frames.size() != schedule.size()) {
    throw Error(ErrorCode::kInvalidArgument, "frame count does not match the schedule");
  }
  std::vector<FrameDescriptor> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    FrameDescriptor d;
    d.index = static_cast<int>(i);
    d.start = FormatDate(schedule[i].start);
    d.end = FormatDate(schedule[i].end);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.ldm", i);
    d.file = name;
    ClassCounts c = frames[i].CountClasses();
    d.normal = c.normal;
    d.anomalous = c.anomalous;
    d.unlabeled = c.unlabeled;
    out.push_back(d);
  }
  return out;
}

}  // namespace

void WriteFrameSet(const std::filesystem::path& dir, const std::vector<DesignMatrix>& frames,
                   std::span<const TimeFrame> schedule, const FeatureSchema& schema) {
  std::filesystem::create_directories(dir);
  std::vector<FrameDescriptor> described = Describe(frames, schedule);
  json index = {{"version", 1},
                {"schema_fingerprint", schema.fingerprint()},
                {"frames", json::array()}};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i].Save(dir / described[i].file);
    index["frames"].push_back(described[i].ToJson());
  }
  WriteJson(dir / kSchemaFile, schema.ToJson());
  WriteJson(dir / kFramesIndex, index);
}

FrameSet ReadFrameSet(const std::filesystem::path& dir) {
  const json index = ParseJsonFile(dir / kFramesIndex);
  FrameSet set;
  const std::string fingerprint = index.value("schema_fingerprint", std::string());
  if (std::filesystem::exists(dir / kSchemaFile)) {
    // FromJson rejects a schema whose contents no longer match its fingerprint.
    const FeatureSchema schema = FeatureSchema::FromJson(ParseJsonFile(dir / kSchemaFile));
    if (!fingerprint.empty() && schema.fingerprint() != fingerprint) {
      throw Error(ErrorCode::kIntegrity,
                  (dir / kSchemaFile).string() + ": fingerprint differs from frame set");
    }
  }
  for (const auto& doc : index.at("frames")) {
    FrameDescriptor d = FrameDescriptor::FromJson(doc);
    DesignMatrix m = DesignMatrix::Load(dir / d.file);
    if (!fingerprint.empty() && m.schema_fingerprint != fingerprint) {
      throw Error(ErrorCode::kIntegrity,
                  (dir / d.file).string() + ": schema fingerprint differs from frame set");
    }
    set.frames.push_back(std::move(m));
    set.descriptors.push_back(std::move(d));
  }
  return set;
}

json PreprocessConfig::ToJson() const {
  json columns_json = json::array();
  for (const auto& c : columns) columns_json.push_back(ColumnSpecToJson(c));
  json doc = {{"input", input.string()},
              {"join_key", join_key},
              {"timestamp_column", load.timestamp_column},
              {"columns", columns_json},
              {"first_month", first_month},
              {"months", months},
              {"label_delay_days", label_delay_days},
              {"fit_frame", fit_frame}};
  doc["label_column"] = load.label_column ? json(*load.label_column) : json(nullptr);
  if (identity) doc["identity"] = identity->string();
  return doc;
}

PreprocessConfig PreprocessConfig::FromJson(const json& doc) {
  PreprocessConfig c;
  try {
    if (doc.contains("input")) c.input = doc.at("input").get<std::string>();
    if (doc.contains("identity") && !doc.at("identity").is_null()) {
      c.identity = doc.at("identity").get<std::string>();
    }
    c.join_key = doc.value("join_key", c.join_key);
    c.load.timestamp_column = doc.value("timestamp_column", c.load.timestamp_column);
    if (doc.contains("label_column")) {
      const json& l = doc.at("label_column");
      c.load.label_column = l.is_null() ? std::nullopt
                                        : std::optional<std::string>(l.get<std::string>());
    }
    if (doc.contains("columns")) {
      c.columns.clear();
      for (const auto& col : doc.at("columns")) c.columns.push_back(ColumnSpecFromJson(col));
    }
    c.first_month = doc.value("first_month", c.first_month);
    c.months = doc.value("months", c.months);
    c.label_delay_days = doc.value("label_delay_days", c.label_delay_days);
    c.fit_frame = doc.value("fit_frame", c.fit_frame);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("preprocess config: ") + e.what());
  }
  return c;
}

PreprocessResult RunPreprocess(const PreprocessConfig& config,
                               const std::filesystem::path& out_dir) {
  if (config.months < 1) throw Error(ErrorCode::kInvalidArgument, "months must be >= 1");
  if (config.fit_frame < 0 || config.fit_frame >= config.months) {
    throw Error(ErrorCode::kInvalidArgument, "fit_frame outside the schedule");
  }
  LoadOptions load = config.load;
  load.keep_columns.clear();
  for (const auto& c : config.columns) load.keep_columns.push_back(c.name);
  if (config.identity) load.keep_columns.push_back(config.join_key);
  DataFrameTable table = LoadTable(config.input, TableFormat::kCsv, load);
  if (config.identity) {
    LoadOptions right = load;
    right.timestamp_column.clear();
    right.label_column.reset();
    table = LeftJoin(table, LoadTable(*config.identity, TableFormat::kCsv, right),
                     config.join_key);
  }

  std::chrono::year_month_day first = ParseDate(config.first_month + "-01");
  std::vector<TimeFrame> schedule =
      MonthlySchedule(first.year() / first.month(), config.months, config.label_delay_days);
  std::vector<int> assignment = AssignFrames(table.event_time, schedule);
  std::vector<std::size_t> fit_rows;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] == config.fit_frame) fit_rows.push_back(r);
  }
  if (fit_rows.empty()) {
    throw Error(ErrorCode::kData, "frame " + std::to_string(config.fit_frame) +
                                      " used for fitting the schema has no rows");
  }
  FeatureSchema schema = FitSchema(table.SelectRows(fit_rows), config.columns);
  DesignMatrix matrix = Transform(table, schema);
  SliceResult sliced = SliceFrames(matrix, schedule);

  PreprocessResult result;
  result.dropped_rows = sliced.dropped_rows;
  for (std::size_t i = 0; i < sliced.frames.size(); ++i) {
    if (sliced.frames[i].rows() == 0) {
      result.warnings.push_back("frame " + std::to_string(i) + " (" +
                                FormatDate(schedule[i].start) + ") has no rows");
    }
  }
  if (sliced.dropped_rows > 0) {
    result.warnings.push_back(std::to_string(sliced.dropped_rows) +
                              " rows fall outside the schedule and were dropped");
  }
  WriteFrameSet(out_dir, sliced.frames, schedule, schema);
  result.frames = Describe(sliced.frames, schedule);
  return result;
}

std::string FormatFrameCounts(const std::vector<FrameDescriptor>& frames) {
  std::vector<std::vector<std::string>> rows;
  std::size_t cum_normal = 0;
  std::size_t cum_anomalous = 0;
  for (const auto& f : frames) {
    cum_normal += f.normal;
    cum_anomalous += f.anomalous;
    rows.push_back({std::to_string(f.index), MonthLabel(f.start), std::to_string(f.normal),
                    std::to_string(f.anomalous), std::to_string(f.unlabeled),
                    std::to_string(cum_normal) + " / " + std::to_string(cum_anomalous)});
  }
  return FormatTable({"frame", "month", "nonfraud", "fraud", "unlabeled",
                      "cumulative nonfraud / fraud"},
                     rows);
}

GeneratedStream RunGenerate(const DriftScenario& scenario, const std::filesystem::path& out_dir) {
  GeneratedStream stream = Generate(scenario);
  std::filesystem::create_directories(out_dir);
  stream.WriteCsv(out_dir / "data.csv");
  WriteJson(out_dir / "scenario.json", scenario.ToJson());
  const std::vector<TimeFrame> schedule = scenario.Schedule();
  WriteFrameSet(out_dir / "frames", stream.frames, schedule,
                FeatureSchema(scenario.ColumnSpecs(),
                              std::vector<std::vector<std::string>>(scenario.feature_dim)));
  return stream;
}

VariantSpec VariantSpec::Parse(const std::string& name) {
  VariantSpec spec;
  spec.name = name;
  std::string base = name;
  auto strip = [&](const std::string& suffix) {
    if (base.size() > suffix.size() &&
        base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
      base.resize(base.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("-LATKD")) {
    spec.strategy = Strategy::kLatkd;
  } else if (strip("-WINDOW")) {
    spec.strategy = Strategy::kWindow;
  }
  if (base == "MLP") {
    spec.learner = ModelKind::kMlp;
  } else if (base == "XG") {
    spec.learner = ModelKind::kGbt;
  } else if (base == "MLP-XG") {
    spec.learner = ModelKind::kEnsemble;
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown variant '" + name +
                    "' (expected MLP, XG or MLP-XG, optionally with -LATKD or -WINDOW)");
  }
  return spec;
}

void ExperimentConfig::Validate() const {
  if (frames_dir.has_value() == scenario.has_value()) {
    throw Error(ErrorCode::kInvalidArgument,
                "experiment config needs exactly one of frames_dir and scenario");
  }
  if (runs < 1) throw Error(ErrorCode::kInvalidArgument, "runs must be >= 1");
  if (variants.empty()) throw Error(ErrorCode::kInvalidArgument, "no variants configured");
  std::set<std::string> seen;
  for (const auto& v : variants) {
    VariantSpec::Parse(v);
    if (!seen.insert(v).second) {
      throw Error(ErrorCode::kInvalidArgument, "variant '" + v + "' listed twice");
    }
  }
  if (variants.size() > 1 && !seen.count(baseline)) {
    throw Error(ErrorCode::kInvalidArgument,
                "baseline '" + baseline + "' is not among the configured variants");
  }
  if (benchmark_repetitions < 1) {
    throw Error(ErrorCode::kInvalidArgument, "benchmark repetitions must be >= 1");
  }
  VariantSpec::Parse(benchmark_variant);
  if (!ksweep_variant.empty() &&
      VariantSpec::Parse(ksweep_variant).strategy != Strategy::kLatkd) {
    throw Error(ErrorCode::kInvalidArgument, "k-sweep variant must be a LATKD variant");
  }
  LatkdFor(VariantSpec::Parse(variants.front()), seed).Validate();
}

json ExperimentConfig::ToJson() const {
  json arch = mlp_architecture.ToJson();
  arch.erase("input_dim");
  json doc = {{"train_frames", train_frames},
              {"test_frames", test_frames},
              {"variants", variants},
              {"baseline", baseline},
              {"runs", runs},
              {"seed", seed},
              {"latkd",
               {{"K", truncation_start},
                {"kl_weight", kl_weight},
                {"temperature", temperature},
                {"teacher_source", teacher_source
                                       ? json(std::string(TeacherSourceName(*teacher_source)))
                                       : json(nullptr)}}},
              {"mlp_architecture", arch},
              {"mlp", mlp.ToJson()},
              {"gbt", gbt.ToJson()},
              {"run_id", run_id},
              {"benchmark",
               {{"variant", benchmark_variant}, {"repetitions", benchmark_repetitions}}},
              {"ksweep", {{"variant", ksweep_variant}}}};
  doc["frames_dir"] = frames_dir ? json(frames_dir->string()) : json(nullptr);
  doc["scenario"] = scenario ? scenario->ToJson() : json(nullptr);
  return doc;
}

ExperimentConfig ExperimentConfig::FromJson(const json& doc) {
  ExperimentConfig c;
  try {
    if (doc.contains("frames_dir") && !doc.at("frames_dir").is_null()) {
      c.frames_dir = doc.at("frames_dir").get<std::string>();
    }
    if (doc.contains("scenario") && !doc.at("scenario").is_null()) {
      c.scenario = DriftScenario::FromJson(doc.at("scenario"));
    }
    c.train_frames = doc.value("train_frames", c.train_frames);
    c.test_frames = doc.value("test_frames", c.test_frames);
    c.variants = doc.value("variants", c.variants);
    c.baseline = doc.value("baseline", c.baseline);
    c.runs = doc.value("runs", c.runs);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("latkd")) {
      const json& l = doc.at("latkd");
      c.truncation_start = l.value("K", c.truncation_start);
      c.kl_weight = l.value("kl_weight", c.kl_weight);
      c.temperature = l.value("temperature", c.temperature);
      if (l.contains("teacher_source") && !l.at("teacher_source").is_null()) {
        c.teacher_source = ParseTeacherSource(l.at("teacher_source").get<std::string>());
      }
    }
    if (doc.contains("mlp_architecture")) {
      c.mlp_architecture = MlpArchitecture::FromJson(doc.at("mlp_architecture"));
    }
    if (doc.contains("mlp")) c.mlp = MlpTrainOptions::FromJson(doc.at("mlp"));
    if (doc.contains("gbt")) c.gbt = GbtConfig::FromJson(doc.at("gbt"));
    c.run_id = doc.value("run_id", c.run_id);
    if (doc.contains("benchmark")) {
      c.benchmark_variant = doc.at("benchmark").value("variant", c.benchmark_variant);
      c.benchmark_repetitions = doc.at("benchmark").value("repetitions", c.benchmark_repetitions);
    }
    if (doc.contains("ksweep")) c.ksweep_variant = doc.at("ksweep").value("variant", c.ksweep_variant);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("experiment config: ") + e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig ExperimentConfig::Load(const std::filesystem::path& path) {
  json doc = ParseJsonFile(path);
  // Relative frame directories resolve against the config file.
  if (doc.contains("frames_dir") && doc.at("frames_dir").is_string()) {
    std::filesystem::path dir = doc.at("frames_dir").get<std::string>();
    if (dir.is_relative()) doc["frames_dir"] = (path.parent_path() / dir).lexically_normal().string();
  }
  try {
    return FromJson(doc);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string ExperimentConfig::Hash() const { return Sha256Hex(ToJson().dump()); }

std::string ExperimentConfig::ResolvedRunId() const {
  if (!run_id.empty()) return run_id;
  return "exp-" + Hash().substr(0, 16);
}

LatkdConfig ExperimentConfig::LatkdFor(const VariantSpec& variant, std::uint64_t run_seed) const {
  LatkdConfig c;
  c.truncation_start = truncation_start;
  c.kl_weight = kl_weight;
  c.temperature = temperature;
  c.learner = variant.learner;
  if (variant.strategy == Strategy::kLatkd) {
    c.teacher_source = teacher_source.value_or(variant.learner == ModelKind::kEnsemble
                                                   ? TeacherSource::kEnsembleChain
                                                   : TeacherSource::kSameLearner);
  } else {
    c.teacher_source = TeacherSource::kSameLearner;
  }
  c.seed = run_seed;
  c.mlp_architecture = mlp_architecture;
  c.mlp_options = mlp;
  c.gbt_config = gbt;
  return c;
}

FrameSet LoadFrames(const ExperimentConfig& config) {
  config.Validate();
  if (config.frames_dir) return ReadFrameSet(*config.frames_dir);
  GeneratedStream stream = Generate(*config.scenario);
  FrameSet set;
  set.descriptors = Describe(stream.frames, config.scenario->Schedule());
  for (auto& d : set.descriptors) d.file.clear();
  set.frames = std::move(stream.frames);
  return set;
}

ExperimentResult RunExperiment(const ExperimentConfig& config,
                               const std::filesystem::path& run_root,
                               const ExperimentOptions& options) {
  config.Validate();
  FrameSet set = LoadFrames(config);
  Positions pos = ResolvePositions(config, set.frames.size());
  ExperimentConfig resolved = config;
  resolved.train_frames = pos.train;
  resolved.test_frames = pos.test;

  json frames_json = json::array();
  for (const auto& d : set.descriptors) frames_json.push_back(d.ToJson());
  const json snapshot = {{"kind", "experiment"},
                         {"experiment", resolved.ToJson()},
                         {"frames", frames_json}};

  BlobStore store(run_root);
  SoftLabelCache cache(run_root / "softlabels");
  RunDirectory run(run_root, config.ResolvedRunId(), snapshot);
  Log(options, (run.resumed() ? "resuming " : "starting ") + run.dir().string());

  const std::vector<DesignMatrix> train = Select(set, pos.train);
  const std::vector<DesignMatrix> test_parts = Select(set, pos.test);
  const DesignMatrix test = Concatenate(test_parts);

  ExperimentResult result;
  result.run_dir = run.dir();
  std::size_t committed = 0;
  auto budget_left = [&]() -> std::optional<int> {
    if (!options.stop_after_entries) return std::nullopt;
    return static_cast<int>(*options.stop_after_entries - std::min(committed, *options.stop_after_entries));
  };

  for (const std::string& name : config.variants) {
    const VariantSpec variant = VariantSpec::Parse(name);
    for (int r = 0; r < config.runs; ++r) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
      const LatkdConfig latkd = config.LatkdFor(variant, seed);
      if (variant.strategy == Strategy::kLatkd) {
        ScheduleOptions so;
        so.variant = name;
        so.test_set = &test;
        if (auto left = budget_left()) so.stop_after = *left;
        ScheduleResult sr = RunSchedule(train, latkd, run, store, cache, so);
        for (const FrameRecord& rec : sr.frames) {
          if (rec.rows_consumed != train[static_cast<std::size_t>(rec.index)].rows()) {
            throw Error(ErrorCode::kTraining,
                        name + " frame " + std::to_string(rec.index) + " consumed " +
                            std::to_string(rec.rows_consumed) + " rows, expected the frame's " +
                            std::to_string(train[static_cast<std::size_t>(rec.index)].rows()));
          }
          if (!rec.resumed) {
            ++committed;
            Log(options, name + " seed " + std::to_string(seed) + " period " +
                             std::to_string(rec.index + 1) + " auprc " +
                             Fixed(rec.test_auprc.value_or(0.0), 4));
          }
        }
        if (sr.frames.size() < train.size()) return result;
        continue;
      }
      for (std::size_t p = 0; p < train.size(); ++p) {
        const int period = static_cast<int>(p);
        if (FindEntry(run.manifest(), name, seed, period) != nullptr) continue;
        if (auto left = budget_left(); left && *left <= 0) return result;
        const std::size_t first = variant.strategy == Strategy::kCumulative ? 0 : p;
        std::vector<DesignMatrix> parts(train.begin() + static_cast<std::ptrdiff_t>(first),
                                        train.begin() + static_cast<std::ptrdiff_t>(p) + 1);
        const DesignMatrix data = Concatenate(parts);
        FrameTrainResult trained = TrainLearner(data, std::vector<ProbMatrix>{}, latkd);
        if (trained.rows_consumed != data.rows()) {
          throw Error(ErrorCode::kTraining, name + " period " + std::to_string(p + 1) +
                                                " consumed " +
                                                std::to_string(trained.rows_consumed) +
                                                " rows, expected " + std::to_string(data.rows()));
        }
        FrameEntry entry;
        entry.index = period;
        entry.variant = name;
        entry.seed = seed;
        entry.window = PositionWindow(static_cast<int>(first), period);
        entry.config_hash = latkd.Hash();
        entry.rows_consumed = trained.rows_consumed;
        entry.wall_clock_seconds = trained.train_seconds;
        for (const auto& [kind, model] : trained.by_kind) {
          entry.models[std::string(ModelKindName(kind))] = StoreModel(store, *model);
        }
        ClassCounts counts = data.CountClasses();
        entry.metrics["train_normal"] = counts.normal;
        entry.metrics["train_anomalous"] = counts.anomalous;
        if (!trained.loss_trace.empty()) entry.metrics["final_loss"] = trained.loss_trace.back();
        const double auprc = TestAuprc(*trained.primary, test);
        entry.metrics["test_auprc"] = auprc;
        run.AppendFrame(entry, store);
        ++committed;
        Log(options, name + " seed " + std::to_string(seed) + " period " +
                         std::to_string(p + 1) + " auprc " + Fixed(auprc, 4));
      }
    }
  }
  result.reports = BuildReports(run.manifest());
  WriteReports(result.reports, run.dir() / "reports");
  result.manifest_hash = run.manifest().ContentHash();
  result.completed = true;
  return result;
}

Reports BuildReports(const RunManifest& manifest) {
  const json& config = manifest.config;
  if (config.value("kind", std::string()) != "experiment") {
    throw Error(ErrorCode::kInvalidArgument,
                "manifest " + manifest.run_id + " is not an experiment run");
  }
  const json& exp = config.at("experiment");
  const auto variants = exp.at("variants").get<std::vector<std::string>>();
  const auto baseline = exp.at("baseline").get<std::string>();
  const auto train = exp.at("train_frames").get<std::vector<int>>();
  const auto test = exp.at("test_frames").get<std::vector<int>>();
  std::vector<FrameDescriptor> frames;
  for (const auto& d : config.at("frames")) frames.push_back(FrameDescriptor::FromJson(d));

  // variant -> period -> (seed -> entry)
  std::map<std::string, std::map<int, std::map<std::uint64_t, const FrameEntry*>>> grouped;
  for (const auto& f : manifest.frames) grouped[f.variant][f.index][f.seed] = &f;

  std::vector<std::vector<std::optional<RunReport>>> reports(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t p = 0; p < train.size(); ++p) {
      std::vector<double> auprc;
      std::vector<double> seconds;
      for (const auto& [seed, entry] : grouped[variants[v]][static_cast<int>(p)]) {
        auprc.push_back(entry->metrics.at("test_auprc").get<double>());
        seconds.push_back(entry->wall_clock_seconds);
      }
      reports[v].push_back(auprc.empty() ? std::nullopt
                                         : std::optional<RunReport>(RunReport::FromRuns(
                                               std::move(auprc), std::move(seconds))));
    }
  }

  Reports out;
  json periods = json::array();
  std::vector<std::vector<std::string>> t1;
  std::size_t normal = 0;
  std::size_t anomalous = 0;
  const std::string testing = JoinMonths(frames, test);
  for (std::size_t p = 0; p < train.size(); ++p) {
    const FrameDescriptor& f = frames.at(static_cast<std::size_t>(train[p]));
    normal += f.normal;
    anomalous += f.anomalous;
    std::vector<int> window(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(p) + 1);
    const std::string training = JoinMonths(frames, window);
    t1.push_back({std::to_string(p + 1), training, testing,
                  std::to_string(normal) + " / " + std::to_string(anomalous)});
    periods.push_back({{"period", p + 1},
                       {"training", training},
                       {"testing", testing},
                       {"cumulative_normal", normal},
                       {"cumulative_anomalous", anomalous}});
  }
  out.table1 = FormatTable(
      {"Period #", "Training Period", "Testing Period", "Training # Nonfraud / # Fraud"}, t1);

  std::vector<std::vector<std::string>> means;
  json auprc_json = json::object();
  for (std::size_t p = 0; p < train.size(); ++p) {
    std::vector<std::string> row = {std::to_string(p + 1)};
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto& rep = reports[v][p];
      row.push_back(rep ? Fixed(rep->mean, 4) + " +- " + Fixed(rep->stddev, 4) : "-");
    }
    means.push_back(row);
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    json per_period = json::array();
    for (const auto& rep : reports[v]) per_period.push_back(rep ? rep->ToJson() : json(nullptr));
    auprc_json[variants[v]] = per_period;
  }
  std::vector<std::string> header = {"Period #"};
  header.insert(header.end(), variants.begin(), variants.end());
  out.auprc = FormatTable(header, means);

  json diff_json = json::object();
  const auto base_it = std::find(variants.begin(), variants.end(), baseline);
  if (variants.size() <= 1 || base_it == variants.end()) {
    out.table2 = out.auprc;
  } else {
    const std::size_t b = static_cast<std::size_t>(base_it - variants.begin());
    std::vector<std::string> h2 = {"Period #"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (v != b) h2.push_back(variants[v]);
    }
    for (std::size_t p = 0; p < train.size(); ++p) {
      std::vector<std::string> row = {std::to_string(p + 1)};
      for (std::size_t v = 0; v < variants.size(); ++v) {
        if (v == b) continue;
        const auto& cand = reports[v][p];
        const auto& base = reports[b][p];
        if (cand && base) {
          const double d = RelativeDiffPercent(*cand, *base);
          row.push_back(Fixed(d, 2) + "%");
          diff_json[variants[v]].push_back(d);
        } else {
          row.push_back("-");
          diff_json[variants[v]].push_back(nullptr);
        }
      }
      rows.push_back(row);
    }
    out.table2 = FormatTable(h2, rows);
  }
  out.json = {{"run_id", manifest.run_id},
              {"baseline", baseline},
              {"variants", variants},
              {"periods", periods},
              {"auprc", auprc_json},
              {"relative_diff_percent", diff_json}};
  return out;
}

void WriteReports(const Reports& reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteFileAtomic(dir / "table1.txt", reports.table1);
  WriteFileAtomic(dir / "table2.txt", reports.table2);
  WriteFileAtomic(dir / "auprc.txt", reports.auprc);
  WriteJson(dir / "report.json", reports.json);
}

KSweepResult RunKSweep(const ExperimentConfig& config, int t,
                       const std::filesystem::path& run_root,
                       const ExperimentOptions& options) {
  config.Validate();
  std::string name = config.ksweep_variant;
  if (name.empty()) {
    for (const auto& v : config.variants) {
      if (VariantSpec::Parse(v).strategy == Strategy::kLatkd) {
        name = v;
        break;
      }
    }
  }
  if (name.empty()) name = "MLP-LATKD";
  const VariantSpec variant = VariantSpec::Parse(name);
  if (variant.strategy != Strategy::kLatkd) {
    throw Error(ErrorCode::kInvalidArgument, "k-sweep variant must be a LATKD variant");
  }
  FrameSet set = LoadFrames(config);
  Positions pos = ResolvePositions(config, set.frames.size());
  if (t < 0 || t >= static_cast<int>(pos.train.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "k-sweep frame " + std::to_string(t) + " outside training positions 0.." +
                    std::to_string(pos.train.size() - 1));
  }
  const std::vector<DesignMatrix> train = Select(set, pos.train);
  const std::vector<DesignMatrix> test_parts = Select(set, pos.test);
  const DesignMatrix test = Concatenate(test_parts);

  ExperimentConfig resolved = config;
  resolved.train_frames = pos.train;
  resolved.test_frames = pos.test;
  BlobStore store(run_root);
  SoftLabelCache cache(run_root / "softlabels");
  RunDirectory run(run_root, config.ResolvedRunId() + "-ksweep",
                   {{"kind", "k-sweep"}, {"experiment", resolved.ToJson()}, {"variant", name}});
  const LatkdConfig base = config.LatkdFor(variant, config.seed);
  ScheduleOptions so;
  so.variant = name;
  ScheduleResult chain = RunSchedule(
      std::span<const DesignMatrix>(train.data(), static_cast<std::size_t>(t)), base, run,
      store, cache, so);

  KSweepResult result;
  result.variant = name;
  result.frame = t;
  std::vector<std::vector<std::string>> rows;
  json rows_json = json::array();
  double best = -1.0;
  for (int k = 0; k <= t; ++k) {
    LatkdConfig c = base;
    c.truncation_start = k;
    FrameTrainResult trained =
        TrainFrame(t, train[static_cast<std::size_t>(t)], chain.registry, c, store, cache);
    KSweepRow row;
    row.truncation_start = k;
    row.teachers = trained.teacher_frames.size();
    row.auprc = TestAuprc(*trained.primary, test);
    row.model_hash = trained.primary->ContentHash();
    if (row.auprc > best) {
      best = row.auprc;
      result.best_truncation_start = k;
    }
    Log(options, "K=" + std::to_string(k) + " auprc " + Fixed(row.auprc, 4));
    rows.push_back({std::to_string(k), std::to_string(row.teachers), Fixed(row.auprc, 4)});
    rows_json.push_back({{"K", k},
                         {"teachers", row.teachers},
                         {"auprc", row.auprc},
                         {"model_hash", row.model_hash}});
    result.rows.push_back(std::move(row));
  }
  result.table = FormatTable({"K", "teachers", "validation AUPRC"}, rows) +
                 "best K: " + std::to_string(result.best_truncation_start) + "\n";
  result.json = {{"variant", name},
                 {"frame", t},
                 {"rows", rows_json},
                 {"best_K", result.best_truncation_start}};
  const std::string stem = "ksweep_t" + std::to_string(t);
  WriteFileAtomic(run.dir() / (stem + ".txt"), result.table);
  WriteJson(run.dir() / (stem + ".json"), result.json);
  return result;
}

BenchmarkResult RunBenchmark(const ExperimentConfig& config,
                             const std::filesystem::path& run_root,
                             const ExperimentOptions& options) {
  config.Validate();
  const VariantSpec variant = VariantSpec::Parse(config.benchmark_variant);
  FrameSet set = LoadFrames(config);
  Positions pos = ResolvePositions(config, set.frames.size());
  const std::vector<DesignMatrix> train = Select(set, pos.train);
  const std::size_t n = train.size();

  const std::string id = config.ResolvedRunId() + "-benchmark";
  const std::filesystem::path scratch = run_root / "scratch" / id;
  std::filesystem::remove_all(scratch);

  std::vector<std::vector<double>> base_s(n);
  std::vector<std::vector<double>> latkd_s(n);
  std::vector<std::size_t> base_rows(n);
  std::vector<std::size_t> latkd_rows(n);
  const std::string learner = variant.learner == ModelKind::kMlp   ? "MLP"
                              : variant.learner == ModelKind::kGbt ? "XG"
                                                                   : "MLP-XG";
  const VariantSpec cumulative = VariantSpec::Parse(learner);
  const VariantSpec chained = VariantSpec::Parse(learner + "-LATKD");
  for (int rep = 0; rep < config.benchmark_repetitions; ++rep) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(rep);
    {
      BlobStore store(scratch);
      SoftLabelCache cache;
      RunDirectory run(scratch, "rep-" + std::to_string(rep), json::object());
      ScheduleOptions so;
      so.variant = chained.name;
      ScheduleResult sr = RunSchedule(train, config.LatkdFor(chained, seed), run, store, cache, so);
      for (const FrameRecord& rec : sr.frames) {
        latkd_s[static_cast<std::size_t>(rec.index)].push_back(rec.train_seconds);
        latkd_rows[static_cast<std::size_t>(rec.index)] = rec.rows_consumed;
      }
    }
    const LatkdConfig base = config.LatkdFor(cumulative, seed);
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<DesignMatrix> parts(train.begin(),
                                      train.begin() + static_cast<std::ptrdiff_t>(t) + 1);
      const DesignMatrix data = Concatenate(parts);
      FrameTrainResult trained = TrainLearner(data, std::vector<ProbMatrix>{}, base);
      base_s[t].push_back(trained.train_seconds);
      base_rows[t] = trained.rows_consumed;
      Log(options, "rep " + std::to_string(rep) + " frame " + std::to_string(t) +
                       " cumulative " + Fixed(trained.train_seconds, 3) + "s latkd " +
                       Fixed(latkd_s[t].back(), 3) + "s");
    }
  }
  std::filesystem::remove_all(scratch);

  BenchmarkResult result;
  result.variant = learner;
  std::vector<std::vector<std::string>> rows;
  result.csv =
      "frame,baseline_rows,latkd_rows,baseline_seconds_mean,baseline_seconds_sd,"
      "latkd_seconds_mean,latkd_seconds_sd,ratio\n";
  json rows_json = json::array();
  for (std::size_t t = 0; t < n; ++t) {
    BenchmarkRow row;
    row.frame = static_cast<int>(t);
    row.baseline_rows = base_rows[t];
    row.latkd_rows = latkd_rows[t];
    row.baseline_seconds = base_s[t];
    row.latkd_seconds = latkd_s[t];
    RunReport b = RunReport::FromRuns(base_s[t], base_s[t]);
    RunReport l = RunReport::FromRuns(latkd_s[t], latkd_s[t]);
    row.baseline_mean = b.mean;
    row.baseline_sd = b.stddev;
    row.latkd_mean = l.mean;
    row.latkd_sd = l.stddev;
    row.ratio = l.mean > 0.0 ? b.mean / l.mean : 0.0;
    rows.push_back({MonthLabel(set.descriptors[static_cast<std::size_t>(pos.train[t])].start),
                    std::to_string(row.baseline_rows), std::to_string(row.latkd_rows),
                    Fixed(row.baseline_mean, 3) + " +- " + Fixed(row.baseline_sd, 3),
                    Fixed(row.latkd_mean, 3) + " +- " + Fixed(row.latkd_sd, 3),
                    Fixed(row.ratio, 2)});
    result.csv += std::to_string(t) + "," + std::to_string(row.baseline_rows) + "," +
                  std::to_string(row.latkd_rows) + "," + FormatDouble(row.baseline_mean) + "," +
                  FormatDouble(row.baseline_sd) + "," + FormatDouble(row.latkd_mean) + "," +
                  FormatDouble(row.latkd_sd) + "," + FormatDouble(row.ratio) + "\n";
    rows_json.push_back({{"frame", t},
                         {"baseline_rows", row.baseline_rows},
                         {"latkd_rows", row.latkd_rows},
                         {"baseline_seconds", row.baseline_seconds},
                         {"latkd_seconds", row.latkd_seconds},
                         {"ratio", row.ratio}});
    result.rows.push_back(std::move(row));
  }
  result.table = "variant: " + learner + " (cumulative vs " + chained.name + ")\n" +
                 FormatTable({"frame", "cumulative rows", "LATKD rows", "cumulative s",
                              "LATKD s", "ratio"},
                             rows);
  result.json = {{"variant", learner},
                 {"repetitions", config.benchmark_repetitions},
                 {"rows", rows_json}};
  const std::filesystem::path out = run_root / "runs" / id;
  std::filesystem::create_directories(out);
  WriteFileAtomic(out / "benchmark.txt", result.table);
  WriteFileAtomic(out / "benchmark.csv", result.csv);
  WriteJson(out / "benchmark.json", result.json);
  return result;
}

}  // namespace latkd
