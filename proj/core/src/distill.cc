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

#include "latkd/distill.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <utility>

#include "latkd/ensemble.h"
#include "latkd/errors.h"
#include "latkd/eval.h"
#include "latkd/hash.h"
#include "latkd/io.h"
#include "latkd/random.h"

namespace latkd {
namespace {

using json = nlohmann::json;

constexpr char kSoftLabelMagic[8] = {'L', 'A', 'T', 'K', 'D', 'S', 'L', '1'};
constexpr std::uint64_t kMlpSeedStream = 11;
constexpr std::uint64_t kGbtSeedStream = 12;

std::string Window(int first, int last) {
  return std::to_string(first) + ".." + std::to_string(last);
}

std::vector<ModelKind> MembersToTrain(const LatkdConfig& config) {
  if (config.learner == ModelKind::kEnsemble ||
      config.teacher_source == TeacherSource::kEnsembleChain) {
    return {ModelKind::kMlp, ModelKind::kGbt};
  }
  return {config.learner};
}

ModelKind TeacherKindFor(ModelKind member, const LatkdConfig& config) {
  return config.teacher_source == TeacherSource::kEnsembleChain ? ModelKind::kEnsemble
                                                                : member;
}

}  // namespace

void SoftLabelMatrix::Validate(std::size_t expected_rows) const {
  if (static_cast<std::size_t>(probs.rows()) != expected_rows) {
    throw Error(ErrorCode::kInvalidArgument,
                "soft labels of " + model_id + " have " +
                    std::to_string(probs.rows()) + " rows, expected " +
                    std::to_string(expected_rows));
  }
  ValidateDistributionRows(probs, "soft labels of " + model_id);
}

std::string SoftLabelMatrix::Serialize() const {
  ByteWriter w;
  w.PutBytes(std::string_view(kSoftLabelMagic, sizeof(kSoftLabelMagic)));
  w.PutString(model_id);
  w.PutString(dataset_fingerprint);
  w.Put<std::uint64_t>(static_cast<std::uint64_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) w.Put<double>(probs.data()[i]);
  std::string body = w.Release();
  return body + Sha256Hex(body);
}

SoftLabelMatrix SoftLabelMatrix::Deserialize(std::string_view bytes) {
  constexpr std::size_t kDigest = 64;
  if (bytes.size() < sizeof(kSoftLabelMagic) + kDigest) {
    throw Error(ErrorCode::kParse, "soft-label record truncated");
  }
  std::string_view body = bytes.substr(0, bytes.size() - kDigest);
  if (Sha256Hex(body) != bytes.substr(bytes.size() - kDigest)) {
    throw Error(ErrorCode::kIntegrity, "soft-label checksum mismatch");
  }
  ByteReader r(body);
  if (r.GetBytes(sizeof(kSoftLabelMagic)) !=
      std::string_view(kSoftLabelMagic, sizeof(kSoftLabelMagic))) {
    throw Error(ErrorCode::kParse, "not a soft-label record");
  }
  SoftLabelMatrix out;
  out.model_id = r.GetString();
  out.dataset_fingerprint = r.GetString();
  auto rows = r.Get<std::uint64_t>();
  out.probs.resize(static_cast<Eigen::Index>(rows), 2);
  for (Eigen::Index i = 0; i < out.probs.size(); ++i) out.probs.data()[i] = r.Get<double>();
  if (!r.AtEnd()) throw Error(ErrorCode::kParse, "trailing bytes in soft-label record");
  return out;
}

SoftLabelCache::SoftLabelCache(std::optional<std::filesystem::path> dir)
    : dir_(std::move(dir)) {}

std::optional<std::filesystem::path> SoftLabelCache::PathFor(
    const std::string& model_id, const std::string& dataset) const {
  if (!dir_) return std::nullopt;
  if (!IsHexDigest(model_id) || !IsHexDigest(dataset)) {
    throw Error(ErrorCode::kInvalidArgument, "soft-label keys must be SHA-256 digests");
  }
  return *dir_ / model_id.substr(0, 2) / (model_id + "_" + dataset + ".bin");
}

SoftLabelMatrix SoftLabelCache::Materialize(const Model& model,
                                            const std::string& model_id,
                                            const DesignMatrix& data,
                                            const std::string& dataset_fingerprint) {
  auto key = std::make_pair(model_id, dataset_fingerprint);
  if (auto it = memory_.find(key); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  auto path = PathFor(model_id, dataset_fingerprint);
  if (path && std::filesystem::exists(*path)) {
    try {
      SoftLabelMatrix cached = SoftLabelMatrix::Deserialize(ReadFile(*path));
      if (cached.model_id == model_id && cached.dataset_fingerprint == dataset_fingerprint) {
        cached.Validate(data.rows());
        ++hits_;
        memory_.emplace(key, cached);
        return cached;
      }
      ++corrupt_;
    } catch (const Error&) {
      ++corrupt_;
    }
  }
  ++misses_;
  ++evaluations_;
  SoftLabelMatrix fresh{model_id, dataset_fingerprint, model.Predict(data.features)};
  fresh.Validate(data.rows());
  if (path) {
    std::filesystem::create_directories(path->parent_path());
    WriteFileAtomic(*path, fresh.Serialize());
  }
  memory_.emplace(key, fresh);
  return fresh;
}

std::string_view TeacherSourceName(TeacherSource source) {
  return source == TeacherSource::kSameLearner ? "same_learner" : "ensemble_chain";
}

TeacherSource ParseTeacherSource(std::string_view name) {
  if (name == "same_learner") return TeacherSource::kSameLearner;
  if (name == "ensemble_chain") return TeacherSource::kEnsembleChain;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown teacher source '" + std::string(name) + "'");
}

void LatkdConfig::Validate() const {
  if (truncation_start < 0) {
    throw Error(ErrorCode::kInvalidArgument, "truncation start K must be >= 0");
  }
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) {
    throw Error(ErrorCode::kInvalidArgument, "kl_weight must be finite and >= 0");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be finite and > 0");
  }
  gbt_config.Validate();
}

json LatkdConfig::ToJson() const {
  json arch = mlp_architecture.ToJson();
  arch.erase("input_dim");
  return {{"K", truncation_start},
          {"kl_weight", kl_weight},
          {"temperature", temperature},
          {"learner", std::string(ModelKindName(learner))},
          {"teacher_source", std::string(TeacherSourceName(teacher_source))},
          {"seed", seed},
          {"mlp_architecture", arch},
          {"mlp", mlp_options.ToJson()},
          {"gbt", gbt_config.ToJson()}};
}

LatkdConfig LatkdConfig::FromJson(const json& doc) {
  LatkdConfig c;
  c.truncation_start = doc.value("K", c.truncation_start);
  c.kl_weight = doc.value("kl_weight", c.kl_weight);
  c.temperature = doc.value("temperature", c.temperature);
  if (doc.contains("learner")) c.learner = ParseModelKind(doc.at("learner").get<std::string>());
  if (doc.contains("teacher_source")) {
    c.teacher_source = ParseTeacherSource(doc.at("teacher_source").get<std::string>());
  }
  c.seed = doc.value("seed", c.seed);
  if (doc.contains("mlp_architecture")) {
    c.mlp_architecture = MlpArchitecture::FromJson(doc.at("mlp_architecture"));
  }
  if (doc.contains("mlp")) c.mlp_options = MlpTrainOptions::FromJson(doc.at("mlp"));
  if (doc.contains("gbt")) c.gbt_config = GbtConfig::FromJson(doc.at("gbt"));
  c.Validate();
  return c;
}

std::string LatkdConfig::Hash() const { return Sha256Hex(ToJson().dump()); }

MlpTrainOptions LatkdConfig::ResolvedMlpOptions() const {
  MlpTrainOptions o = mlp_options;
  o.seed = DeriveSeed(seed, kMlpSeedStream);
  return o;
}

GbtConfig LatkdConfig::ResolvedGbtConfig() const {
  GbtConfig g = gbt_config;
  g.seed = DeriveSeed(seed, kGbtSeedStream);
  return g;
}

void TeacherRegistry::Register(TeacherEntry entry) {
  if (entry.frame_index < 0) {
    throw Error(ErrorCode::kInvalidArgument, "teacher frame index must be >= 0");
  }
  if (!IsHexDigest(entry.model_hash)) {
    throw Error(ErrorCode::kInvalidArgument, "teacher model hash is not a digest");
  }
  auto last = LastFrame(entry.kind);
  if (last && entry.frame_index <= *last) {
    throw Error(ErrorCode::kInvalidArgument,
                "frame " + std::to_string(entry.frame_index) + " registered after frame " +
                    std::to_string(*last) + " for kind " +
                    std::string(ModelKindName(entry.kind)));
  }
  entry.created_at = entries_.size();
  entries_.push_back(std::move(entry));
}

std::optional<int> TeacherRegistry::LastFrame(ModelKind kind) const {
  std::optional<int> last;
  for (const auto& e : entries_) {
    if (e.kind == kind) last = e.frame_index;
  }
  return last;
}

std::vector<TeacherEntry> TeacherRegistry::TeacherSet(int t, int truncation_start,
                                                      ModelKind kind) const {
  if (truncation_start < 0 || truncation_start > t) {
    throw Error(ErrorCode::kInvalidArgument,
                "teacher set needs 0 <= K <= t, got K=" + std::to_string(truncation_start) +
                    " t=" + std::to_string(t));
  }
  std::map<int, const TeacherEntry*> by_frame;
  for (const auto& e : entries_) {
    if (e.kind == kind) by_frame[e.frame_index] = &e;
  }
  std::vector<TeacherEntry> out;
  std::string missing;
  for (int i = truncation_start; i < t; ++i) {
    auto it = by_frame.find(i);
    if (it == by_frame.end()) {
      missing += (missing.empty() ? "" : ",") + std::to_string(i);
    } else {
      out.push_back(*it->second);
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::kRegistryGap,
                "no " + std::string(ModelKindName(kind)) + " model registered for frames " +
                    missing);
  }
  return out;
}

TeacherRegistry TeacherRegistry::FromManifest(const RunManifest& manifest,
                                              const std::string& variant,
                                              std::uint64_t seed) {
  std::vector<const FrameEntry*> chain;
  for (const auto& f : manifest.frames) {
    if (f.variant == variant && f.seed == seed) chain.push_back(&f);
  }
  std::stable_sort(chain.begin(), chain.end(),
                   [](const FrameEntry* a, const FrameEntry* b) { return a->index < b->index; });
  TeacherRegistry registry;
  for (const FrameEntry* f : chain) {
    for (const auto& [kind, hash] : f->models) {
      registry.Register({f->index, ParseModelKind(kind), hash, f->window, f->config_hash, 0});
    }
  }
  return registry;
}

FrameTrainResult TrainLearner(const DesignMatrix& data,
                              const std::vector<ProbMatrix>& teachers,
                              const LatkdConfig& config) {
  std::map<ModelKind, std::vector<ProbMatrix>> by_kind;
  for (ModelKind member : MembersToTrain(config)) by_kind[member] = teachers;
  return TrainLearner(data, by_kind, config);
}

FrameTrainResult TrainLearner(const DesignMatrix& data,
                              const std::map<ModelKind, std::vector<ProbMatrix>>& teachers,
                              const LatkdConfig& config) {
  config.Validate();
  FrameTrainResult result;
  std::vector<ModelPtr> members;
  for (ModelKind member : MembersToTrain(config)) {
    CompositeLossSpec spec;
    if (auto it = teachers.find(member); it != teachers.end()) {
      spec.teacher_outputs = it->second;
    }
    spec.kl_weight = config.kl_weight;
    spec.temperature = config.temperature;
    auto start = std::chrono::steady_clock::now();
    if (member == ModelKind::kMlp) {
      MlpTrainResult trained =
          TrainMlp(data, spec, config.mlp_architecture, config.ResolvedMlpOptions());
      result.train_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.rows_consumed = std::max(result.rows_consumed, trained.stats.rows_consumed);
      result.loss_trace = trained.stats.loss_trace;
      members.push_back(std::make_shared<const MlpModel>(std::move(trained.model)));
    } else {
      GbtTrainResult trained = TrainGbt(data, spec, config.ResolvedGbtConfig());
      result.train_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.rows_consumed = std::max(result.rows_consumed, trained.rows_consumed);
      if (result.loss_trace.empty()) result.loss_trace = trained.loss_trace;
      members.push_back(std::make_shared<const GbtModel>(std::move(trained.model)));
    }
    result.by_kind[member] = members.back();
  }
  if (members.size() > 1) {
    result.by_kind[ModelKind::kEnsemble] = std::make_shared<const EnsembleModel>(members);
  }
  result.primary = result.by_kind.at(config.learner);
  return result;
}

FrameTrainResult TrainFrame(int t, const DesignMatrix& frame,
                            const TeacherRegistry& registry,
                            const LatkdConfig& config, const BlobStore& store,
                            SoftLabelCache& cache) {
  config.Validate();
  if (t < 0) throw Error(ErrorCode::kInvalidArgument, "frame index must be >= 0");
  // Frames before K have no eligible teachers.
  int k = std::min(config.truncation_start, t);
  std::string fingerprint;
  std::map<ModelKind, std::vector<ProbMatrix>> teachers;
  std::set<int> teacher_frames;
  for (ModelKind member : MembersToTrain(config)) {
    for (const TeacherEntry& entry : registry.TeacherSet(t, k, TeacherKindFor(member, config))) {
      if (fingerprint.empty()) fingerprint = frame.Fingerprint();
      ModelPtr teacher = LoadModel(store, entry.model_hash);
      teachers[member].push_back(
          cache.Materialize(*teacher, entry.model_hash, frame, fingerprint).probs);
      teacher_frames.insert(entry.frame_index);
    }
  }
  FrameTrainResult result = TrainLearner(frame, teachers, config);
  result.teacher_frames.assign(teacher_frames.begin(), teacher_frames.end());
  return result;
}

ScheduleResult RunSchedule(std::span<const DesignMatrix> frames,
                           const LatkdConfig& config, RunDirectory& run,
                           BlobStore& store, SoftLabelCache& cache,
                           const ScheduleOptions& options) {
  config.Validate();
  ScheduleResult result;
  result.registry = TeacherRegistry::FromManifest(run.manifest(), options.variant, config.seed);
  std::map<int, const FrameEntry*> done;
  for (const auto& f : run.manifest().frames) {
    if (f.variant == options.variant && f.seed == config.seed) done[f.index] = &f;
  }
  const std::string config_hash = config.Hash();
  int committed = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    int t = static_cast<int>(i);
    if (auto it = done.find(t); it != done.end()) {
      const FrameEntry& f = *it->second;
      FrameRecord record;
      record.index = t;
      record.rows_consumed = f.rows_consumed;
      record.train_seconds = f.wall_clock_seconds;
      if (f.metrics.contains("test_auprc")) record.test_auprc = f.metrics["test_auprc"].get<double>();
      record.teacher_frames = f.metrics.value("teacher_frames", std::vector<int>{});
      record.resumed = true;
      result.frames.push_back(std::move(record));
      continue;
    }
    if (options.stop_after && committed >= *options.stop_after) break;

    FrameTrainResult trained =
        TrainFrame(t, frames[i], result.registry, config, store, cache);
    FrameEntry entry;
    entry.index = t;
    entry.variant = options.variant;
    entry.seed = config.seed;
    entry.window = Window(t, t);
    entry.config_hash = config_hash;
    entry.rows_consumed = trained.rows_consumed;
    entry.wall_clock_seconds = trained.train_seconds;
    for (const auto& [kind, model] : trained.by_kind) {
      entry.models[std::string(ModelKindName(kind))] = StoreModel(store, *model);
    }
    FrameRecord record;
    record.index = t;
    record.rows_consumed = trained.rows_consumed;
    record.train_seconds = trained.train_seconds;
    record.teacher_frames = trained.teacher_frames;
    ClassCounts counts = frames[i].CountClasses();
    entry.metrics["train_normal"] = counts.normal;
    entry.metrics["train_anomalous"] = counts.anomalous;
    entry.metrics["teacher_frames"] = trained.teacher_frames;
    if (!trained.loss_trace.empty()) entry.metrics["final_loss"] = trained.loss_trace.back();
    if (options.test_set != nullptr) {
      double auprc = Auprc(PositiveScores(trained.primary->Predict(options.test_set->features)),
                           options.test_set->labels);
      entry.metrics["test_auprc"] = auprc;
      record.test_auprc = auprc;
    }
    run.AppendFrame(entry, store);
    for (const auto& [kind, hash] : entry.models) {
      result.registry.Register({t, ParseModelKind(kind), hash, entry.window, config_hash, 0});
    }
    result.frames.push_back(std::move(record));
    ++committed;
  }
  return result;
}

}  // namespace latkd
