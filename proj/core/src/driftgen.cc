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

#include "latkd/driftgen.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "latkd/csv.h"
#include "latkd/errors.h"
#include "latkd/io.h"
#include "latkd/random.h"

namespace latkd {
namespace {

using json = nlohmann::json;

struct ComponentState {
  GaussianCluster cluster;
  bool fraud = false;
  bool active = true;
};

// Components in declaration order, so draws do not depend on map ordering.
using FrameState = std::vector<ComponentState>;

std::string_view ActionName(DriftAction action) {
  switch (action) {
    case DriftAction::kShiftCluster: return "shift_cluster";
    case DriftAction::kAddCluster: return "add_cluster";
    case DriftAction::kRetireCluster: return "retire_cluster";
    case DriftAction::kReintroduceCluster: return "reintroduce_cluster";
  }
  return "";
}

DriftAction ParseAction(const std::string& name) {
  for (DriftAction a : {DriftAction::kShiftCluster, DriftAction::kAddCluster,
                        DriftAction::kRetireCluster, DriftAction::kReintroduceCluster}) {
    if (ActionName(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown drift action '" + name + "'");
}

json ClusterToJson(const GaussianCluster& c) {
  return {{"name", c.name}, {"mean", c.mean}, {"stddev", c.stddev}, {"weight", c.weight}};
}

GaussianCluster ClusterFromJson(const json& doc) {
  GaussianCluster c;
  c.name = doc.at("name").get<std::string>();
  c.mean = doc.at("mean").get<std::vector<double>>();
  c.stddev = doc.at("stddev").get<std::vector<double>>();
  c.weight = doc.value("weight", 1.0);
  return c;
}

void CheckCluster(const GaussianCluster& c, std::size_t dim) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "cluster '" + c.name + "': " + what);
  };
  if (c.name.empty()) throw Error(ErrorCode::kInvalidArgument, "cluster without a name");
  if (c.mean.size() != dim || c.stddev.size() != dim) {
    fail("mean and stddev need " + std::to_string(dim) + " entries");
  }
  for (double m : c.mean) {
    if (!std::isfinite(m)) fail("mean must be finite");
  }
  for (double s : c.stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) fail("covariance must be positive");
  }
  if (!(c.weight > 0.0) || !std::isfinite(c.weight)) fail("weight must be positive");
}

std::size_t FraudRows(const DriftScenario& s) {
  return static_cast<std::size_t>(
      std::llround(s.fraud_rate * static_cast<double>(s.rows_per_frame)));
}

std::vector<DriftEvent> OrderedEvents(const DriftScenario& s) {
  std::vector<DriftEvent> events = s.drift_events;
  if (s.recurrence) {
    DriftEvent e;
    e.frame_index = s.recurrence->frame_index;
    e.action = DriftAction::kReintroduceCluster;
    e.cluster = s.recurrence->cluster;
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(), [](const DriftEvent& a, const DriftEvent& b) {
    return a.frame_index < b.frame_index;
  });
  return events;
}

// Active components of every frame after applying that frame's events.
std::vector<FrameState> Replay(const DriftScenario& s) {
  FrameState state;
  auto add = [&](const GaussianCluster& c, bool fraud) {
    CheckCluster(c, s.feature_dim);
    for (const auto& existing : state) {
      if (existing.cluster.name == c.name) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate cluster name '" + c.name + "'");
      }
    }
    state.push_back({c, fraud, true});
  };
  for (const auto& c : s.normal_components) add(c, false);
  for (const auto& c : s.fraud_components) add(c, true);
  auto find = [&](const DriftEvent& e) -> ComponentState& {
    for (auto& existing : state) {
      if (existing.cluster.name == e.cluster) return existing;
    }
    throw Error(ErrorCode::kInvalidArgument, "frame " + std::to_string(e.frame_index) + ": " +
                                                 std::string(ActionName(e.action)) +
                                                 " names unknown cluster '" + e.cluster + "'");
  };

  std::vector<DriftEvent> events = OrderedEvents(s);
  std::size_t next = 0;
  std::vector<FrameState> frames;
  const bool needs_fraud = FraudRows(s) > 0;
  const bool needs_normal = FraudRows(s) < s.rows_per_frame;
  for (int f = 0; f < s.n_frames; ++f) {
    for (; next < events.size() && events[next].frame_index == f; ++next) {
      const DriftEvent& e = events[next];
      switch (e.action) {
        case DriftAction::kShiftCluster: {
          ComponentState& c = find(e);
          if (e.shift.size() != s.feature_dim) {
            throw Error(ErrorCode::kInvalidArgument,
                        "shift of '" + e.cluster + "' has the wrong dimension");
          }
          for (std::size_t d = 0; d < s.feature_dim; ++d) c.cluster.mean[d] += e.shift[d];
          CheckCluster(c.cluster, s.feature_dim);
          break;
        }
        case DriftAction::kAddCluster:
          if (!e.added) throw Error(ErrorCode::kInvalidArgument, "add_cluster without a cluster");
          add(*e.added, e.fraud);
          break;
        case DriftAction::kRetireCluster: {
          ComponentState& c = find(e);
          if (!c.active) {
            throw Error(ErrorCode::kInvalidArgument, "cluster '" + e.cluster + "' already retired");
          }
          c.active = false;
          break;
        }
        case DriftAction::kReintroduceCluster: {
          ComponentState& c = find(e);
          if (c.active) {
            throw Error(ErrorCode::kInvalidArgument,
                        "cluster '" + e.cluster + "' reintroduced while active");
          }
          c.active = true;
          break;
        }
      }
    }
    bool any_fraud = false;
    bool any_normal = false;
    for (const auto& c : state) {
      if (!c.active) continue;
      (c.fraud ? any_fraud : any_normal) = true;
    }
    if (needs_fraud && !any_fraud) {
      throw Error(ErrorCode::kInvalidArgument,
                  "infeasible scenario: no fraud cluster active in frame " + std::to_string(f));
    }
    if (needs_normal && !any_normal) {
      throw Error(ErrorCode::kInvalidArgument,
                  "infeasible scenario: no normal cluster active in frame " + std::to_string(f));
    }
    frames.push_back(state);
  }
  if (next < events.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "drift event at frame " + std::to_string(events[next].frame_index) +
                    " is outside 0.." + std::to_string(s.n_frames - 1));
  }
  return frames;
}

const ComponentState& Draw(const FrameState& state, bool fraud, Rng& rng) {
  double total = 0.0;
  for (const auto& c : state) {
    if (c.active && c.fraud == fraud) total += c.cluster.weight;
  }
  double u = rng.Uniform() * total;
  const ComponentState* last = nullptr;
  for (const auto& c : state) {
    if (!c.active || c.fraud != fraud) continue;
    last = &c;
    if (u < c.cluster.weight) return c;
    u -= c.cluster.weight;
  }
  return *last;
}

}  // namespace

void DriftScenario::Validate() const {
  if (n_frames < 1) throw Error(ErrorCode::kInvalidArgument, "n_frames must be >= 1");
  if (rows_per_frame < 1) throw Error(ErrorCode::kInvalidArgument, "rows_per_frame must be >= 1");
  if (feature_dim < 1) throw Error(ErrorCode::kInvalidArgument, "feature_dim must be >= 1");
  if (!(fraud_rate > 0.0 && fraud_rate < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "fraud_rate must lie in (0, 0.5)");
  }
  double realized = static_cast<double>(FraudRows(*this)) / static_cast<double>(rows_per_frame);
  if (std::abs(realized - fraud_rate) > 0.1 * fraud_rate) {
    throw Error(ErrorCode::kInvalidArgument,
                "rows_per_frame too small to realize fraud_rate within 10%");
  }
  (void)Schedule();
  (void)Replay(*this);
}

json DriftScenario::ToJson() const {
  json normals = json::array();
  for (const auto& c : normal_components) normals.push_back(ClusterToJson(c));
  json frauds = json::array();
  for (const auto& c : fraud_components) frauds.push_back(ClusterToJson(c));
  json events = json::array();
  for (const auto& e : drift_events) {
    json ev = {{"frame_index", e.frame_index}, {"action", std::string(ActionName(e.action))}};
    if (!e.cluster.empty()) ev["cluster"] = e.cluster;
    if (!e.shift.empty()) ev["shift"] = e.shift;
    if (e.added) {
      ev["added"] = ClusterToJson(*e.added);
      ev["fraud"] = e.fraud;
    }
    events.push_back(ev);
  }
  json doc = {{"n_frames", n_frames},
              {"rows_per_frame", rows_per_frame},
              {"fraud_rate", fraud_rate},
              {"feature_dim", feature_dim},
              {"normal_components", normals},
              {"fraud_components", frauds},
              {"drift_events", events},
              {"seed", seed},
              {"first_month", first_month}};
  if (recurrence) {
    doc["recurrence"] = {{"frame_index", recurrence->frame_index},
                         {"cluster", recurrence->cluster}};
  }
  return doc;
}

DriftScenario DriftScenario::FromJson(const json& doc) {
  DriftScenario s;
  try {
    s.n_frames = doc.value("n_frames", s.n_frames);
    s.rows_per_frame = doc.value("rows_per_frame", s.rows_per_frame);
    s.fraud_rate = doc.value("fraud_rate", s.fraud_rate);
    s.feature_dim = doc.value("feature_dim", s.feature_dim);
    for (const auto& c : doc.value("normal_components", json::array())) {
      s.normal_components.push_back(ClusterFromJson(c));
    }
    for (const auto& c : doc.value("fraud_components", json::array())) {
      s.fraud_components.push_back(ClusterFromJson(c));
    }
    for (const auto& ev : doc.value("drift_events", json::array())) {
      DriftEvent e;
      e.frame_index = ev.at("frame_index").get<int>();
      e.action = ParseAction(ev.at("action").get<std::string>());
      e.cluster = ev.value("cluster", std::string());
      e.shift = ev.value("shift", std::vector<double>{});
      if (ev.contains("added")) e.added = ClusterFromJson(ev.at("added"));
      e.fraud = ev.value("fraud", true);
      s.drift_events.push_back(std::move(e));
    }
    if (doc.contains("recurrence") && !doc.at("recurrence").is_null()) {
      const json& r = doc.at("recurrence");
      s.recurrence = Recurrence{r.at("frame_index").get<int>(), r.at("cluster").get<std::string>()};
    }
    s.seed = doc.value("seed", s.seed);
    s.first_month = doc.value("first_month", s.first_month);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("drift scenario: ") + e.what());
  }
  s.Validate();
  return s;
}

DriftScenario DriftScenario::Load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

std::vector<ColumnSpec> DriftScenario::ColumnSpecs() const {
  std::vector<ColumnSpec> specs;
  for (std::size_t d = 0; d < feature_dim; ++d) {
    ColumnSpec c;
    c.name = "f" + std::to_string(d);
    specs.push_back(c);
  }
  return specs;
}

std::vector<TimeFrame> DriftScenario::Schedule() const {
  std::chrono::year_month_day first = ParseDate(first_month + "-01");
  return MonthlySchedule(first.year() / first.month(), n_frames, 0);
}

GeneratedStream Generate(const DriftScenario& scenario) {
  scenario.Validate();
  const std::vector<FrameState> states = Replay(scenario);
  const std::vector<TimeFrame> schedule = scenario.Schedule();
  const std::string fingerprint =
      FeatureSchema(scenario.ColumnSpecs(),
                    std::vector<std::vector<std::string>>(scenario.feature_dim))
          .fingerprint();
  const std::size_t n = scenario.rows_per_frame;
  const std::size_t n_fraud = FraudRows(scenario);
  const auto dim = static_cast<Eigen::Index>(scenario.feature_dim);

  GeneratedStream out;
  for (int f = 0; f < scenario.n_frames; ++f) {
    Rng rng(DeriveSeed(scenario.seed, static_cast<std::uint64_t>(f)));
    const double start = static_cast<double>(SecondsSinceEpoch(schedule[f].start));
    const double span = static_cast<double>(SecondsSinceEpoch(schedule[f].end)) - start;

    FeatureMatrix x(static_cast<Eigen::Index>(n), dim);
    std::vector<double> times(n);
    std::vector<std::string> origin(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool fraud = i < n_fraud;
      const ComponentState& c = Draw(states[f], fraud, rng);
      for (Eigen::Index d = 0; d < dim; ++d) {
        x(static_cast<Eigen::Index>(i), d) = c.cluster.mean[d] + c.cluster.stddev[d] * rng.Normal();
      }
      labels[i] = fraud ? kAnomalous : kNormal;
      origin[i] = (fraud ? "fraud:" : "normal:") + c.cluster.name;
      times[i] = start + std::floor(rng.Uniform() * span);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    DesignMatrix m;
    m.features.resize(static_cast<Eigen::Index>(n), dim);
    m.labels.resize(n);
    m.event_time.resize(n);
    m.schema_fingerprint = fingerprint;
    std::vector<std::string> sorted_origin(n);
    for (std::size_t r = 0; r < n; ++r) {
      m.features.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(order[r]));
      m.labels[r] = labels[order[r]];
      m.event_time[r] = times[order[r]];
      sorted_origin[r] = std::move(origin[order[r]]);
    }
    out.frames.push_back(std::move(m));
    out.origins.push_back(std::move(sorted_origin));
  }
  return out;
}

void GeneratedStream::WriteCsv(const std::filesystem::path& path) const {
  std::string text = std::string(kDriftTimeColumn) + "," + kDriftLabelColumn + "," +
                     kDriftOriginColumn;
  const Eigen::Index dim = frames.empty() ? 0 : frames.front().features.cols();
  for (Eigen::Index d = 0; d < dim; ++d) text += ",f" + std::to_string(d);
  text += "\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const DesignMatrix& m = frames[f];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      text += FormatDouble(m.event_time[r]);
      text += ",";
      text += std::to_string(m.labels[r]);
      text += ",";
      text += CsvEscape(origins[f][r]);
      for (Eigen::Index d = 0; d < dim; ++d) {
        text += ",";
        text += FormatDouble(m.features(static_cast<Eigen::Index>(r), d));
      }
      text += "\n";
    }
  }
  WriteFileAtomic(path, text);
}

std::vector<std::size_t> GeneratedStream::RowsFrom(int frame, const std::string& origin) const {
  if (frame < 0 || static_cast<std::size_t>(frame) >= origins.size()) {
    throw Error(ErrorCode::kInvalidArgument, "frame " + std::to_string(frame) + " out of range");
  }
  std::vector<std::size_t> rows;
  const auto& log = origins[static_cast<std::size_t>(frame)];
  for (std::size_t r = 0; r < log.size(); ++r) {
    if (log[r] == origin) rows.push_back(r);
  }
  return rows;
}

DriftScenario RecurringPatternScenario(std::uint64_t seed, int n_frames,
                                       std::size_t rows_per_frame, int retire_at,
                                       int return_at) {
  constexpr std::size_t kDim = 6;
  DriftScenario s;
  s.n_frames = n_frames;
  s.rows_per_frame = rows_per_frame;
  s.fraud_rate = 0.05;
  s.feature_dim = kDim;
  s.seed = seed;
  s.normal_components.push_back({"bulk", std::vector<double>(kDim, 0.0),
                                 std::vector<double>(kDim, 1.5), 1.0});
  s.fraud_components.push_back({"A", {0.0, 0.0, 3.0, 3.0, 0.0, 0.0},
                                std::vector<double>(kDim, 0.6), 1.0});
  s.fraud_components.push_back({"B", {3.0, 3.0, 0.0, 0.0, 0.0, 0.0},
                                std::vector<double>(kDim, 0.6), 1.0});
  DriftEvent retire;
  retire.frame_index = retire_at;
  retire.action = DriftAction::kRetireCluster;
  retire.cluster = "A";
  s.drift_events.push_back(retire);
  s.recurrence = Recurrence{return_at, "A"};
  s.Validate();
  return s;
}

}  // namespace latkd
