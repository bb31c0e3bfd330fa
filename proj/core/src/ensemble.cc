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

#include "latkd/ensemble.h"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "latkd/errors.h"

namespace latkd {

EnsembleModel::EnsembleModel(std::vector<ModelPtr> members,
                             std::optional<std::vector<double>> weights)
    : members_(std::move(members)) {
  if (members_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one member");
  }
  for (const ModelPtr& m : members_) {
    if (m == nullptr) throw Error(ErrorCode::kInvalidArgument, "null ensemble member");
    if (m->input_width() != members_.front()->input_width()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ensemble members disagree on input width");
    }
  }
  if (weights) {
    if (weights->size() != members_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "one weight per member required");
    }
    const double total = std::accumulate(weights->begin(), weights->end(), 0.0);
    for (double w : *weights) {
      if (!(w >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "ensemble weights must be >= 0");
      }
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "ensemble weights must sum to 1");
    }
    weights_ = std::move(*weights);
  } else {
    weights_.assign(members_.size(), 1.0 / static_cast<double>(members_.size()));
  }
}

std::size_t EnsembleModel::input_width() const {
  return members_.front()->input_width();
}

ProbMatrix EnsembleModel::Predict(const FeatureMatrix& batch) const {
  CheckInputWidth(input_width(), batch.cols());
  // Members are accumulated in listed order.
  ProbMatrix out = ProbMatrix::Zero(batch.rows(), 2);
  for (std::size_t i = 0; i < members_.size(); ++i) {
    out += weights_[i] * members_[i]->Predict(batch);
  }
  return out;
}

std::string EnsembleModel::Serialize() const {
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i = 0; i < members_.size(); ++i) {
    members.push_back({{"kind", ModelKindName(members_[i]->kind())},
                       {"hash", members_[i]->ContentHash()},
                       {"weight", weights_[i]}});
  }
  return nlohmann::json{{"format", "latkd-ensemble"},
                        {"version", 1},
                        {"members", std::move(members)}}
      .dump();
}

EnsembleModel EnsembleModel::Deserialize(std::string_view bytes,
                                         const BlobResolver& resolver) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad ensemble manifest: ") + e.what());
  }
  if (doc.value("format", "") != "latkd-ensemble") {
    throw Error(ErrorCode::kParse, "not an ensemble manifest");
  }
  std::vector<ModelPtr> members;
  std::vector<double> weights;
  for (const auto& m : doc.at("members")) {
    members.push_back(DeserializeModel(resolver(m.at("hash").get<std::string>()),
                                       resolver));
    weights.push_back(m.at("weight").get<double>());
  }
  return EnsembleModel(std::move(members), std::move(weights));
}

}  // namespace latkd
