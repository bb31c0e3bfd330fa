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

#include "latkd/model.h"

#include <cmath>

#include "latkd/ensemble.h"
#include "latkd/errors.h"
#include "latkd/gbt.h"
#include "latkd/hash.h"
#include "latkd/mlp.h"

namespace latkd {

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMlp:
      return "mlp";
    case ModelKind::kGbt:
      return "gbt";
    case ModelKind::kEnsemble:
      return "ensemble";
  }
  return "unknown";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "gbt") return ModelKind::kGbt;
  if (name == "ensemble") return ModelKind::kEnsemble;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown model kind '" + std::string(name) + "'");
}

std::string Model::ContentHash() const { return Sha256Hex(Serialize()); }

ModelPtr DeserializeModel(std::string_view bytes, const BlobResolver& resolver) {
  if (bytes.starts_with("LATKDMLP")) {
    return std::make_shared<MlpModel>(MlpModel::Deserialize(bytes));
  }
  if (bytes.find("\"latkd-ensemble\"") != std::string_view::npos) {
    return std::make_shared<EnsembleModel>(EnsembleModel::Deserialize(bytes, resolver));
  }
  if (bytes.find("\"latkd-gbt\"") != std::string_view::npos) {
    return std::make_shared<GbtModel>(GbtModel::Deserialize(bytes));
  }
  throw Error(ErrorCode::kParse, "unrecognized model encoding");
}

std::vector<double> PositiveScores(const ProbMatrix& probs) {
  std::vector<double> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = probs(r, 1);
  }
  return out;
}

void ValidateDistributionRows(const ProbMatrix& probs, std::string_view what,
                              double tolerance) {
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const double a = probs(r, 0);
    const double b = probs(r, 1);
    if (!(a >= 0.0 && b >= 0.0) || !(std::abs(a + b - 1.0) <= tolerance)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(what) + " row " + std::to_string(r) +
                      " is not a probability distribution");
    }
  }
}

void CheckInputWidth(std::size_t expected, Eigen::Index actual) {
  if (static_cast<std::size_t>(actual) != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature width mismatch: expected " + std::to_string(expected) +
                    ", got " + std::to_string(actual));
  }
}

}  // namespace latkd
