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

#ifndef LATKD_ENSEMBLE_H_
#define LATKD_ENSEMBLE_H_

#include <optional>
#include <string>
#include <vector>

#include "latkd/model.h"

namespace latkd {

// Row-wise weighted arithmetic mean of member probabilities.
class EnsembleModel final : public Model {
 public:
  // Weights default to uniform; when given they must be nonnegative, one per
  // member, and sum to 1 within 1e-9.
  explicit EnsembleModel(std::vector<ModelPtr> members,
                         std::optional<std::vector<double>> weights = std::nullopt);

  ModelKind kind() const override { return ModelKind::kEnsemble; }
  std::size_t input_width() const override;
  ProbMatrix Predict(const FeatureMatrix& batch) const override;
  // JSON manifest referencing members by content hash.
  std::string Serialize() const override;
  static EnsembleModel Deserialize(std::string_view bytes,
                                   const BlobResolver& resolver);

  const std::vector<ModelPtr>& members() const { return members_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<ModelPtr> members_;
  std::vector<double> weights_;
};

}  // namespace latkd

#endif  // LATKD_ENSEMBLE_H_
