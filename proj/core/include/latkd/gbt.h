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

#ifndef LATKD_GBT_H_
#define LATKD_GBT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/data.h"
#include "latkd/mlp.h"
#include "latkd/model.h"

namespace latkd {

struct GbtConfig {
  int n_estimators = 200;
  double learning_rate = 0.1;
  int max_depth = 3;
  double min_child_weight = 2.89;
  double gamma = 0.9;
  double reg_lambda = 40.0;
  double reg_alpha = 3.0;
  double subsample = 0.94;
  double colsample_bytree = 0.8;
  std::uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static GbtConfig FromJson(const nlohmann::json& doc);
};

// Flat node; children are indices into Tree::nodes. Rows with
// value < threshold go left; rows equal to kMissingMarker follow
// missing_left.
struct TreeNode {
  bool is_leaf = true;
  double weight = 0.0;  // leaf logit increment
  int feature = -1;
  double threshold = 0.0;
  bool missing_left = true;
  int left = -1;
  int right = -1;
  double gain = 0.0;   // split gain (gamma already subtracted)
  double cover = 0.0;  // hessian sum of the training rows at this node
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double Evaluate(std::span<const double> row) const;
  template <typename RowExpr>
  double EvaluateRow(const RowExpr& row) const {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf) {
      const TreeNode& node = nodes[static_cast<std::size_t>(at)];
      const double v = row(node.feature);
      const bool left =
          v == kMissingMarker ? node.missing_left : v < node.threshold;
      at = left ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].weight;
  }
  int Depth() const;
};

struct GradHess {
  std::vector<double> grad;
  std::vector<double> hess;
};

// Per row: grad = (p - y) + w/T * sum_i (p_T - q_i,T),
//          hess = p(1-p) + w/T^2 * n_teachers * p_T(1-p_T),
// where q_i is teacher i's positive-class probability and x_T the
// temperature-scaled probability. At T = 1 this is the logistic gradient plus
// kl_weight * sum_i (p - q_i).
GradHess ComputeGradHess(std::span<const double> predictions,
                         std::span<const int> labels,
                         const std::vector<ProbMatrix>& teachers,
                         double kl_weight, double temperature = 1.0);

// -(sign G) max(|G| - alpha, 0) / (H + lambda)
double LeafWeight(double g_sum, double h_sum, const GbtConfig& config);

// 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma
double SplitGain(double gl, double hl, double gr, double hr, double g, double h,
                 const GbtConfig& config);

// Exact greedy split search over `rows` restricted to `features`.
// Features are scanned in ascending index order and thresholds ascending, so
// equal gains resolve to the lowest feature, then the lowest threshold, then
// missing-left.
Tree BuildTree(const FeatureMatrix& features, std::span<const std::size_t> rows,
               std::span<const std::size_t> feature_subset,
               std::span<const double> grad, std::span<const double> hess,
               const GbtConfig& config);

class GbtModel final : public Model {
 public:
  GbtModel() = default;
  GbtModel(GbtConfig config, std::size_t input_width, double base_score,
           std::vector<Tree> trees);

  ModelKind kind() const override { return ModelKind::kGbt; }
  std::size_t input_width() const override { return input_width_; }
  ProbMatrix Predict(const FeatureMatrix& batch) const override;
  std::string Serialize() const override;
  static GbtModel Deserialize(std::string_view bytes);

  // sigmoid(base_score + learning_rate * sum of tree outputs)
  std::vector<double> Score(const FeatureMatrix& batch) const;
  std::vector<double> Margins(const FeatureMatrix& batch) const;

  const GbtConfig& config() const { return config_; }
  double base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }

 private:
  GbtConfig config_;
  std::size_t input_width_ = 0;
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
};

struct GbtTrainResult {
  GbtModel model;
  std::size_t rows_consumed = 0;
  // Composite loss on the full training set after each round.
  std::vector<double> loss_trace;
};

// Exactly config.n_estimators rounds of second-order boosting on the
// composite loss. Row and column sampling are derived from config.seed and
// the round number.
GbtTrainResult TrainGbt(const DesignMatrix& data, const CompositeLossSpec& spec,
                        const GbtConfig& config);

}  // namespace latkd

#endif  // LATKD_GBT_H_
