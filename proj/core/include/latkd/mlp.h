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

#ifndef LATKD_MLP_H_
#define LATKD_MLP_H_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/data.h"
#include "latkd/model.h"
#include "latkd/random.h"

namespace latkd {

// Dense(h0, relu) -> [BatchNorm] -> Dropout -> Dense(h1, relu) -> Dropout
// -> ... -> Dense(2, softmax).
struct MlpArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {400, 400};
  bool batch_norm_after_first = true;
  double dropout_keep_prob = 0.5;

  void Validate() const;
  nlohmann::json ToJson() const;
  static MlpArchitecture FromJson(const nlohmann::json& doc);
};

struct MlpTrainOptions {
  double learning_rate = 0.01;
  std::size_t batch_size = 512;
  double momentum = 0.9;
  int max_epochs = 100;
  bool early_stop = true;
  double validation_fraction = 0.1;
  int patience = 10;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;
  std::uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static MlpTrainOptions FromJson(const nlohmann::json& doc);
};

// Cross-entropy plus summed KL toward earlier models: teacher outputs are row-aligned
// with the training rows.
struct CompositeLossSpec {
  std::vector<ProbMatrix> teacher_outputs;
  double kl_weight = 1.0;
  double temperature = 1.0;

  // Throws kInvalidArgument on misaligned or non-distribution teacher rows.
  void Validate(std::size_t rows) const;
  CompositeLossSpec SelectRows(std::span<const std::size_t> rows) const;
};

inline constexpr double kProbabilityClamp = 1e-7;

// Mean over rows of CE(hard label, prediction) plus kl_weight times the sum
// over teachers of KL(teacher || prediction). Predictions are temperature-1
// probabilities; at temperature T both sides are sharpened/softened as
// p^(1/T) before the KL term.
double CompositeLoss(const ProbMatrix& predictions, std::span<const int> labels,
                     const CompositeLossSpec& spec);

// Mean per-row sum of KL terms (the slope of CompositeLoss in kl_weight).
double MeanSummedKl(const ProbMatrix& predictions, const CompositeLossSpec& spec);

// Trainable parameters. Gradients use the same layout.
struct MlpParameters {
  std::vector<Eigen::MatrixXd> weights;     // in x out, hidden layers then output
  std::vector<Eigen::RowVectorXd> biases;
  Eigen::RowVectorXd bn_gamma;
  Eigen::RowVectorXd bn_beta;

  // Flat views over every tensor in a fixed order.
  std::vector<std::span<double>> Tensors();
  std::size_t Size() const;
  MlpParameters ZerosLike() const;
};

enum class MlpMode { kTrain, kInfer };

class MlpModel final : public Model {
 public:
  MlpModel() = default;
  // He-uniform hidden weights, Glorot-uniform output weights, zero biases,
  // gamma = 1, beta = 0, running mean 0 and variance 1.
  static MlpModel Initialize(const MlpArchitecture& arch, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kMlp; }
  std::size_t input_width() const override { return arch_.input_dim; }
  ProbMatrix Predict(const FeatureMatrix& batch) const override {
    return Forward(batch, MlpMode::kInfer);
  }
  std::string Serialize() const override;
  static MlpModel Deserialize(std::string_view bytes);

  // kTrain normalizes with batch statistics (needs >= 2 rows) and applies
  // dropout when `dropout_rng` is given. Running statistics are not touched.
  ProbMatrix Forward(const FeatureMatrix& batch, MlpMode mode,
                     Rng* dropout_rng = nullptr) const;

  const MlpArchitecture& architecture() const { return arch_; }
  const MlpParameters& parameters() const { return params_; }
  MlpParameters& mutable_parameters() { return params_; }
  const Eigen::RowVectorXd& running_mean() const { return running_mean_; }
  const Eigen::RowVectorXd& running_var() const { return running_var_; }
  Eigen::RowVectorXd& mutable_running_mean() { return running_mean_; }
  Eigen::RowVectorXd& mutable_running_var() { return running_var_; }
  double bn_epsilon() const { return bn_epsilon_; }
  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }
  void set_bn_epsilon(double eps) { bn_epsilon_ = eps; }

 private:
  MlpArchitecture arch_;
  MlpParameters params_;
  Eigen::RowVectorXd running_mean_;
  Eigen::RowVectorXd running_var_;
  double bn_epsilon_ = 1e-5;
  std::string config_hash_;
};

struct MlpBatchStatistics {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
};

struct MlpGradientResult {
  double loss = 0.0;
  MlpParameters gradients;
  // Batch statistics of the normalized layer (train-mode normalization only).
  MlpBatchStatistics bn_batch;
  // Relu on/off pattern of every hidden unit, used to detect kinks.
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> relu_masks;
};

// Loss and analytic parameter gradients of CompositeLoss on one batch.
// `spec` rows are aligned with `batch`. With `dropout_rng` null no
// dropout is applied.
MlpGradientResult ComputeMlpGradients(const MlpModel& model,
                                      const Eigen::MatrixXd& batch,
                                      std::span<const int> labels,
                                      const CompositeLossSpec& spec,
                                      MlpMode bn_mode, Rng* dropout_rng);

struct GradientCheckOptions {
  double step = 1e-4;
  std::size_t samples = 128;
  std::uint64_t seed = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Parameters skipped because the +/- step flipped a relu.
  std::size_t skipped_kinks = 0;
};

// Central finite differences against ComputeMlpGradients with dropout off and
// inference-mode normalization.
GradientCheckResult GradientCheck(const MlpModel& model,
                                  const FeatureMatrix& batch,
                                  std::span<const int> labels,
                                  const CompositeLossSpec& spec,
                                  const GradientCheckOptions& options = {});

struct TrainStats {
  std::size_t rows_consumed = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::vector<double> loss_trace;
};

struct MlpTrainResult {
  MlpModel model;
  TrainStats stats;
};

// Mini-batch SGD with momentum on CompositeLoss. Deterministic in
// options.seed. With early_stop, a stratified validation split is held out
// and the weights with the best validation AUPRC are returned.
MlpTrainResult TrainMlp(const DesignMatrix& data, const CompositeLossSpec& spec,
                        const MlpArchitecture& arch,
                        const MlpTrainOptions& options);

// Same, continuing from `initial` instead of a fresh initialization.
MlpTrainResult TrainMlp(MlpModel initial, const DesignMatrix& data,
                        const CompositeLossSpec& spec,
                        const MlpTrainOptions& options);

}  // namespace latkd

#endif  // LATKD_MLP_H_
