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

#include "latkd/mlp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "latkd/errors.h"
#include "latkd/eval.h"
#include "latkd/hash.h"
#include "latkd/io.h"

namespace latkd {
namespace {

using nlohmann::json;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kDropoutStream = 4;
constexpr Eigen::Index kPredictChunkRows = 8192;

double Clamp(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

// Clamped probability row raised to 1/T and renormalized. Identity (after
// clamping) at T = 1.
Eigen::RowVector2d Soften(const Eigen::RowVector2d& row, double temperature) {
  Eigen::RowVector2d c(Clamp(row(0)), Clamp(row(1)));
  if (temperature == 1.0) return c;
  Eigen::RowVector2d s(std::pow(c(0), 1.0 / temperature),
                       std::pow(c(1), 1.0 / temperature));
  s /= s.sum();
  return Eigen::RowVector2d(Clamp(s(0)), Clamp(s(1)));
}

double RowKl(const Eigen::RowVector2d& teacher, const Eigen::RowVector2d& student) {
  return teacher(0) * (std::log(teacher(0)) - std::log(student(0))) +
         teacher(1) * (std::log(teacher(1)) - std::log(student(1)));
}

// Row-wise softmax of two-column logits.
ProbMatrix Softmax(const Eigen::MatrixXd& logits) {
  ProbMatrix p(logits.rows(), 2);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = std::max(logits(r, 0), logits(r, 1));
    const double e0 = std::exp(logits(r, 0) - m);
    const double e1 = std::exp(logits(r, 1) - m);
    const double s = e0 + e1;
    p(r, 0) = e0 / s;
    p(r, 1) = e1 / s;
  }
  return p;
}

void CheckLabels(std::span<const int> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "row " + std::to_string(i) + " has no 0/1 label");
    }
  }
}

struct ForwardCache {
  // inputs[l] feeds dense layer l; inputs[0] is the batch.
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
  std::vector<BoolArray> relu_masks;
  // Scaled dropout masks (0 or 1/keep); empty when dropout is off.
  std::vector<Eigen::MatrixXd> dropout;
  Eigen::MatrixXd bn_normalized;  // xhat
  Eigen::RowVectorXd bn_inv_std;
  MlpBatchStatistics bn_batch;
  ProbMatrix probs;
};

void ForwardPass(const MlpModel& model, const Eigen::MatrixXd& batch,
                 MlpMode bn_mode, Rng* dropout_rng, ForwardCache& cache) {
  const MlpArchitecture& arch = model.architecture();
  const MlpParameters& params = model.parameters();
  CheckInputWidth(arch.input_dim, batch.cols());
  const Eigen::Index n = batch.rows();
  const std::size_t hidden = arch.hidden.size();
  if (bn_mode == MlpMode::kTrain && arch.batch_norm_after_first && n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "train-mode forward needs at least 2 rows for batch statistics");
  }
  cache.inputs.assign(1, batch);
  cache.pre_activations.clear();
  cache.relu_masks.clear();
  cache.dropout.clear();

  for (std::size_t l = 0; l < hidden; ++l) {
    Eigen::MatrixXd z = cache.inputs.back() * params.weights[l];
    z.rowwise() += params.biases[l];
    BoolArray mask = z.array() > 0.0;
    Eigen::MatrixXd h = z.cwiseMax(0.0);
    cache.pre_activations.push_back(std::move(z));
    cache.relu_masks.push_back(std::move(mask));

    if (l == 0 && arch.batch_norm_after_first) {
      Eigen::RowVectorXd mean;
      Eigen::RowVectorXd var;
      if (bn_mode == MlpMode::kTrain) {
        mean = h.colwise().mean();
        var = (h.rowwise() - mean).array().square().colwise().mean();
      } else {
        mean = model.running_mean();
        var = model.running_var();
      }
      cache.bn_batch = {mean, var};
      cache.bn_inv_std = (var.array() + model.bn_epsilon()).rsqrt().matrix();
      cache.bn_normalized =
          ((h.rowwise() - mean).array().rowwise() * cache.bn_inv_std.array())
              .matrix();
      h = (cache.bn_normalized.array().rowwise() * params.bn_gamma.array())
              .matrix();
      h.rowwise() += params.bn_beta;
    }

    if (dropout_rng != nullptr && arch.dropout_keep_prob < 1.0) {
      const double keep = arch.dropout_keep_prob;
      Eigen::MatrixXd d(h.rows(), h.cols());
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
          d(r, c) = dropout_rng->Bernoulli(keep) ? 1.0 / keep : 0.0;
        }
      }
      h.array() *= d.array();
      cache.dropout.push_back(std::move(d));
    }
    cache.inputs.push_back(std::move(h));
  }
  Eigen::MatrixXd logits = cache.inputs.back() * params.weights[hidden];
  logits.rowwise() += params.biases[hidden];
  cache.probs = Softmax(logits);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void MlpArchitecture::Validate() const {
  if (input_dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MLP input_dim must be positive");
  }
  if (hidden.empty() ||
      std::any_of(hidden.begin(), hidden.end(), [](auto w) { return w == 0; })) {
    throw Error(ErrorCode::kInvalidArgument,
                "MLP needs at least one hidden layer of positive width");
  }
  if (!(dropout_keep_prob > 0.0 && dropout_keep_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dropout_keep_prob must be in (0, 1]");
  }
}

json MlpArchitecture::ToJson() const {
  return {{"input_dim", input_dim},
          {"hidden", hidden},
          {"batch_norm_after_first", batch_norm_after_first},
          {"dropout_keep_prob", dropout_keep_prob}};
}

MlpArchitecture MlpArchitecture::FromJson(const json& doc) {
  MlpArchitecture arch;
  arch.input_dim = doc.value("input_dim", arch.input_dim);
  arch.hidden = doc.value("hidden", arch.hidden);
  arch.batch_norm_after_first =
      doc.value("batch_norm_after_first", arch.batch_norm_after_first);
  arch.dropout_keep_prob = doc.value("dropout_keep_prob", arch.dropout_keep_prob);
  return arch;
}

json MlpTrainOptions::ToJson() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"momentum", momentum},
          {"max_epochs", max_epochs},
          {"early_stop", early_stop},
          {"validation_fraction", validation_fraction},
          {"patience", patience},
          {"bn_momentum", bn_momentum},
          {"bn_epsilon", bn_epsilon},
          {"seed", seed}};
}

MlpTrainOptions MlpTrainOptions::FromJson(const json& doc) {
  MlpTrainOptions o;
  o.learning_rate = doc.value("learning_rate", o.learning_rate);
  o.batch_size = doc.value("batch_size", o.batch_size);
  o.momentum = doc.value("momentum", o.momentum);
  o.max_epochs = doc.value("max_epochs", o.max_epochs);
  o.early_stop = doc.value("early_stop", o.early_stop);
  o.validation_fraction = doc.value("validation_fraction", o.validation_fraction);
  o.patience = doc.value("patience", o.patience);
  o.bn_momentum = doc.value("bn_momentum", o.bn_momentum);
  o.bn_epsilon = doc.value("bn_epsilon", o.bn_epsilon);
  o.seed = doc.value("seed", o.seed);
  return o;
}

// ---------------------------------------------------------------------------
// Loss

void CompositeLossSpec::Validate(std::size_t rows) const {
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) {
    throw Error(ErrorCode::kInvalidArgument, "kl_weight must be finite and >= 0");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  }
  for (std::size_t i = 0; i < teacher_outputs.size(); ++i) {
    if (static_cast<std::size_t>(teacher_outputs[i].rows()) != rows) {
      throw Error(ErrorCode::kInvalidArgument,
                  "teacher " + std::to_string(i) + " has " +
                      std::to_string(teacher_outputs[i].rows()) +
                      " rows, expected " + std::to_string(rows));
    }
    ValidateDistributionRows(teacher_outputs[i],
                             "teacher " + std::to_string(i));
  }
}

CompositeLossSpec CompositeLossSpec::SelectRows(
    std::span<const std::size_t> rows) const {
  CompositeLossSpec out{{}, kl_weight, temperature};
  for (const ProbMatrix& t : teacher_outputs) {
    ProbMatrix s(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) = t.row(static_cast<Eigen::Index>(rows[i]));
    }
    out.teacher_outputs.push_back(std::move(s));
  }
  return out;
}

double MeanSummedKl(const ProbMatrix& predictions, const CompositeLossSpec& spec) {
  const Eigen::Index n = predictions.rows();
  if (n == 0) return 0.0;
  double kl_sum = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::RowVector2d student = Soften(predictions.row(r), spec.temperature);
    for (const ProbMatrix& t : spec.teacher_outputs) {
      kl_sum += RowKl(Soften(t.row(r), spec.temperature), student);
    }
  }
  return kl_sum / static_cast<double>(n);
}

double CompositeLoss(const ProbMatrix& predictions, std::span<const int> labels,
                     const CompositeLossSpec& spec) {
  const Eigen::Index n = predictions.rows();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "loss needs one label per prediction row and at least one row");
  }
  CheckLabels(labels);
  spec.Validate(static_cast<std::size_t>(n));
  double ce_sum = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    ce_sum -= std::log(Clamp(predictions(r, labels[static_cast<std::size_t>(r)])));
  }
  double kl_sum = 0.0;
  if (!spec.teacher_outputs.empty()) {
    kl_sum = MeanSummedKl(predictions, spec) * static_cast<double>(n);
  }
  return (ce_sum + spec.kl_weight * kl_sum) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::span<double>> MlpParameters::Tensors() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
    out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
    if (l == 0 && bn_gamma.size() > 0) {
      out.emplace_back(bn_gamma.data(), static_cast<std::size_t>(bn_gamma.size()));
      out.emplace_back(bn_beta.data(), static_cast<std::size_t>(bn_beta.size()));
    }
  }
  return out;
}

std::size_t MlpParameters::Size() const {
  std::size_t total = static_cast<std::size_t>(bn_gamma.size() + bn_beta.size());
  for (const auto& w : weights) total += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) total += static_cast<std::size_t>(b.size());
  return total;
}

MlpParameters MlpParameters::ZerosLike() const {
  MlpParameters z;
  for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Eigen::RowVectorXd::Zero(b.size()));
  z.bn_gamma = Eigen::RowVectorXd::Zero(bn_gamma.size());
  z.bn_beta = Eigen::RowVectorXd::Zero(bn_beta.size());
  return z;
}

// ---------------------------------------------------------------------------
// Model

MlpModel MlpModel::Initialize(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.Validate();
  MlpModel model;
  model.arch_ = arch;
  Rng rng(DeriveSeed(seed, kInitStream));
  std::size_t fan_in = arch.input_dim;
  std::vector<std::size_t> widths = arch.hidden;
  widths.push_back(2);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_out = widths[l];
    const bool output = l + 1 == widths.size();
    const double limit =
        output ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
               : std::sqrt(6.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = rng.Uniform(-limit, limit);
      }
    }
    model.params_.weights.push_back(std::move(w));
    model.params_.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  if (arch.batch_norm_after_first) {
    const auto width = static_cast<Eigen::Index>(arch.hidden.front());
    model.params_.bn_gamma = Eigen::RowVectorXd::Ones(width);
    model.params_.bn_beta = Eigen::RowVectorXd::Zero(width);
    model.running_mean_ = Eigen::RowVectorXd::Zero(width);
    model.running_var_ = Eigen::RowVectorXd::Ones(width);
  }
  return model;
}

ProbMatrix MlpModel::Forward(const FeatureMatrix& batch, MlpMode mode,
                             Rng* dropout_rng) const {
  CheckInputWidth(arch_.input_dim, batch.cols());
  ForwardCache cache;
  if (mode == MlpMode::kTrain) {
    ForwardPass(*this, Eigen::MatrixXd(batch), mode, dropout_rng, cache);
    return cache.probs;
  }
  ProbMatrix out(batch.rows(), 2);
  for (Eigen::Index start = 0; start < batch.rows(); start += kPredictChunkRows) {
    const Eigen::Index len = std::min(kPredictChunkRows, batch.rows() - start);
    ForwardPass(*this, Eigen::MatrixXd(batch.middleRows(start, len)), mode,
                nullptr, cache);
    out.middleRows(start, len) = cache.probs;
  }
  return out;
}

namespace {

void PutTensor(ByteWriter& w, const double* data, Eigen::Index rows,
               Eigen::Index cols) {
  w.Put<std::uint64_t>(static_cast<std::uint64_t>(rows));
  w.Put<std::uint64_t>(static_cast<std::uint64_t>(cols));
  w.PutBytes(std::string_view(reinterpret_cast<const char*>(data),
                              sizeof(double) * static_cast<std::size_t>(rows * cols)));
}

template <typename Tensor>
void GetTensor(ByteReader& r, Tensor& t) {
  const auto rows = r.Get<std::uint64_t>();
  const auto cols = r.Get<std::uint64_t>();
  if (rows != static_cast<std::uint64_t>(t.rows()) ||
      cols != static_cast<std::uint64_t>(t.cols())) {
    throw Error(ErrorCode::kParse, "MLP tensor shape does not match architecture");
  }
  std::string_view raw = r.GetBytes(sizeof(double) * rows * cols);
  std::memcpy(t.data(), raw.data(), raw.size());
}

}  // namespace

std::string MlpModel::Serialize() const {
  ByteWriter w;
  w.PutBytes("LATKDMLP");
  w.Put<std::uint32_t>(1);
  const json header = {{"architecture", arch_.ToJson()},
                       {"bn_epsilon", bn_epsilon_},
                       {"config_hash", config_hash_}};
  w.PutString(header.dump());
  for (std::size_t l = 0; l < params_.weights.size(); ++l) {
    PutTensor(w, params_.weights[l].data(), params_.weights[l].rows(),
              params_.weights[l].cols());
    PutTensor(w, params_.biases[l].data(), 1, params_.biases[l].size());
  }
  if (arch_.batch_norm_after_first) {
    PutTensor(w, params_.bn_gamma.data(), 1, params_.bn_gamma.size());
    PutTensor(w, params_.bn_beta.data(), 1, params_.bn_beta.size());
    PutTensor(w, running_mean_.data(), 1, running_mean_.size());
    PutTensor(w, running_var_.data(), 1, running_var_.size());
  }
  return w.Release();
}

MlpModel MlpModel::Deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.GetBytes(8) != "LATKDMLP") {
    throw Error(ErrorCode::kParse, "not an MLP model");
  }
  if (r.Get<std::uint32_t>() != 1) {
    throw Error(ErrorCode::kParse, "unsupported MLP model version");
  }
  json header;
  try {
    header = json::parse(r.GetString());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad MLP header: ") + e.what());
  }
  MlpModel model = Initialize(MlpArchitecture::FromJson(header.at("architecture")), 0);
  model.bn_epsilon_ = header.value("bn_epsilon", 1e-5);
  model.config_hash_ = header.value("config_hash", "");
  for (std::size_t l = 0; l < model.params_.weights.size(); ++l) {
    GetTensor(r, model.params_.weights[l]);
    GetTensor(r, model.params_.biases[l]);
  }
  if (model.arch_.batch_norm_after_first) {
    GetTensor(r, model.params_.bn_gamma);
    GetTensor(r, model.params_.bn_beta);
    GetTensor(r, model.running_mean_);
    GetTensor(r, model.running_var_);
  }
  if (!r.AtEnd()) throw Error(ErrorCode::kParse, "trailing bytes in MLP model");
  return model;
}

// ---------------------------------------------------------------------------
// Gradients

MlpGradientResult ComputeMlpGradients(const MlpModel& model,
                                      const Eigen::MatrixXd& batch,
                                      std::span<const int> labels,
                                      const CompositeLossSpec& spec,
                                      MlpMode bn_mode, Rng* dropout_rng) {
  ForwardCache cache;
  ForwardPass(model, batch, bn_mode, dropout_rng, cache);
  const MlpArchitecture& arch = model.architecture();
  const MlpParameters& params = model.parameters();
  const Eigen::Index n = batch.rows();
  const std::size_t hidden = arch.hidden.size();

  MlpGradientResult result;
  result.loss = CompositeLoss(cache.probs, labels, spec);
  result.gradients = params.ZerosLike();
  result.bn_batch = cache.bn_batch;
  result.relu_masks = cache.relu_masks;

  // d loss / d logits, already divided by the batch size.
  Eigen::MatrixXd delta(n, 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double kl_scale = spec.kl_weight / spec.temperature;
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::RowVector2d g = cache.probs.row(r);
    g(labels[static_cast<std::size_t>(r)]) -= 1.0;
    if (!spec.teacher_outputs.empty() && spec.kl_weight != 0.0) {
      const Eigen::RowVector2d student =
          spec.temperature == 1.0 ? Eigen::RowVector2d(cache.probs.row(r))
                                  : Soften(cache.probs.row(r), spec.temperature);
      for (const ProbMatrix& t : spec.teacher_outputs) {
        const Eigen::RowVector2d teacher =
            spec.temperature == 1.0 ? Eigen::RowVector2d(t.row(r))
                                    : Soften(t.row(r), spec.temperature);
        g += kl_scale * (student - teacher);
      }
    }
    delta.row(r) = g * inv_n;
  }

  MlpParameters& grads = result.gradients;
  grads.weights[hidden].noalias() = cache.inputs[hidden].transpose() * delta;
  grads.biases[hidden] = delta.colwise().sum();
  Eigen::MatrixXd upstream = delta * params.weights[hidden].transpose();

  for (std::size_t li = hidden; li-- > 0;) {
    if (!cache.dropout.empty()) upstream.array() *= cache.dropout[li].array();
    if (li == 0 && arch.batch_norm_after_first) {
      const Eigen::MatrixXd& xhat = cache.bn_normalized;
      grads.bn_gamma = (upstream.array() * xhat.array()).colwise().sum().matrix();
      grads.bn_beta = upstream.colwise().sum();
      Eigen::MatrixXd dxhat =
          (upstream.array().rowwise() * params.bn_gamma.array()).matrix();
      if (bn_mode == MlpMode::kTrain) {
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat =
            (dxhat.array() * xhat.array()).colwise().sum().matrix();
        Eigen::MatrixXd centered = dxhat * static_cast<double>(n);
        centered.rowwise() -= sum_dxhat;
        centered -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
        upstream = ((centered.array().rowwise() * cache.bn_inv_std.array()) * inv_n)
                       .matrix();
      } else {
        upstream = (dxhat.array().rowwise() * cache.bn_inv_std.array()).matrix();
      }
    }
    upstream = (upstream.array() * cache.relu_masks[li].cast<double>()).matrix();
    grads.weights[li].noalias() = cache.inputs[li].transpose() * upstream;
    grads.biases[li] = upstream.colwise().sum();
    if (li > 0) upstream = upstream * params.weights[li].transpose();
  }
  return result;
}

GradientCheckResult GradientCheck(const MlpModel& model,
                                  const FeatureMatrix& batch,
                                  std::span<const int> labels,
                                  const CompositeLossSpec& spec,
                                  const GradientCheckOptions& options) {
  const Eigen::MatrixXd x = batch;
  MlpModel probe = model;
  const MlpGradientResult analytic =
      ComputeMlpGradients(probe, x, labels, spec, MlpMode::kInfer, nullptr);
  MlpParameters grads = analytic.gradients;
  std::vector<std::span<double>> values = probe.mutable_parameters().Tensors();
  std::vector<std::span<double>> grad_values = grads.Tensors();

  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& t : values) {
    offsets.push_back(total);
    total += t.size();
  }

  auto loss_at = [&](std::vector<BoolArray>& masks) {
    ForwardCache cache;
    ForwardPass(probe, x, MlpMode::kInfer, nullptr, cache);
    masks = cache.relu_masks;
    return CompositeLoss(cache.probs, labels, spec);
  };
  auto same_masks = [&](const std::vector<BoolArray>& a) {
    for (std::size_t l = 0; l < a.size(); ++l) {
      if ((a[l] != analytic.relu_masks[l]).any()) return false;
    }
    return true;
  };

  Rng rng(options.seed);
  const std::vector<std::size_t> order = Permutation(total, rng);
  GradientCheckResult result;
  for (std::size_t flat : order) {
    if (result.checked >= options.samples) break;
    const auto t = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const std::size_t i = flat - offsets[t];
    double& v = values[t][i];
    const double original = v;
    std::vector<BoolArray> masks_plus;
    std::vector<BoolArray> masks_minus;
    v = original + options.step;
    const double plus = loss_at(masks_plus);
    v = original - options.step;
    const double minus = loss_at(masks_minus);
    v = original;
    if (!same_masks(masks_plus) || !same_masks(masks_minus)) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = grad_values[t][i];
    // Entries below 1e-6 in magnitude are compared on an absolute scale.
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(a - numeric) / scale);
    ++result.checked;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

Split StratifiedSplit(std::span<const int> labels, double fraction,
                      std::uint64_t seed) {
  Split split;
  Rng rng(DeriveSeed(seed, kSplitStream));
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    rng.Shuffle(std::span<std::size_t>(members));
    auto take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(members.size())));
    if (take == 0 && members.size() >= 2) take = 1;
    if (take >= members.size()) take = members.size() > 0 ? members.size() - 1 : 0;
    split.validation.insert(split.validation.end(), members.begin(),
                            members.begin() + static_cast<std::ptrdiff_t>(take));
    split.train.insert(split.train.end(),
                       members.begin() + static_cast<std::ptrdiff_t>(take),
                       members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

std::string TrainingConfigHash(const MlpArchitecture& arch,
                               const MlpTrainOptions& options) {
  return Sha256Hex(json{{"architecture", arch.ToJson()},
                        {"options", options.ToJson()}}
                       .dump());
}

}  // namespace

MlpTrainResult TrainMlp(const DesignMatrix& data, const CompositeLossSpec& spec,
                        const MlpArchitecture& arch,
                        const MlpTrainOptions& options) {
  MlpArchitecture resolved = arch;
  resolved.input_dim = data.cols();
  return TrainMlp(MlpModel::Initialize(resolved, options.seed), data, spec,
                  options);
}

MlpTrainResult TrainMlp(MlpModel model, const DesignMatrix& data,
                        const CompositeLossSpec& spec,
                        const MlpTrainOptions& options) {
  data.Validate();
  const std::size_t n = data.rows();
  CheckInputWidth(model.input_width(), data.features.cols());
  CheckLabels(data.labels);
  const ClassCounts counts = data.CountClasses();
  if (counts.normal == 0 || counts.anomalous == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "training data must contain both classes");
  }
  spec.Validate(n);
  if (options.batch_size == 0 || options.max_epochs <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch_size and max_epochs must be positive");
  }
  model.set_bn_epsilon(options.bn_epsilon);
  model.set_config_hash(TrainingConfigHash(model.architecture(), options));

  Split split;
  bool early_stop = options.early_stop;
  if (early_stop) {
    split = StratifiedSplit(data.labels, options.validation_fraction, options.seed);
    const DesignMatrix probe = data.SelectRows(split.validation);
    const ClassCounts vc = probe.CountClasses();
    if (vc.anomalous == 0 || vc.normal == 0 || split.train.size() < 2) {
      early_stop = false;
    }
  }
  if (!early_stop) {
    split.train.resize(n);
    std::iota(split.train.begin(), split.train.end(), std::size_t{0});
    split.validation.clear();
  }

  const DesignMatrix train = data.SelectRows(split.train);
  const CompositeLossSpec train_spec = spec.SelectRows(split.train);
  DesignMatrix validation;
  if (early_stop) validation = data.SelectRows(split.validation);
  const std::size_t m = train.rows();

  MlpParameters velocity = model.parameters().ZerosLike();
  Rng dropout_rng(DeriveSeed(options.seed, kDropoutStream));
  const bool has_bn = model.architecture().batch_norm_after_first;

  MlpTrainResult result;
  result.stats.rows_consumed = n;
  MlpModel best = model;
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    Rng shuffle_rng(DeriveSeed(options.seed, kShuffleStream,
                               static_cast<std::uint64_t>(epoch)));
    const std::vector<std::size_t> order = Permutation(m, shuffle_rng);
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < m; start += options.batch_size) {
      batches.emplace_back(start, std::min(options.batch_size, m - start));
    }
    // A trailing single row cannot produce batch statistics; fold it into the
    // previous batch.
    if (batches.size() > 1 && batches.back().second == 1) {
      batches[batches.size() - 2].second += 1;
      batches.pop_back();
    }

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto [start, len] = batches[b];
      std::span<const std::size_t> rows(order.data() + start, len);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(len), train.features.cols());
      std::vector<int> y(len);
      for (std::size_t i = 0; i < len; ++i) {
        x.row(static_cast<Eigen::Index>(i)) =
            train.features.row(static_cast<Eigen::Index>(rows[i]));
        y[i] = train.labels[rows[i]];
      }
      const CompositeLossSpec batch_spec = train_spec.SelectRows(rows);
      MlpGradientResult step = ComputeMlpGradients(
          model, x, y, batch_spec, MlpMode::kTrain, &dropout_rng);
      if (!std::isfinite(step.loss)) {
        throw Error(ErrorCode::kTraining,
                    "non-finite loss at epoch " + std::to_string(epoch) +
                        " batch " + std::to_string(b));
      }
      epoch_loss += step.loss * static_cast<double>(len);

      std::vector<std::span<double>> p = model.mutable_parameters().Tensors();
      std::vector<std::span<double>> v = velocity.Tensors();
      std::vector<std::span<double>> g = step.gradients.Tensors();
      for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          v[t][i] = options.momentum * v[t][i] - options.learning_rate * g[t][i];
          p[t][i] += v[t][i];
        }
      }
      if (has_bn) {
        const double mom = options.bn_momentum;
        model.mutable_running_mean() =
            mom * model.running_mean() + (1.0 - mom) * step.bn_batch.mean;
        model.mutable_running_var() =
            mom * model.running_var() + (1.0 - mom) * step.bn_batch.var;
      }
    }
    epoch_loss /= static_cast<double>(m);
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::kTraining,
                  "non-finite loss at epoch " + std::to_string(epoch));
    }
    result.stats.loss_trace.push_back(epoch_loss);
    result.stats.epochs_run = epoch;

    if (early_stop) {
      const double score = Auprc(PositiveScores(model.Predict(validation.features)),
                                 validation.labels);
      if (score > best_score) {
        best_score = score;
        best = model;
        result.stats.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= options.patience) {
        break;
      }
    }
  }
  if (early_stop) {
    result.model = std::move(best);
  } else {
    result.model = std::move(model);
    result.stats.best_epoch = result.stats.epochs_run;
  }
  return result;
}

}  // namespace latkd
