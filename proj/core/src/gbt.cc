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

#include "latkd/gbt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "latkd/errors.h"
#include "latkd/random.h"

namespace latkd {
namespace {

using nlohmann::json;

constexpr std::uint64_t kRowSampleStream = 1;
constexpr std::uint64_t kColumnSampleStream = 2;

double Sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

double SoftenBinary(double q, double temperature) {
  if (temperature == 1.0) return q;
  const double a = std::pow(std::clamp(q, kProbabilityClamp, 1.0 - kProbabilityClamp),
                            1.0 / temperature);
  const double b = std::pow(
      std::clamp(1.0 - q, kProbabilityClamp, 1.0 - kProbabilityClamp),
      1.0 / temperature);
  return a / (a + b);
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool missing_left = true;
};

// Presorted column orders over all rows of a feature matrix, reused for every
// tree of a boosting run.
class ExactSplitter {
 public:
  explicit ExactSplitter(const FeatureMatrix& x) : x_(x) {
    const auto n = static_cast<std::size_t>(x.rows());
    sorted_.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::vector<std::uint32_t>& order = sorted_[static_cast<std::size_t>(f)];
      order.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (x(static_cast<Eigen::Index>(r), f) != kMissingMarker) {
          order.push_back(static_cast<std::uint32_t>(r));
        }
      }
      std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return x(a, f) < x(b, f);
      });
    }
  }

  Tree Build(std::span<const std::size_t> rows,
             std::span<const std::size_t> features, std::span<const double> grad,
             std::span<const double> hess, const GbtConfig& config) const;

 private:
  const FeatureMatrix& x_;
  std::vector<std::vector<std::uint32_t>> sorted_;
};

Tree ExactSplitter::Build(std::span<const std::size_t> rows_in,
                          std::span<const std::size_t> features,
                          std::span<const double> grad,
                          std::span<const double> hess,
                          const GbtConfig& config) const {
  const auto n = static_cast<std::size_t>(x_.rows());
  std::vector<std::size_t> rows(rows_in.begin(), rows_in.end());
  std::sort(rows.begin(), rows.end());
  std::vector<std::size_t> feature_order(features.begin(), features.end());
  std::sort(feature_order.begin(), feature_order.end());

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, -1);
  for (std::size_t r : rows) node_of[r] = 0;

  // Sums over the rows of each node, accumulated in ascending row order.
  auto node_sums = [&](std::vector<double>& g, std::vector<double>& h) {
    g.assign(tree.nodes.size(), 0.0);
    h.assign(tree.nodes.size(), 0.0);
    for (std::size_t r : rows) {
      const auto k = static_cast<std::size_t>(node_of[r]);
      g[k] += grad[r];
      h[k] += hess[r];
    }
  };

  std::vector<int> frontier = {0};
  std::vector<double> g_sum;
  std::vector<double> h_sum;
  for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
    node_sums(g_sum, h_sum);
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
    }
    const std::size_t slots = frontier.size();
    std::vector<SplitCandidate> best(slots);

    std::vector<double> gm(slots);
    std::vector<double> hm(slots);
    std::vector<double> gl(slots);
    std::vector<double> hl(slots);
    std::vector<double> prev(slots);
    std::vector<char> has_prev(slots);
    for (std::size_t f : feature_order) {
      const auto fi = static_cast<Eigen::Index>(f);
      std::fill(gm.begin(), gm.end(), 0.0);
      std::fill(hm.begin(), hm.end(), 0.0);
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(has_prev.begin(), has_prev.end(), 0);
      for (std::size_t r : rows) {
        const int s = slot_of[static_cast<std::size_t>(node_of[r])];
        if (s >= 0 && x_(static_cast<Eigen::Index>(r), fi) == kMissingMarker) {
          gm[static_cast<std::size_t>(s)] += grad[r];
          hm[static_cast<std::size_t>(s)] += hess[r];
        }
      }
      for (std::uint32_t r : sorted_[f]) {
        const int node = node_of[r];
        if (node < 0) continue;
        const int si = slot_of[static_cast<std::size_t>(node)];
        if (si < 0) continue;
        const auto s = static_cast<std::size_t>(si);
        const double v = x_(static_cast<Eigen::Index>(r), fi);
        if (has_prev[s] && v > prev[s]) {
          const double g = g_sum[static_cast<std::size_t>(node)];
          const double h = h_sum[static_cast<std::size_t>(node)];
          for (bool missing_left : {true, false}) {
            const double left_g = missing_left ? gl[s] + gm[s] : gl[s];
            const double left_h = missing_left ? hl[s] + hm[s] : hl[s];
            const double right_g = g - left_g;
            const double right_h = h - left_h;
            if (left_h < config.min_child_weight ||
                right_h < config.min_child_weight) {
              continue;
            }
            const double gain =
                SplitGain(left_g, left_h, right_g, right_h, g, h, config);
            if (gain > best[s].gain) {
              best[s] = SplitCandidate{gain, static_cast<int>(f), v, missing_left};
            }
          }
        }
        gl[s] += grad[r];
        hl[s] += hess[r];
        prev[s] = v;
        has_prev[s] = 1;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < slots; ++s) {
      if (best[s].feature < 0) continue;
      const auto id = static_cast<std::size_t>(frontier[s]);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[id];
      node.is_leaf = false;
      node.feature = best[s].feature;
      node.threshold = best[s].threshold;
      node.missing_left = best[s].missing_left;
      node.left = left;
      node.right = left + 1;
      node.gain = best[s].gain;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t r : rows) {
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
      if (node.is_leaf) continue;
      const double v = x_(static_cast<Eigen::Index>(r), node.feature);
      const bool go_left = v == kMissingMarker ? node.missing_left : v < node.threshold;
      node_of[r] = go_left ? node.left : node.right;
    }
    frontier = std::move(next);
  }

  node_sums(g_sum, h_sum);
  // Covers of internal nodes: sum of their children, computed bottom-up.
  for (std::size_t id = tree.nodes.size(); id-- > 0;) {
    TreeNode& node = tree.nodes[id];
    if (node.is_leaf) {
      node.cover = h_sum[id];
      node.weight = LeafWeight(g_sum[id], h_sum[id], config);
    } else {
      node.cover = tree.nodes[static_cast<std::size_t>(node.left)].cover +
                   tree.nodes[static_cast<std::size_t>(node.right)].cover;
    }
  }
  return tree;
}

}  // namespace

// ---------------------------------------------------------------------------

void GbtConfig::Validate() const {
  auto fraction = [](double v) { return v > 0.0 && v <= 1.0; };
  if (n_estimators < 0 || max_depth < 1 || !(learning_rate > 0.0) ||
      !fraction(subsample) || !fraction(colsample_bytree) ||
      min_child_weight < 0.0 || gamma < 0.0 || reg_lambda < 0.0 ||
      reg_alpha < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid GBT configuration");
  }
}

json GbtConfig::ToJson() const {
  return {{"n_estimators", n_estimators},
          {"learning_rate", learning_rate},
          {"max_depth", max_depth},
          {"min_child_weight", min_child_weight},
          {"gamma", gamma},
          {"reg_lambda", reg_lambda},
          {"reg_alpha", reg_alpha},
          {"subsample", subsample},
          {"colsample_bytree", colsample_bytree},
          {"seed", seed}};
}

GbtConfig GbtConfig::FromJson(const json& doc) {
  GbtConfig c;
  c.n_estimators = doc.value("n_estimators", c.n_estimators);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.max_depth = doc.value("max_depth", c.max_depth);
  c.min_child_weight = doc.value("min_child_weight", c.min_child_weight);
  c.gamma = doc.value("gamma", c.gamma);
  c.reg_lambda = doc.value("reg_lambda", c.reg_lambda);
  c.reg_alpha = doc.value("reg_alpha", c.reg_alpha);
  c.subsample = doc.value("subsample", c.subsample);
  c.colsample_bytree = doc.value("colsample_bytree", c.colsample_bytree);
  c.seed = doc.value("seed", c.seed);
  c.Validate();
  return c;
}

double Tree::Evaluate(std::span<const double> row) const {
  return EvaluateRow([&](int f) { return row[static_cast<std::size_t>(f)]; });
}

int Tree::Depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& node = nodes[id];
    deepest = std::max(deepest, depth[id]);
    if (!node.is_leaf) {
      depth[static_cast<std::size_t>(node.left)] = depth[id] + 1;
      depth[static_cast<std::size_t>(node.right)] = depth[id] + 1;
    }
  }
  return deepest;
}

GradHess ComputeGradHess(std::span<const double> predictions,
                         std::span<const int> labels,
                         const std::vector<ProbMatrix>& teachers,
                         double kl_weight, double temperature) {
  const std::size_t n = predictions.size();
  if (labels.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "predictions and labels differ in length");
  }
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  }
  for (std::size_t i = 0; i < teachers.size(); ++i) {
    if (static_cast<std::size_t>(teachers[i].rows()) != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "teacher " + std::to_string(i) + " is not row-aligned");
    }
    for (Eigen::Index r = 0; r < teachers[i].rows(); ++r) {
      const double q = teachers[i](r, 1);
      if (!(q >= 0.0 && q <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "teacher " + std::to_string(i) + " row " + std::to_string(r) +
                        " has probability outside [0, 1]");
      }
    }
  }
  GradHess out;
  out.grad.resize(n);
  out.hess.resize(n);
  const double t_count = static_cast<double>(teachers.size());
  const bool use_teachers = !teachers.empty() && kl_weight != 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double p = predictions[r];
    double g = p - static_cast<double>(labels[r]);
    double h = p * (1.0 - p);
    if (use_teachers) {
      const double pt = SoftenBinary(p, temperature);
      double kl_grad = 0.0;
      for (const ProbMatrix& t : teachers) {
        kl_grad += pt - SoftenBinary(t(static_cast<Eigen::Index>(r), 1), temperature);
      }
      g += kl_weight / temperature * kl_grad;
      h += kl_weight / (temperature * temperature) * t_count * pt * (1.0 - pt);
    }
    out.grad[r] = g;
    out.hess[r] = h;
  }
  return out;
}

double LeafWeight(double g_sum, double h_sum, const GbtConfig& config) {
  const double magnitude = std::max(std::abs(g_sum) - config.reg_alpha, 0.0);
  if (magnitude == 0.0) return 0.0;
  const double sign = g_sum > 0.0 ? 1.0 : -1.0;
  return -sign * magnitude / (h_sum + config.reg_lambda);
}

double SplitGain(double gl, double hl, double gr, double hr, double g, double h,
                 const GbtConfig& config) {
  const double lambda = config.reg_lambda;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                g * g / (h + lambda)) -
         config.gamma;
}

Tree BuildTree(const FeatureMatrix& features, std::span<const std::size_t> rows,
               std::span<const std::size_t> feature_subset,
               std::span<const double> grad, std::span<const double> hess,
               const GbtConfig& config) {
  if (rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "BuildTree needs at least one row");
  }
  if (grad.size() != static_cast<std::size_t>(features.rows()) ||
      hess.size() != grad.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "gradients must be aligned with feature rows");
  }
  ExactSplitter splitter(features);
  return splitter.Build(rows, feature_subset, grad, hess, config);
}

// ---------------------------------------------------------------------------
// Model

GbtModel::GbtModel(GbtConfig config, std::size_t input_width, double base_score,
                   std::vector<Tree> trees)
    : config_(config),
      input_width_(input_width),
      base_score_(base_score),
      trees_(std::move(trees)) {}

std::vector<double> GbtModel::Margins(const FeatureMatrix& batch) const {
  CheckInputWidth(input_width_, batch.cols());
  std::vector<double> margins(static_cast<std::size_t>(batch.rows()));
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const auto row = batch.row(r);
    double sum = 0.0;
    for (const Tree& tree : trees_) {
      sum += tree.EvaluateRow([&](int f) { return row(f); });
    }
    margins[static_cast<std::size_t>(r)] = base_score_ + config_.learning_rate * sum;
  }
  return margins;
}

std::vector<double> GbtModel::Score(const FeatureMatrix& batch) const {
  std::vector<double> p = Margins(batch);
  for (double& v : p) v = Sigmoid(v);
  return p;
}

ProbMatrix GbtModel::Predict(const FeatureMatrix& batch) const {
  const std::vector<double> p = Score(batch);
  ProbMatrix out(batch.rows(), 2);
  for (std::size_t r = 0; r < p.size(); ++r) {
    out(static_cast<Eigen::Index>(r), 0) = 1.0 - p[r];
    out(static_cast<Eigen::Index>(r), 1) = p[r];
  }
  return out;
}

std::string GbtModel::Serialize() const {
  json trees = json::array();
  for (const Tree& tree : trees_) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf) {
        nodes.push_back({{"leaf", node.weight}, {"cover", node.cover}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"missing", node.missing_left ? "left" : "right"},
                         {"left", node.left},
                         {"right", node.right},
                         {"gain", node.gain},
                         {"cover", node.cover}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  const json doc = {{"format", "latkd-gbt"},
                    {"version", 1},
                    {"config", config_.ToJson()},
                    {"input_width", input_width_},
                    {"base_score", base_score_},
                    {"trees", std::move(trees)}};
  return doc.dump();
}

GbtModel GbtModel::Deserialize(std::string_view bytes) {
  try {
    const json doc = json::parse(bytes);
    if (doc.value("format", "") != "latkd-gbt" || doc.value("version", 0) != 1) {
      throw Error(ErrorCode::kParse, "not a version-1 GBT model");
    }
    std::vector<Tree> trees;
    for (const json& jt : doc.at("trees")) {
      Tree tree;
      for (const json& jn : jt) {
        TreeNode node;
        node.cover = jn.value("cover", 0.0);
        if (jn.contains("leaf")) {
          node.weight = jn["leaf"].get<double>();
        } else {
          node.is_leaf = false;
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.missing_left = jn.at("missing").get<std::string>() == "left";
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
          node.gain = jn.value("gain", 0.0);
        }
        tree.nodes.push_back(node);
      }
      trees.push_back(std::move(tree));
    }
    return GbtModel(GbtConfig::FromJson(doc.at("config")),
                    doc.at("input_width").get<std::size_t>(),
                    doc.at("base_score").get<double>(), std::move(trees));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad GBT model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

GbtTrainResult TrainGbt(const DesignMatrix& data, const CompositeLossSpec& spec,
                        const GbtConfig& config) {
  config.Validate();
  data.Validate();
  const std::size_t n = data.rows();
  const ClassCounts counts = data.CountClasses();
  if (counts.unlabeled > 0) {
    throw Error(ErrorCode::kInvalidArgument, "training rows must be labeled");
  }
  if (counts.normal == 0 || counts.anomalous == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "training data must contain both classes");
  }
  spec.Validate(n);

  const double base_score = std::log(static_cast<double>(counts.anomalous) /
                                     static_cast<double>(counts.normal));
  const std::size_t d = data.cols();
  const auto sample_rows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n))));
  const auto sample_cols = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(config.colsample_bytree * static_cast<double>(d))));
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  std::vector<std::size_t> all_cols(d);
  std::iota(all_cols.begin(), all_cols.end(), std::size_t{0});

  ExactSplitter splitter(data.features);
  std::vector<double> margins(n, base_score);
  std::vector<double> p(n);
  ProbMatrix probs(static_cast<Eigen::Index>(n), 2);
  std::vector<Tree> trees;
  GbtTrainResult result;
  result.rows_consumed = n;

  for (int round = 0; round < config.n_estimators; ++round) {
    for (std::size_t r = 0; r < n; ++r) p[r] = Sigmoid(margins[r]);
    const GradHess gh = ComputeGradHess(p, data.labels, spec.teacher_outputs,
                                        spec.kl_weight, spec.temperature);
    std::vector<std::size_t> rows = all_rows;
    if (sample_rows < n) {
      Rng rng(DeriveSeed(config.seed, static_cast<std::uint64_t>(round),
                         kRowSampleStream));
      rows = SampleWithoutReplacement(n, sample_rows, rng);
    }
    std::vector<std::size_t> cols = all_cols;
    if (sample_cols < d) {
      Rng rng(DeriveSeed(config.seed, static_cast<std::uint64_t>(round),
                         kColumnSampleStream));
      cols = SampleWithoutReplacement(d, sample_cols, rng);
    }
    Tree tree = splitter.Build(rows, cols, gh.grad, gh.hess, config);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = data.features.row(static_cast<Eigen::Index>(r));
      margins[r] += config.learning_rate * tree.EvaluateRow([&](int f) { return row(f); });
    }
    trees.push_back(std::move(tree));

    for (std::size_t r = 0; r < n; ++r) {
      const double q = Sigmoid(margins[r]);
      probs(static_cast<Eigen::Index>(r), 0) = 1.0 - q;
      probs(static_cast<Eigen::Index>(r), 1) = q;
    }
    result.loss_trace.push_back(CompositeLoss(probs, data.labels, spec));
  }
  result.model = GbtModel(config, d, base_score, std::move(trees));
  return result;
}

}  // namespace latkd
