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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "latkd/errors.h"
#include "latkd/eval.h"
#include "oracles/split_oracle.h"
#include "test_util.h"

namespace latkd {
namespace {

oracle::Regularization RegOf(const GbtConfig& c) {
  return {c.reg_lambda, c.reg_alpha, c.gamma, c.min_child_weight};
}

GbtConfig PlainConfig() {
  GbtConfig c;
  c.reg_lambda = 0.0;
  c.reg_alpha = 0.0;
  c.gamma = 0.0;
  c.min_child_weight = 0.0;
  c.subsample = 1.0;
  c.colsample_bytree = 1.0;
  return c;
}

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Walks the tree, re-deriving each node's decision from the brute-force
// oracle on the rows that reach it.
void AuditNode(const Tree& tree, int at, int depth, const FeatureMatrix& x,
               const std::vector<std::size_t>& rows, const std::vector<std::size_t>& features,
               const std::vector<double>& g, const std::vector<double>& h,
               const GbtConfig& config, const std::string& where) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
  double gs = 0;
  double hs = 0;
  for (std::size_t r : rows) {
    gs += g[r];
    hs += h[r];
  }
  EXPECT_NEAR(node.cover, hs, 1e-9) << where;
  auto split = depth < config.max_depth
                   ? oracle::BruteForceSplit(x, rows, features, g, h, RegOf(config))
                   : std::nullopt;
  if (!split) {
    ASSERT_TRUE(node.is_leaf) << where;
    EXPECT_NEAR(node.weight, oracle::OracleLeafWeight(gs, hs, RegOf(config)), 1e-9) << where;
    return;
  }
  ASSERT_FALSE(node.is_leaf) << where;
  EXPECT_EQ(node.feature, split->feature) << where;
  EXPECT_EQ(node.threshold, split->threshold) << where;
  EXPECT_EQ(node.missing_left, split->missing_left) << where;
  EXPECT_NEAR(node.gain, split->gain, 1e-9 * std::max(1.0, std::abs(split->gain))) << where;
  EXPECT_GT(node.gain, 0.0);
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  double hl = 0;
  double hr = 0;
  for (std::size_t r : rows) {
    const double v = x(static_cast<Eigen::Index>(r), node.feature);
    const bool go_left = v == kMissingMarker ? node.missing_left : v < node.threshold;
    (go_left ? left : right).push_back(r);
    (go_left ? hl : hr) += h[r];
  }
  EXPECT_GE(hl, config.min_child_weight);
  EXPECT_GE(hr, config.min_child_weight);
  AuditNode(tree, node.left, depth + 1, x, left, features, g, h, config, where + "L");
  AuditNode(tree, node.right, depth + 1, x, right, features, g, h, config, where + "R");
}

TEST(GradHessTest, WorkedExample) {
  std::vector<double> p = {0.5};
  std::vector<int> y = {1};
  ProbMatrix q(1, 2);
  q << 0.5, 0.5;
  GradHess gh = ComputeGradHess(p, y, {q}, 1.0);
  EXPECT_NEAR(gh.grad[0], -0.5, 1e-12);
  EXPECT_NEAR(gh.hess[0], 0.5, 1e-12);
}

TEST(GradHessTest, NoTeachersIsLogistic) {
  std::vector<double> p = {0.2, 0.7, 0.99};
  std::vector<int> y = {1, 0, 1};
  GradHess gh = ComputeGradHess(p, y, {}, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(gh.grad[i], p[i] - y[i], 1e-12);
    EXPECT_NEAR(gh.hess[i], p[i] * (1 - p[i]), 1e-12);
  }
}

TEST(GradHessTest, HardLabelTeachersScaleLogisticTerms) {
  ProbMatrix probs = testing::RandomProbs(3, 40);
  std::vector<double> p = PositiveScores(probs);
  std::vector<int> y = testing::ToyData(3, 40, 1, 0.4, 0.0).labels;
  const GradHess plain = ComputeGradHess(p, y, {}, 0.0);
  for (int copies = 1; copies <= 3; ++copies) {
    std::vector<ProbMatrix> teachers(static_cast<std::size_t>(copies), testing::OneHot(y));
    const double w = 0.6;
    GradHess gh = ComputeGradHess(p, y, teachers, w);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(gh.grad[i], (1 + w * copies) * plain.grad[i], 1e-6);
      EXPECT_NEAR(gh.hess[i], (1 + w * copies) * plain.hess[i], 1e-12);
    }
  }
}

TEST(GradHessTest, ZeroWeightIgnoresTeachers) {
  std::vector<double> p = PositiveScores(testing::RandomProbs(4, 10));
  std::vector<int> y = testing::ToyData(4, 10, 1, 0.4, 0.0).labels;
  GradHess a = ComputeGradHess(p, y, {}, 1.0);
  GradHess b = ComputeGradHess(p, y, {testing::RandomProbs(9, 10)}, 0.0);
  EXPECT_EQ(a.grad, b.grad);
  EXPECT_EQ(a.hess, b.hess);
}

TEST(GradHessTest, RejectsNonDistributionTeacher) {
  std::vector<double> p = {0.5, 0.5};
  std::vector<int> y = {0, 1};
  ProbMatrix q(2, 2);
  q << 1.2, -0.2, 0.5, 0.5;
  EXPECT_THROW(ComputeGradHess(p, y, {q}, 1.0), Error);
}

TEST(LeafWeightTest, SoftThreshold) {
  GbtConfig c = PlainConfig();
  c.reg_lambda = 1.0;
  c.reg_alpha = 0.5;
  EXPECT_NEAR(LeafWeight(2.0, 3.0, c), -1.5 / 4.0, 1e-15);
  EXPECT_NEAR(LeafWeight(-2.0, 3.0, c), 1.5 / 4.0, 1e-15);
  EXPECT_EQ(LeafWeight(0.3, 3.0, c), 0.0);
}

TEST(BuildTreeTest, FourRowsByHand) {
  FeatureMatrix x(4, 1);
  x << 1, 2, 3, 4;
  std::vector<double> g = {-1, -1, 1, 1};
  std::vector<double> h = {1, 1, 1, 1};
  GbtConfig c = PlainConfig();
  c.max_depth = 2;
  auto rows = Iota(4);
  std::vector<std::size_t> f = {0};
  Tree t = BuildTree(x, rows, f, g, h, c);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].threshold, 3.0);
  EXPECT_NEAR(t.nodes[0].gain, 2.0, 1e-12);
  EXPECT_NEAR(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].weight, 1.0, 1e-12);
  EXPECT_NEAR(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].weight, -1.0, 1e-12);
}

TEST(BuildTreeTest, ZeroGradientsGiveSingleLeaf) {
  FeatureMatrix x = testing::ToyData(1, 30, 3, 0.5, 0.0).features;
  std::vector<double> g(30, 0.0);
  std::vector<double> h(30, 0.25);
  GbtConfig c = PlainConfig();
  auto rows = Iota(30);
  auto f = Iota(3);
  Tree t = BuildTree(x, rows, f, g, h, c);
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].weight, 0.0);
}

TEST(BuildTreeTest, LargeGammaGivesSingleLeaf) {
  DesignMatrix d = testing::ToyData(2, 50, 3, 0.5, 1.0);
  std::vector<double> g(50);
  std::vector<double> h(50, 0.25);
  for (std::size_t i = 0; i < 50; ++i) g[i] = 0.5 - d.labels[i];
  GbtConfig c = PlainConfig();
  c.gamma = 1e6;
  auto rows = Iota(50);
  auto f = Iota(3);
  EXPECT_EQ(BuildTree(d.features, rows, f, g, h, c).nodes.size(), 1u);
  c.gamma = 0.0;
  EXPECT_GT(BuildTree(d.features, rows, f, g, h, c).nodes.size(), 1u);
}

TEST(BuildTreeTest, MissingValuesLearnDirection) {
  // Missing rows share the positive gradient sign of the right side.
  FeatureMatrix x(6, 1);
  x << 1, 2, 3, 4, kMissingMarker, kMissingMarker;
  std::vector<double> g = {-1, -1, 1, 1, 1, 1};
  std::vector<double> h(6, 1.0);
  GbtConfig c = PlainConfig();
  c.max_depth = 1;
  auto rows = Iota(6);
  std::vector<std::size_t> f = {0};
  Tree t = BuildTree(x, rows, f, g, h, c);
  ASSERT_FALSE(t.nodes[0].is_leaf);
  EXPECT_EQ(t.nodes[0].threshold, 3.0);
  EXPECT_FALSE(t.nodes[0].missing_left);
}

TEST(BuildTreeTest, MatchesBruteForceOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 4 + rng.Below(57);
    const std::size_t cols = 1 + rng.Below(4);
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        x(r, c) = rng.Bernoulli(0.15) ? kMissingMarker
                                      : static_cast<double>(rng.Below(6)) - 2.0;
      }
    }
    std::vector<double> g(n);
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.Uniform(-1, 1);
      h[i] = rng.Uniform(0.05, 0.3);
    }
    GbtConfig c;
    c.reg_lambda = rng.Uniform(0, 2);
    c.reg_alpha = rng.Uniform(0, 0.3);
    c.gamma = rng.Uniform(0, 0.05);
    c.min_child_weight = rng.Uniform(0, 0.5);
    c.max_depth = 1 + static_cast<int>(rng.Below(4));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.Bernoulli(0.9)) rows.push_back(i);
    }
    if (rows.empty()) rows.push_back(0);
    std::vector<std::size_t> features;
    for (std::size_t f = 0; f < cols; ++f) {
      if (rng.Bernoulli(0.7)) features.push_back(f);
    }
    if (features.empty()) features.push_back(cols - 1);
    Tree t = BuildTree(x, rows, features, g, h, c);
    AuditNode(t, 0, 0, x, rows, features, g, h, c, "seed " + std::to_string(seed) + " ");
  }
}

TEST(TrainGbtTest, OneRoundStumpMatchesOracle) {
  DesignMatrix d = testing::ToyData(7, 120, 3, 0.25, 0.0);
  GbtConfig c = GbtConfig{};
  c.n_estimators = 1;
  c.max_depth = 1;
  c.subsample = 1.0;
  c.colsample_bytree = 1.0;
  GbtModel m = TrainGbt(d, {}, c).model;
  const double p = 0.25;
  EXPECT_NEAR(m.base_score(), std::log(p / (1 - p)), 1e-12);
  std::vector<double> g(d.rows());
  std::vector<double> h(d.rows(), p * (1 - p));
  for (std::size_t i = 0; i < d.rows(); ++i) g[i] = p - d.labels[i];
  auto split = oracle::BruteForceSplit(d.features, Iota(d.rows()), Iota(3), g, h, RegOf(c));
  ASSERT_TRUE(split.has_value());
  ASSERT_EQ(m.trees().size(), 1u);
  const TreeNode& root = m.trees()[0].nodes[0];
  EXPECT_EQ(root.feature, split->feature);
  EXPECT_EQ(root.threshold, split->threshold);
  EXPECT_NEAR(root.gain, split->gain, 1e-9);
}

TEST(GbtModelTest, EmptyEnsemblePredictsBase) {
  GbtModel m(PlainConfig(), 2, 0.7, {});
  FeatureMatrix x(3, 2);
  x.setRandom();
  for (double s : m.Score(x)) EXPECT_NEAR(s, 1.0 / (1.0 + std::exp(-0.7)), 1e-15);
}

TEST(GbtModelTest, HandTree) {
  Tree t;
  TreeNode root;
  root.is_leaf = false;
  root.feature = 1;
  root.threshold = 0.5;
  root.missing_left = false;
  root.left = 1;
  root.right = 2;
  TreeNode l;
  l.weight = -2.0;
  TreeNode r;
  r.weight = 4.0;
  t.nodes = {root, l, r};
  GbtConfig c = PlainConfig();
  c.learning_rate = 0.5;
  GbtModel m(c, 2, 0.0, {t});
  FeatureMatrix x(3, 2);
  x << 9, 0.1, 9, 0.5, 9, kMissingMarker;
  std::vector<double> margins = m.Margins(x);
  EXPECT_EQ(margins, (std::vector<double>{-1.0, 2.0, 2.0}));
  EXPECT_EQ(t.Depth(), 1);
}

TEST(TrainGbtTest, LossNonIncreasingWithoutSampling) {
  DesignMatrix d = testing::ToyData(8, 200, 4, 0.2, 0.0);
  GbtConfig c = GbtConfig{};
  c.n_estimators = 30;
  c.subsample = 1.0;
  c.colsample_bytree = 1.0;
  CompositeLossSpec spec;
  spec.teacher_outputs = {testing::RandomProbs(1, 200)};
  auto r = TrainGbt(d, spec, c);
  ASSERT_EQ(r.loss_trace.size(), 30u);
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) {
    EXPECT_LE(r.loss_trace[i], r.loss_trace[i - 1] + 1e-12) << "round " << i;
  }
}

TEST(TrainGbtTest, EveryNodeRespectsGainAndChildWeight) {
  DesignMatrix d = testing::ToyData(9, 300, 5, 0.3, 0.0);
  GbtConfig c = GbtConfig{};
  c.n_estimators = 20;
  GbtModel m = TrainGbt(d, {}, c).model;
  for (const Tree& t : m.trees()) {
    EXPECT_LE(t.Depth(), c.max_depth);
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf) continue;
      EXPECT_GT(n.gain, 0.0);
      EXPECT_GE(t.nodes[static_cast<std::size_t>(n.left)].cover, c.min_child_weight);
      EXPECT_GE(t.nodes[static_cast<std::size_t>(n.right)].cover, c.min_child_weight);
    }
  }
}

TEST(TrainGbtTest, DeterministicInSeed) {
  DesignMatrix d = testing::ToyData(10, 150, 4, 0.3, 0.0);
  GbtConfig c = GbtConfig{};
  c.n_estimators = 10;
  c.seed = 5;
  auto a = TrainGbt(d, {}, c).model.Serialize();
  EXPECT_EQ(a, TrainGbt(d, {}, c).model.Serialize());
  c.seed = 6;
  EXPECT_NE(a, TrainGbt(d, {}, c).model.Serialize());
}

TEST(TrainGbtTest, SeparableDataRanksPerfectly) {
  DesignMatrix d = testing::ToyData(11, 300, 3, 0.2, 1.0);
  GbtConfig c = GbtConfig{};
  c.n_estimators = 20;
  auto r = TrainGbt(d, {}, c);
  EXPECT_GE(Auprc(r.model.Score(d.features), d.labels), 0.99);
  EXPECT_EQ(r.rows_consumed, 300u);
}

TEST(TrainGbtTest, RejectsSingleClassAndUnlabeled) {
  DesignMatrix d = testing::ToyData(12, 30, 2, 0.0, 0.0);
  EXPECT_THROW(TrainGbt(d, {}, GbtConfig{}), Error);
  d = testing::ToyData(12, 30, 2, 0.3, 0.0);
  d.labels[3] = kUnlabeled;
  EXPECT_THROW(TrainGbt(d, {}, GbtConfig{}), Error);
}

TEST(GbtModelTest, SerializeRoundTrip) {
  DesignMatrix d = testing::ToyData(13, 100, 3, 0.3, 0.0);
  d.features(4, 1) = kMissingMarker;
  GbtConfig c = GbtConfig{};
  c.n_estimators = 8;
  GbtModel m = TrainGbt(d, {}, c).model;
  GbtModel back = GbtModel::Deserialize(m.Serialize());
  EXPECT_EQ(back.Score(d.features), m.Score(d.features));
  EXPECT_EQ(back.ContentHash(), m.ContentHash());
  EXPECT_THROW(GbtModel::Deserialize("{}"), Error);
}

TEST(GbtConfigTest, JsonRoundTripAndValidation) {
  GbtConfig c;
  c.max_depth = 5;
  c.subsample = 0.5;
  EXPECT_EQ(GbtConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());
  c.subsample = 0.0;
  EXPECT_THROW(c.Validate(), Error);
}

}  // namespace
}  // namespace latkd
