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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>

#include "latkd/errors.h"
#include "latkd/gbt.h"
#include "latkd/mlp.h"
#include "test_util.h"

namespace latkd {
namespace {

// GBT without trees: predicts sigmoid(base) on every row.
ModelPtr Constant(double p1, std::size_t width = 2) {
  return std::make_shared<GbtModel>(GbtConfig{}, width, std::log(p1 / (1.0 - p1)),
                                    std::vector<Tree>{});
}

FeatureMatrix Batch(std::size_t rows = 3, std::size_t width = 2) {
  FeatureMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  x.setZero();
  return x;
}

TEST(EnsembleTest, AveragesMembers) {
  EnsembleModel e({Constant(0.2), Constant(0.4)});
  ProbMatrix p = e.Predict(Batch());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p(r, 0), 0.7, 1e-12);
    EXPECT_NEAR(p(r, 1), 0.3, 1e-12);
  }
}

TEST(EnsembleTest, SingleMemberIsIdentity) {
  DesignMatrix d = testing::ToyData(1, 50, 3, 0.3, 0.0);
  MlpArchitecture a;
  a.input_dim = 3;
  a.hidden = {4};
  auto m = std::make_shared<MlpModel>(MlpModel::Initialize(a, 2));
  EnsembleModel e({m});
  EXPECT_EQ(e.Predict(d.features), m->Predict(d.features));
}

TEST(EnsembleTest, ExplicitWeights) {
  EnsembleModel e({Constant(0.2), Constant(0.4), Constant(0.8)},
                  std::vector<double>{0.5, 0.25, 0.25});
  EXPECT_NEAR(e.Predict(Batch())(0, 1), 0.5 * 0.2 + 0.25 * 0.4 + 0.25 * 0.8, 1e-12);
  EXPECT_THROW(EnsembleModel({Constant(0.2), Constant(0.4)}, std::vector<double>{0.5, 0.6}),
               Error);
  EXPECT_THROW(EnsembleModel({Constant(0.2), Constant(0.4)}, std::vector<double>{1.5, -0.5}),
               Error);
  EXPECT_THROW(EnsembleModel({Constant(0.2)}, std::vector<double>{0.5, 0.5}), Error);
}

TEST(EnsembleTest, PermutationInvariantAndConvex) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<ModelPtr> members;
    const std::size_t k = 2 + rng.Below(4);
    for (std::size_t i = 0; i < k; ++i) members.push_back(Constant(rng.Uniform(0.01, 0.99)));
    ProbMatrix base = EnsembleModel(members).Predict(Batch(1));
    std::vector<ModelPtr> shuffled = members;
    rng.Shuffle(std::span<ModelPtr>(shuffled));
    EXPECT_NEAR(EnsembleModel(shuffled).Predict(Batch(1))(0, 1), base(0, 1), 1e-12);
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& m : members) {
      lo = std::min(lo, m->Predict(Batch(1))(0, 1));
      hi = std::max(hi, m->Predict(Batch(1))(0, 1));
    }
    EXPECT_GE(base(0, 1), lo - 1e-12);
    EXPECT_LE(base(0, 1), hi + 1e-12);
    EXPECT_NEAR(base(0, 0) + base(0, 1), 1.0, 1e-12);
  }
}

TEST(EnsembleTest, RejectsEmptyAndMixedWidths) {
  EXPECT_THROW(EnsembleModel(std::vector<ModelPtr>{}), Error);
  EXPECT_THROW(EnsembleModel({Constant(0.2, 2), Constant(0.3, 3)}), Error);
  EnsembleModel e({Constant(0.2, 2)});
  EXPECT_THROW(e.Predict(Batch(2, 3)), Error);
}

TEST(EnsembleTest, SerializeResolvesMembersByHash) {
  std::vector<ModelPtr> members = {Constant(0.2), Constant(0.6)};
  std::map<std::string, std::string> blobs;
  for (const auto& m : members) blobs[m->ContentHash()] = m->Serialize();
  EnsembleModel e(members, std::vector<double>{0.25, 0.75});
  BlobResolver resolve = [&](const std::string& h) {
    auto it = blobs.find(h);
    if (it == blobs.end()) throw Error(ErrorCode::kNotFound, h);
    return it->second;
  };
  EnsembleModel back = EnsembleModel::Deserialize(e.Serialize(), resolve);
  EXPECT_EQ(back.Predict(Batch()), e.Predict(Batch()));
  EXPECT_EQ(back.ContentHash(), e.ContentHash());
  ModelPtr generic = DeserializeModel(e.Serialize(), resolve);
  EXPECT_EQ(generic->kind(), ModelKind::kEnsemble);
  blobs.clear();
  EXPECT_THROW(EnsembleModel::Deserialize(e.Serialize(), resolve), Error);
}

}  // namespace
}  // namespace latkd
