// Copyright 2026 The mixmra Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"
#include "mixmra/basis.hpp"
#include "mixmra/simulate.hpp"
#include "test_support.hpp"

namespace mixmra {
namespace {

TEST(Quadrants, ZeroQuadrantAndHalfLabels) {
  EXPECT_TRUE(in_zero_quadrant(Rect{0, 0, 0.5, 0.5}));
  EXPECT_TRUE(in_zero_quadrant(Rect{0.5, 0.5, 1, 1}));
  EXPECT_TRUE(in_zero_quadrant(Rect{0.6, 0.75, 0.7, 1.0}));
  EXPECT_FALSE(in_zero_quadrant(Rect{0.5, 0, 1, 0.5}));
  EXPECT_FALSE(in_zero_quadrant(Rect{0, 0, 1, 1}));
  EXPECT_FALSE(in_zero_quadrant(Rect{0.25, 0.25, 0.75, 0.5}));
  EXPECT_EQ(two_region_label({0.49, 0.9}), 1);
  EXPECT_EQ(two_region_label({0.5, 0.1}), 2);
}

TEST(Sim1, ZeroMaskAndShapes) {
  const SimSpec spec = SimSpec::defaults(Study::kMraWeights);
  EXPECT_EQ(spec.n, 756);
  const Sim1Result r = simulate_sim1(spec, 0);
  EXPECT_EQ(r.data.size(), 756u);
  EXPECT_EQ(r.tree.size(), 85u);
  ASSERT_EQ(r.eta.size(), 85 * 9);
  int zeroed = 0;
  Eigen::Index off = 0;
  for (const Node& n : r.tree.nodes()) {
    const bool z = n.level >= 1 && in_zero_quadrant(n.bounds);
    EXPECT_EQ(r.zeroed[static_cast<std::size_t>(n.id)] != 0, z);
    zeroed += z ? 1 : 0;
    const double norm = r.eta.segment(off, 9).norm();
    if (z) EXPECT_EQ(norm, 0.0);
    else EXPECT_GT(norm, 0.0);
    off += 9;
  }
  EXPECT_EQ(zeroed, 2 + 8 + 32);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    const Location& s = r.data.locations[i];
    const bool quad = (s.x < 0.5) == (s.y < 0.5);
    EXPECT_EQ(r.data.region[i], quad ? 1 : 2);
  }
}

TEST(Sim1, ResponseIsBasisTimesWeightsPlusNoise) {
  SimSpec spec = SimSpec::defaults(Study::kMraWeights);
  spec.tau2 = 0.0;
  const Sim1Result r = simulate_sim1(spec, 1);
  const BasisSystem sys = BasisSystem::build(r.tree, r.data.locations, spec.theta);
  EXPECT_LT((sys.apply(r.eta) - r.data.response).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Sim1, WeightsHavePriorScale) {
  // eta_{m,j} ~ N(0, K_{m,j}): the mean of eta' K^{-1} eta over nonzero
  // blocks is about r.
  SimSpec spec = SimSpec::defaults(Study::kMraWeights);
  spec.zero_mask = false;
  const Sim1Result r = simulate_sim1(spec, 2);
  const BasisSystem sys = BasisSystem::build(r.tree, {}, spec.theta);
  double q = 0.0;
  for (std::size_t id = 0; id < r.tree.size(); ++id) {
    const NodeBasis& nb = sys.node(static_cast<int>(id));
    q += nb.prior.quadratic(r.eta.segment(nb.weight_offset, nb.rank()));
  }
  q /= static_cast<double>(r.tree.size());
  EXPECT_NEAR(q, 9.0, 4.0 * std::sqrt(18.0 / 85.0));
}

TEST(Sim2, ShapesTrainingSplitAndDeterminism) {
  const SimSpec spec = SimSpec::defaults(Study::kTwoRegion);
  const Sim2Result a = simulate_sim2(spec, 0);
  const Sim2Result b = simulate_sim2(spec, 0);
  const Sim2Result c = simulate_sim2(spec, 1);
  EXPECT_EQ(a.data.size(), 1012u);
  EXPECT_EQ(a.data.response, b.data.response);
  EXPECT_NE(a.data.response, c.data.response);
  long train = 0;
  for (std::uint8_t t : a.data.train) train += t;
  EXPECT_EQ(train, 756);
  EXPECT_EQ(a.data.training().size(), 756u);
  EXPECT_EQ(a.data.held_out().size(), 256u);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(a.data.region[i], two_region_label(a.data.locations[i]));
}

TEST(Sim2, HalvesDifferInShortRangeCorrelation) {
  const SimSpec spec = SimSpec::defaults(Study::kTwoRegion);
  double sxy[3] = {}, sxx[3] = {}, syy[3] = {};
  double total = 0.0, total2 = 0.0;
  long count = 0;
  for (int rep = 0; rep < 4; ++rep) {
    const Dataset d = simulate_sim2(spec, rep).data;
    for (std::size_t i = 0; i < d.size(); ++i) {
      total += d.response(i);
      total2 += d.response(i) * d.response(i);
      ++count;
      for (std::size_t k = i + 1; k < d.size(); ++k) {
        if (d.region[i] != d.region[k] || distance(d.locations[i], d.locations[k]) > 0.01) continue;
        const int g = d.region[i];
        sxy[g] += d.response(i) * d.response(k);
        sxx[g] += d.response(i) * d.response(i);
        syy[g] += d.response(k) * d.response(k);
      }
    }
  }
  const double var = total2 / count - (total / count) * (total / count);
  EXPECT_NEAR(var, spec.theta.sigma2 + spec.tau2, 0.35);
  const double corr_left = sxy[1] / std::sqrt(sxx[1] * syy[1]);
  const double corr_right = sxy[2] / std::sqrt(sxx[2] * syy[2]);
  EXPECT_GT(corr_left, 0.85);
  EXPECT_LT(corr_right, 0.85);
  EXPECT_GT(corr_left - corr_right, 0.1);
}

TEST(DenseGaussian, SampleCovariance) {
  Eigen::Matrix3d cov;
  cov << 1.0, 0.6, 0.2, 0.6, 2.0, -0.3, 0.2, -0.3, 0.5;
  Rng rng(12);
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = draw_dense_gaussian(cov, rng);
    acc += x * x.transpose();
  }
  acc /= n;
  EXPECT_LT((acc - cov).cwiseAbs().maxCoeff(), 0.05);
  Eigen::Matrix2d bad;
  bad << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(draw_dense_gaussian(bad, rng), NumericalError);
}

TEST(SimSpec, JsonRoundTripAndErrors) {
  SimSpec s = SimSpec::defaults(Study::kTwoRegion);
  s.replicates = 5;
  s.seed = 77;
  s.phi_left = 0.5;
  const nlohmann::json j = to_json(s);
  EXPECT_EQ(to_json(sim_spec_from_json(j)), j);
  EXPECT_EQ(j.at("study"), "sim2");
  EXPECT_EQ(sim_spec_from_json({{"study", "sim1"}}).n, 756);
  EXPECT_THROW(sim_spec_from_json({{"studdy", "sim1"}}), ConfigError);
  EXPECT_THROW(sim_spec_from_json({{"n", 1}}), ConfigError);
  EXPECT_THROW(sim_spec_from_json({{"study", "sim3"}}), std::invalid_argument);
  EXPECT_EQ(study_from_string("two-region"), Study::kTwoRegion);
}

}  // namespace
}  // namespace mixmra
