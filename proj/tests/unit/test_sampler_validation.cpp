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
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"
#include "mixmra/model.hpp"
#include "mixmra/sampler.hpp"
#include "mixmra/simulate.hpp"
#include "test_support.hpp"

namespace mixmra {
namespace {

struct Small {
  Dataset data;
  PartitionTree tree;
};

Small small_problem(std::uint64_t seed, int n = 150) {
  SimSpec spec = SimSpec::defaults(Study::kTwoRegion);
  spec.n = n;
  spec.n_train = 0;
  spec.seed = seed;
  Small s;
  s.data = simulate_sim2(spec).data;
  s.tree = PartitionTree::build(Rect{}, TreeOptions{2, 4, 4, PartitionMode::kRectangular, 0, false});
  return s;
}

ChainConfig short_config() {
  ChainConfig c;
  c.n_iter = 300;
  c.n_burn = 200;
  c.adapt_interval = 50;
  c.shrink_check_interval = 100;
  c.seed = 17;
  return c;
}

TEST(ChainConfig, JsonRoundTrip) {
  ChainConfig c = short_config();
  c.initial_tau2 = 0.3;
  c.indicator_update = IndicatorUpdate::kConditional;
  c.initial_widths = {0.2, 0.1, 0.05, 0.3};
  c.basis.jitter_max = 1e-5;
  const nlohmann::json j = to_json(c);
  EXPECT_EQ(to_json(chain_config_from_json(j)), j);
  EXPECT_EQ(j.at("initial_L"), 1000.0);
  EXPECT_EQ(j.at("indicator_update"), "conditional");
}

TEST(ChainConfig, RejectsBadInput) {
  EXPECT_THROW(chain_config_from_json({{"n_iterations", 5}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"n_iter", 10}, {"n_burn", 10}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"thin", 0}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"L_decay", 1.5}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"initial_L", 1.0}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"theta", {{"nu", 3.0}}}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"indicator_update", "gibbs"}}), ConfigError);
  EXPECT_THROW(chain_config_from_json({{"n_iter", "many"}}), ConfigError);
  EXPECT_NO_THROW(chain_config_from_json(nlohmann::json::object()));
}

TEST(Sampler, StoresThinnedDraws) {
  const Small p = small_problem(1);
  ChainConfig c = short_config();
  c.n_iter = 257;
  c.n_burn = 100;
  c.thin = 4;
  const ChainOutput out = run_chain(p.data, p.tree, c, MixtureHyper{});
  EXPECT_EQ(out.num_draws, (257 - 100) / 4);
  EXPECT_EQ(out.beta.rows(), out.num_draws);
  EXPECT_EQ(out.eta.cols(), static_cast<Eigen::Index>(p.tree.total_knots()));
  EXPECT_EQ(out.z.size(), static_cast<std::size_t>(out.num_draws));
  EXPECT_EQ(out.log.shrink_trajectory.size(), 257u);
  EXPECT_GE(out.seconds, 0.0);
}

TEST(Sampler, SameSeedSameChain) {
  const Small p = small_problem(2);
  const ChainConfig c = short_config();
  const ChainOutput a = run_chain(p.data, p.tree, c, MixtureHyper{});
  const ChainOutput b = run_chain(p.data, p.tree, c, MixtureHyper{});
  EXPECT_EQ(a.eta, b.eta);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.z, b.z);
  ChainConfig c2 = c;
  c2.seed = 18;
  const ChainOutput d = run_chain(p.data, p.tree, c2, MixtureHyper{});
  EXPECT_NE(a.eta, d.eta);
}

TEST(Sampler, HeredityHoldsInEveryDraw) {
  const Small p = small_problem(3);
  for (IndicatorUpdate u : {IndicatorUpdate::kCollapsed, IndicatorUpdate::kConditional}) {
    ChainConfig c = short_config();
    c.indicator_update = u;
    c.initial_shrink = 20.0;
    const ChainOutput out = run_chain(p.data, p.tree, c, MixtureHyper{});
    for (const Indicators& z : out.z) ASSERT_TRUE(satisfies_heredity(p.tree, z)) << to_string(u);
  }
}

TEST(Sampler, ShrinkTuningSchedule) {
  const Small p = small_problem(4);
  ChainConfig c = short_config();
  c.n_iter = 700;
  c.n_burn = 500;
  c.initial_shrink = 1000.0;
  const ChainOutput out = run_chain(p.data, p.tree, c, MixtureHyper{});
  const auto& traj = out.log.shrink_trajectory;
  ASSERT_EQ(traj.size(), 700u);
  EXPECT_EQ(out.log.shrink_checks.size(), 5u);
  for (const ShrinkCheck& ck : out.log.shrink_checks) {
    EXPECT_EQ(ck.iteration % 100, 0);
    EXPECT_LE(ck.iteration, 500);
    EXPECT_DOUBLE_EQ(ck.after, ck.window_mean > 0.95 ? 0.5 * ck.before : ck.before);
  }
  double prev = 1000.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const int iter = static_cast<int>(t) + 1;
    EXPECT_LE(traj[t], prev);
    if (traj[t] != prev) {
      EXPECT_EQ(iter % 100, 0);
      EXPECT_LE(iter, 500);
    }
    prev = traj[t];
  }
  for (std::size_t t = 500; t < traj.size(); ++t) EXPECT_EQ(traj[t], traj[499]);
}

TEST(Sampler, FixedShrinkNeverChanges) {
  const Small p = small_problem(5);
  ChainConfig c = short_config();
  c.tune_shrink = false;
  c.initial_shrink = 100.0;
  const ChainOutput out = run_chain(p.data, p.tree, c, MixtureHyper{});
  for (double l : out.log.shrink_trajectory) EXPECT_EQ(l, 100.0);
  EXPECT_TRUE(out.log.shrink_checks.empty());
}

TEST(Sampler, WidthsAdaptOnlyDuringBurnIn) {
  const Small p = small_problem(6);
  const ChainConfig c = short_config();
  Sampler s(p.data, p.tree, c, MixtureHyper{});
  const ChainOutput out = s.run();
  std::set<int> iters;
  for (const WidthUpdate& w : out.log.width_updates) {
    EXPECT_EQ(w.iteration % 50, 0);
    EXPECT_LE(w.iteration, 200);
    const auto k = static_cast<std::size_t>(w.param);
    EXPECT_GE(w.width, c.min_widths[k]);
    EXPECT_LE(w.width, c.max_widths[k]);
    iters.insert(w.iteration);
  }
  EXPECT_EQ(iters, (std::set<int>{50, 100, 150, 200}));
  long proposed = 0;
  for (const AcceptanceCounter& a : out.log.post_burn) proposed += a.proposed;
  EXPECT_EQ(proposed, 4 * 100);
}

TEST(Sampler, FixedThetaStaysFixed) {
  const Small p = small_problem(7);
  ChainConfig c = short_config();
  c.estimate_theta = false;
  c.theta = {0.8, 0.05, 1.5};
  const ChainOutput out = run_chain(p.data, p.tree, c, MixtureHyper{});
  EXPECT_TRUE((out.sigma2.array() == 0.8).all());
  EXPECT_TRUE((out.phi.array() == 0.05).all());
  EXPECT_TRUE((out.nu.array() == 1.5).all());
  EXPECT_EQ(out.log.post_burn[static_cast<int>(MhParam::kPhi)].proposed, 0);
}

TEST(Sampler, ConstructorValidation) {
  const Small p = small_problem(8, 40);
  ChainConfig c = short_config();
  MixtureHyper h;
  h.nu_max = 1.0;
  c.theta.nu = 1.5;
  EXPECT_THROW(Sampler(p.data, p.tree, c, h), ConfigError);

  Dataset d = p.data;
  d.design.conservativeResize(Eigen::NoChange, 2);
  d.design.col(1) = d.design.col(0) * 2.0;  // collinear covariate
  d.design_names.push_back("twice");
  EXPECT_THROW(Sampler(d, p.tree, short_config(), MixtureHyper{}), ConfigError);

  Dataset bad = p.data;
  bad.response(0) = std::nan("");
  EXPECT_THROW(Sampler(bad, p.tree, short_config(), MixtureHyper{}), std::invalid_argument);
}

TEST(Sampler, CovariatesAreEstimated) {
  Small p = small_problem(9, 120);
  Dataset& d = p.data;
  d.design.conservativeResize(Eigen::NoChange, 2);
  Rng rng(9);
  for (Eigen::Index i = 0; i < d.design.rows(); ++i) {
    d.design(i, 1) = 10.0 * rng.normal();
    d.response(i) += 3.0 * d.design(i, 1);
  }
  d.design_names.push_back("x1");
  ChainConfig c = short_config();
  c.estimate_theta = false;
  const ChainOutput out = run_chain(d, p.tree, c, MixtureHyper{});
  EXPECT_NEAR(out.beta.col(1).mean(), 3.0, 0.05);
  EXPECT_EQ(out.beta_names, (std::vector<std::string>{"intercept", "x1"}));
}

TEST(Sampler, InitialState) {
  const Small p = small_problem(10, 60);
  Sampler s(p.data, p.tree, short_config(), MixtureHyper{});
  const ChainState& st = s.state();
  EXPECT_NEAR(st.beta(0), p.data.response.mean(), 1e-12);
  EXPECT_TRUE((st.eta.array() == 0.0).all());
  for (std::uint8_t z : st.z) EXPECT_EQ(z, 1);
  EXPECT_EQ(st.rho, 0.5);
  EXPECT_EQ(st.shrink, 1000.0);
  const double var = (p.data.response.array() - p.data.response.mean()).square().sum() / 59.0;
  EXPECT_NEAR(st.tau2, std::max(0.5 * var, 1e-3), 1e-12);
}

TEST(Sampler, AdaptationLogJson) {
  const Small p = small_problem(11, 60);
  const ChainOutput out = run_chain(p.data, p.tree, short_config(), MixtureHyper{});
  const nlohmann::json j = to_json(out.log, true);
  for (const char* key : {"L_trajectory", "L_checks", "width_updates", "post_burn_acceptance", "rejected_factorizations"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j.at("L_trajectory").size(), 300u);
}

}  // namespace
}  // namespace mixmra
