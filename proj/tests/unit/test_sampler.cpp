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

// Distributional checks of the sampler: full conditionals against closed
// forms, a joint-distribution (successive-conditional) test and prior-only
// runs.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "mixmra/diagnostics.hpp"
#include "mixmra/sampler.hpp"
#include "test_support.hpp"

namespace mixmra {
namespace {

using testing::ks_pvalue;
using testing::normal_cdf;

constexpr int kDraws = 20000;
constexpr double kKsLevel = 0.01;

struct Toy {
  Dataset data;
  PartitionTree tree;
  CovarianceParams theta{1.0, 0.3, 1.0};
};

// One node (M = 0) with a 2 x 2 knot grid and n noisy observations.
Toy make_toy(int n, std::uint64_t seed) {
  Toy t;
  Rng rng(seed);
  std::vector<Location> pts = testing::random_points(n, seed);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = 1.5 + std::sin(4.0 * pts[i].x) + 0.3 * rng.normal();
  t.data = Dataset::with_intercept(std::move(pts), std::move(y));
  t.tree = PartitionTree::build(Rect{}, TreeOptions{0, 4, 4, PartitionMode::kRectangular, 0, false});
  return t;
}

ChainConfig fixed_theta_config(const CovarianceParams& theta) {
  ChainConfig c;
  c.n_iter = 10;
  c.n_burn = 0;
  c.estimate_theta = false;
  c.theta = theta;
  c.tune_shrink = false;
  c.seed = 99;
  return c;
}

MixtureHyper toy_hyper() {
  MixtureHyper h;
  h.mean_prior_variance = 4.0;
  h.tau2_shape = 4.0;
  h.tau2_rate = 3.0;
  h.sigma2_shape = 4.0;
  h.sigma2_rate = 3.0;
  h.phi_shape = 4.0;
  h.phi_rate = 20.0;
  h.rho_alpha = 2.0;
  h.rho_beta = 3.0;
  return h;
}

// Level-0 basis and prior precision straight from the covariance function.
struct DenseToy {
  Eigen::MatrixXd b;     // n x r, C(S, Q)
  Eigen::MatrixXd prec;  // C(Q, Q) + jitter
};

DenseToy dense_toy(const Toy& t) {
  const std::vector<Location>& q = t.tree.node(0).knots;
  DenseToy d;
  d.b.resize(static_cast<Eigen::Index>(t.data.size()), static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    for (std::size_t k = 0; k < q.size(); ++k) d.b(i, k) = matern(distance(t.data.locations[i], q[k]), t.theta);
  }
  d.prec.resize(static_cast<Eigen::Index>(q.size()), static_cast<Eigen::Index>(q.size()));
  for (std::size_t a = 0; a < q.size(); ++a) {
    for (std::size_t k = 0; k < q.size(); ++k) d.prec(a, k) = matern(distance(q[a], q[k]), t.theta);
  }
  d.prec.diagonal().array() += 1e-10 * t.theta.sigma2;
  return d;
}

ChainState perturbed_state(const Sampler& s) {
  ChainState st = s.state();
  st.beta(0) = 1.2;
  st.tau2 = 0.4;
  for (Eigen::Index k = 0; k < st.eta.size(); ++k) st.eta(k) = 0.3 * std::cos(1.0 + k);
  return st;
}

TEST(FullConditional, InterceptIsNormal) {
  const Toy toy = make_toy(30, 1);
  const MixtureHyper hyper = toy_hyper();
  Sampler s(toy.data, toy.tree, fixed_theta_config(toy.theta), hyper);
  s.set_state(perturbed_state(s));
  const DenseToy d = dense_toy(toy);
  const ChainState st = s.state();
  const Eigen::VectorXd e = toy.data.response - d.b * st.eta;
  const double prec = toy.data.size() / st.tau2 + 1.0 / hyper.mean_prior_variance;
  const double mean = e.sum() / st.tau2 / prec;
  std::vector<double> draws;
  for (int k = 0; k < kDraws; ++k) {
    s.update_beta();
    draws.push_back(s.state().beta(0));
  }
  EXPECT_GT(ks_pvalue(draws, [&](double x) { return normal_cdf(x, mean, 1.0 / std::sqrt(prec)); }), kKsLevel);
}

TEST(FullConditional, WeightsAreGaussian) {
  const Toy toy = make_toy(30, 2);
  Sampler s(toy.data, toy.tree, fixed_theta_config(toy.theta), toy_hyper());
  s.set_state(perturbed_state(s));
  const DenseToy d = dense_toy(toy);
  const ChainState st = s.state();
  const Eigen::MatrixXd p = d.b.transpose() * d.b / st.tau2 + d.prec;
  const Eigen::MatrixXd cov = p.inverse();
  const Eigen::VectorXd mean = cov * d.b.transpose() * (toy.data.response - toy.data.design * st.beta) / st.tau2;

  std::vector<Eigen::VectorXd> dirs;
  for (int k = 0; k < 4; ++k) dirs.push_back(Eigen::VectorXd::Unit(4, k));
  dirs.push_back(Eigen::Vector4d(0.5, -1.0, 0.25, 2.0));
  std::vector<std::vector<double>> proj(dirs.size());
  for (int k = 0; k < kDraws; ++k) {
    s.update_weights_block(0);
    for (std::size_t a = 0; a < dirs.size(); ++a) proj[a].push_back(dirs[a].dot(s.state().eta));
  }
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    const double m = dirs[a].dot(mean);
    const double sd = std::sqrt(dirs[a].dot(cov * dirs[a]));
    EXPECT_GT(ks_pvalue(proj[a], [&](double x) { return normal_cdf(x, m, sd); }), kKsLevel) << "direction " << a;
  }
}

TEST(FullConditional, NuggetIsInverseGamma) {
  const Toy toy = make_toy(30, 3);
  const MixtureHyper hyper = toy_hyper();
  Sampler s(toy.data, toy.tree, fixed_theta_config(toy.theta), hyper);
  s.set_state(perturbed_state(s));
  const DenseToy d = dense_toy(toy);
  const ChainState st = s.state();
  const double rss = (toy.data.response - toy.data.design * st.beta - d.b * st.eta).squaredNorm();
  const double shape = hyper.tau2_shape + 0.5 * toy.data.size();
  const double rate = hyper.tau2_rate + 0.5 * rss;
  std::vector<double> draws;
  for (int k = 0; k < kDraws; ++k) {
    s.update_nugget();
    draws.push_back(s.state().tau2);
  }
  EXPECT_GT(ks_pvalue(draws, [&](double x) { return boost::math::gamma_q(shape, rate / x); }), kKsLevel);
}

TEST(FullConditional, RhoGivenIndicatorsIsBeta) {
  // With one level below the root, p_1 = rho, so rho | Z is
  // Beta(alpha + #active, beta + #inactive) among the level-1 nodes.
  const std::vector<Location> pts = testing::random_points(20, 4);
  const Dataset data = Dataset::with_intercept(pts, Eigen::VectorXd::Zero(20));
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{1, 4, 1, PartitionMode::kRectangular, 0, false});
  ChainConfig cfg = fixed_theta_config(CovarianceParams{});
  cfg.initial_widths[static_cast<int>(MhParam::kRho)] = 0.8;
  const MixtureHyper hyper = toy_hyper();
  Sampler s(data, tree, cfg, hyper);
  ChainState st = s.state();
  st.z = {1, 1, 0, 1, 1};
  s.set_state(st);
  std::vector<double> draws;
  for (int k = 0; k < kDraws; ++k) {
    for (int t = 0; t < 10; ++t) s.update_rho();
    draws.push_back(s.state().rho);
  }
  const double a = hyper.rho_alpha + 3.0;
  const double b = hyper.rho_beta + 1.0;
  EXPECT_GT(ks_pvalue(draws, [&](double x) { return boost::math::ibeta(a, b, x); }), kKsLevel);
}

// Level-1 prior covariance K = v_1(Q, Q)^{-1} by the dense recursion.
Eigen::MatrixXd level1_covariance(const PartitionTree& tree, int node, const CovarianceParams& p) {
  const std::vector<Location>& q0 = tree.node(0).knots;
  const std::vector<Location>& q1 = tree.node(node).knots;
  auto c = [&](const std::vector<Location>& a, const std::vector<Location>& b) {
    Eigen::MatrixXd m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < b.size(); ++k) m(i, k) = matern(distance(a[i], b[k]), p);
    }
    return m;
  };
  Eigen::MatrixXd c00 = c(q0, q0);
  c00.diagonal().array() += 1e-10 * p.sigma2;
  Eigen::MatrixXd v = c(q1, q1) - c(q1, q0) * c00.ldlt().solve(c(q0, q1));
  v.diagonal().array() += 1e-10 * p.sigma2;
  return v.inverse();
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + ldlt.vectorD().array().log().sum() +
                 x.dot(ldlt.solve(x)));
}

void expect_proportion(const std::vector<int>& hits, double p) {
  double mean = 0.0;
  for (int h : hits) mean += h;
  mean /= static_cast<double>(hits.size());
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(hits.size()));
  EXPECT_LT(std::abs(mean - p), 4.0 * se) << "observed " << mean << " expected " << p;
}

TEST(FullConditional, IndicatorGivenWeightsIsTwoPointMixture) {
  const std::vector<Location> pts = testing::random_points(40, 5);
  const Dataset data = Dataset::with_intercept(pts, Eigen::VectorXd::Zero(40));
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{1, 2, 4, PartitionMode::kRectangular, 0, false});
  const CovarianceParams theta{1.0, 0.2, 1.0};
  ChainConfig cfg = fixed_theta_config(theta);
  cfg.indicator_update = IndicatorUpdate::kConditional;
  cfg.initial_shrink = 10.0;
  Sampler s(data, tree, cfg, toy_hyper());
  ChainState st = s.state();
  st.rho = 0.6;
  const int node = tree.node_id(1, 0);
  const NodeBasis& nb = s.basis().node(node);
  const Eigen::MatrixXd k = level1_covariance(tree, node, theta);
  // Scale a fixed direction so the two components have comparable density.
  Eigen::VectorXd dir = Eigen::Vector4d(1.0, -0.5, 0.3, 0.8);
  const double q1 = dir.dot(k.ldlt().solve(dir));
  dir *= std::sqrt(1.0 / q1);
  st.eta.segment(nb.weight_offset, 4) = dir;
  s.set_state(st);

  const double la = std::log(0.6) + mvn_logpdf(dir, k);
  const double ls = std::log(0.4) + mvn_logpdf(dir, k / 10.0);
  const double p = 1.0 / (1.0 + std::exp(ls - la));
  ASSERT_GT(p, 0.05);
  ASSERT_LT(p, 0.95);
  std::vector<int> hits;
  for (int t = 0; t < kDraws; ++t) {
    s.update_indicator(node);
    hits.push_back(s.state().z[static_cast<std::size_t>(node)]);
  }
  expect_proportion(hits, p);
}

TEST(FullConditional, CollapsedIndicatorMatchesMarginalLikelihood) {
  const std::vector<Location> pts = testing::random_points(40, 6);
  Rng rng(6);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = 0.4 * std::sin(9.0 * pts[i].y) + 0.2 * rng.normal();
  const Dataset data = Dataset::with_intercept(pts, y);
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{1, 2, 4, PartitionMode::kRectangular, 0, false});
  const CovarianceParams theta{1.0, 0.2, 1.0};
  ChainConfig cfg = fixed_theta_config(theta);
  cfg.initial_shrink = 30.0;
  Sampler s(data, tree, cfg, toy_hyper());
  ChainState st = s.state();
  st.rho = 0.3;
  st.tau2 = 0.05;
  st.beta(0) = 0.0;
  s.set_state(st);
  const int node = tree.node_id(1, 1);
  const NodeBasis& nb = s.basis().node(node);
  ASSERT_GT(nb.rows.size(), 5u);

  // e = y - X beta - contributions of every other node, on the node's rows.
  const Eigen::VectorXd others = s.basis().apply(st.eta) -
                                 [&] {
                                   Eigen::VectorXd own = Eigen::VectorXd::Zero(st.eta.size());
                                   own.segment(nb.weight_offset, 4) = st.eta.segment(nb.weight_offset, 4);
                                   return s.basis().apply(own);
                                 }();
  Eigen::VectorXd e(static_cast<Eigen::Index>(nb.rows.size()));
  for (std::size_t i = 0; i < nb.rows.size(); ++i) e(i) = y(nb.rows[i]) - st.beta(0) - others(nb.rows[i]);
  const Eigen::MatrixXd k = level1_covariance(tree, node, theta);
  const Eigen::MatrixXd noise = st.tau2 * Eigen::MatrixXd::Identity(e.size(), e.size());
  const double la = std::log(0.3) + mvn_logpdf(e, noise + nb.basis * k * nb.basis.transpose());
  const double ls = std::log(0.7) + mvn_logpdf(e, noise + nb.basis * k * nb.basis.transpose() / 30.0);
  const double p = 1.0 / (1.0 + std::exp(ls - la));
  ASSERT_GT(p, 0.02);
  ASSERT_LT(p, 0.98);
  std::vector<int> hits;
  for (int t = 0; t < kDraws; ++t) {
    s.update_block_collapsed(node);
    hits.push_back(s.state().z[static_cast<std::size_t>(node)]);
  }
  expect_proportion(hits, p);
}

struct Moments {
  std::vector<std::vector<double>> values;
  explicit Moments(std::size_t k) : values(k) {}
};

std::vector<double> test_functions(const ChainState& st) {
  return {st.beta(0), st.beta(0) * st.beta(0), st.tau2, st.theta.sigma2, st.theta.phi, st.theta.nu, st.rho, st.eta(0)};
}
const char* const kFunctionNames[] = {"beta", "beta^2", "tau2", "sigma2", "phi", "nu", "rho", "eta_1"};

TEST(JointDistribution, SuccessiveConditionalMatchesMarginal) {
  const Toy toy = make_toy(15, 7);
  const MixtureHyper hyper = toy_hyper();
  Rng rng(2024);

  auto prior_state = [&](ChainState st) {
    st.beta(0) = rng.normal(0.0, std::sqrt(hyper.mean_prior_variance));
    st.tau2 = rng.inverse_gamma(hyper.tau2_shape, hyper.tau2_rate);
    st.rho = rng.beta(hyper.rho_alpha, hyper.rho_beta);
    st.theta = {rng.inverse_gamma(hyper.sigma2_shape, hyper.sigma2_rate), rng.gamma(hyper.phi_shape, hyper.phi_rate),
                rng.uniform(0.0, hyper.nu_max)};
    const BasisSystem sys = BasisSystem::build(toy.tree, toy.data.locations, st.theta);
    Eigen::VectorXd xi(st.eta.size());
    for (Eigen::Index k = 0; k < xi.size(); ++k) xi(k) = rng.normal();
    st.eta = sys.node(0).prior.llt.matrixU().solve(xi);
    return st;
  };
  auto simulate_response = [&](const Sampler& s) {
    const ChainState& st = s.state();
    Eigen::VectorXd y = s.basis().apply(st.eta);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += st.beta(0) + std::sqrt(st.tau2) * rng.normal();
    return y;
  };

  ChainConfig cfg;
  cfg.estimate_theta = true;
  cfg.tune_shrink = false;
  cfg.n_burn = 2000;
  cfg.n_iter = 1000000;
  cfg.seed = 31;
  cfg.theta = toy.theta;
  Sampler s(toy.data, toy.tree, cfg, hyper);

  const std::size_t nf = std::size(kFunctionNames);
  Moments mc(nf), sc(nf);
  for (int t = 0; t < 40000; ++t) {
    const std::vector<double> g = test_functions(prior_state(s.state()));
    for (std::size_t k = 0; k < nf; ++k) mc.values[k].push_back(g[k]);
  }
  s.set_state(prior_state(s.state()));
  s.set_response(simulate_response(s));
  for (int t = 0; t < 2000 + 60000; ++t) {
    s.sweep();
    s.set_response(simulate_response(s));
    if (t < 2000) continue;  // proposal adaptation
    const std::vector<double> g = test_functions(s.state());
    for (std::size_t k = 0; k < nf; ++k) sc.values[k].push_back(g[k]);
  }
  for (std::size_t k = 0; k < nf; ++k) {
    const auto& a = mc.values[k];
    const auto& b = sc.values[k];
    double ma = 0.0, mb = 0.0, va = 0.0;
    for (double v : a) ma += v;
    for (double v : b) mb += v;
    ma /= a.size();
    mb /= b.size();
    for (double v : a) va += (v - ma) * (v - ma);
    va /= (a.size() - 1.0) * a.size();
    const double vb = batch_means_variance(b);
    const double z = (mb - ma) / std::sqrt(va + vb);
    EXPECT_LT(std::abs(z), 3.0) << kFunctionNames[k] << ": marginal " << ma << " successive " << mb;
  }
}

TEST(PriorOnly, MarginalsMatchPrior) {
  const Dataset empty = Dataset::with_intercept({}, Eigen::VectorXd(0));
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{2, 4, 4, PartitionMode::kRectangular, 0, false});
  const MixtureHyper hyper = toy_hyper();
  ChainConfig cfg;
  cfg.estimate_theta = true;
  cfg.tune_shrink = false;
  cfg.n_burn = 2000;
  cfg.n_iter = 42000;
  cfg.seed = 5;
  cfg.theta = {1.0, 0.2, 1.0};
  cfg.initial_tau2 = 1.0;
  const ChainOutput out = run_chain(empty, tree, cfg, hyper);
  ASSERT_EQ(out.num_draws, 40000);

  std::vector<double> z1, z2;
  for (const Indicators& z : out.z) {
    double a = 0.0, b = 0.0;
    for (int j = 0; j < 4; ++j) a += z[static_cast<std::size_t>(tree.node_id(1, j))];
    for (int j = 0; j < 16; ++j) b += z[static_cast<std::size_t>(tree.node_id(2, j))];
    z1.push_back(a / 4.0);
    z2.push_back(b / 16.0);
  }
  auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const double a = hyper.rho_alpha, b = hyper.rho_beta;
  struct Check {
    const char* name;
    std::vector<double> draws;
    double expected;
  };
  const std::vector<Check> checks = {
      {"beta", to_vec(out.beta.col(0)), 0.0},
      {"tau2", to_vec(out.tau2), hyper.tau2_rate / (hyper.tau2_shape - 1.0)},
      {"sigma2", to_vec(out.sigma2), hyper.sigma2_rate / (hyper.sigma2_shape - 1.0)},
      {"phi", to_vec(out.phi), hyper.phi_shape / hyper.phi_rate},
      {"nu", to_vec(out.nu), 0.5 * hyper.nu_max},
      {"rho", to_vec(out.rho), a / (a + b)},
      // P(Z_1 = 1) = E[rho]; P(Z_2 = 1) = E[rho * rho^2] = E[rho^3].
      {"Z level 1", z1, a / (a + b)},
      {"Z level 2", z2, a * (a + 1) * (a + 2) / ((a + b) * (a + b + 1) * (a + b + 2))},
  };
  for (const Check& c : checks) {
    double m = 0.0;
    for (double v : c.draws) m += v;
    m /= static_cast<double>(c.draws.size());
    const double se = std::sqrt(batch_means_variance(c.draws));
    EXPECT_LT(std::abs(m - c.expected), 4.0 * se + 1e-12) << c.name << ": " << m << " vs " << c.expected;
  }

  // Thinned draws against the closed-form prior laws.
  std::vector<double> rho, nu, tau2;
  for (int t = 0; t < out.num_draws; t += 20) {
    rho.push_back(out.rho(t));
    nu.push_back(out.nu(t));
    tau2.push_back(out.tau2(t));
  }
  EXPECT_GT(ks_pvalue(rho, [&](double x) { return boost::math::ibeta(a, b, x); }), kKsLevel);
  EXPECT_GT(ks_pvalue(nu, [&](double x) { return x / hyper.nu_max; }), kKsLevel);
  EXPECT_GT(ks_pvalue(tau2, [&](double x) { return boost::math::gamma_q(hyper.tau2_shape, hyper.tau2_rate / x); }),
            kKsLevel);
}

}  // namespace
}  // namespace mixmra
