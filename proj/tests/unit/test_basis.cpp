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
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "mixmra/basis.hpp"
#include "mixmra/error.hpp"
#include "test_support.hpp"

namespace mixmra {
namespace {

// Dense oracle of the multi-resolution covariance. Works on the union P of
// data and knots: V_0 = C(P, P); per level-m region j with knots Q,
// T_m = V_m[:, Q] V_m[Q, Q]^{-1} V_m[Q, :] restricted to pairs in region j,
// and V_{m+1} = V_m - T_m on those pairs, zero across regions. The implied
// covariance is sum_m T_m plus the level-(M+1) remainder within leaves.
Eigen::MatrixXd oracle_covariance(const PartitionTree& tree, const std::vector<Location>& data,
                                  const CovarianceParams& p, bool add_final_remainder) {
  std::vector<Location> pts = data;
  std::vector<std::vector<int>> knot_index(tree.size());
  for (const Node& n : tree.nodes()) {
    for (const Location& q : n.knots) {
      knot_index[static_cast<std::size_t>(n.id)].push_back(static_cast<int>(pts.size()));
      pts.push_back(q);
    }
  }
  const auto np = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd v(np, np);
  for (Eigen::Index a = 0; a < np; ++a) {
    for (Eigen::Index b = 0; b < np; ++b) v(a, b) = matern(distance(pts[a], pts[b]), p);
  }
  std::vector<std::vector<int>> paths;
  for (const Location& s : pts) paths.push_back(tree.path(s));
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(np, np);
  for (int m = 0; m <= tree.levels(); ++m) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(np, np);
    for (int j = 0; j < tree.level_size(m); ++j) {
      const int id = tree.node_id(m, j);
      std::vector<int> members;
      for (Eigen::Index a = 0; a < np; ++a) {
        if (paths[a][m] == id) members.push_back(static_cast<int>(a));
      }
      const std::vector<int>& q = knot_index[static_cast<std::size_t>(id)];
      Eigen::MatrixXd vqq(q.size(), q.size()), vpq(members.size(), q.size());
      for (std::size_t a = 0; a < q.size(); ++a) {
        for (std::size_t b = 0; b < q.size(); ++b) vqq(a, b) = v(q[a], q[b]);
      }
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = 0; b < q.size(); ++b) vpq(a, b) = v(members[a], q[b]);
      }
      vqq.diagonal().array() += 1e-10 * p.sigma2;
      const Eigen::MatrixXd block = vpq * vqq.ldlt().solve(vpq.transpose());
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = 0; b < members.size(); ++b) t(members[a], members[b]) = block(a, b);
      }
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(np, np);
    for (Eigen::Index a = 0; a < np; ++a) {
      for (Eigen::Index b = 0; b < np; ++b) {
        if (paths[a][m] == paths[b][m]) next(a, b) = v(a, b) - t(a, b);
      }
    }
    total += t;
    v = next;
  }
  if (add_final_remainder) total += v;
  const auto n = static_cast<Eigen::Index>(data.size());
  return total.topLeftCorner(n, n);
}

Eigen::MatrixXd dense(const std::vector<Location>& pts, const CovarianceParams& p) {
  return cov_matrix(pts, MaternKernel(p));
}

TEST(Basis, ExactWhenKnotsEqualDataAtSingleLevel) {
  const std::vector<Location> data = testing::random_points(50, 21);
  const CovarianceParams p{1.0, 0.1, 1.0};
  const PartitionTree tree =
      PartitionTree::build(Rect{}, TreeOptions{0, 4, 50, PartitionMode::kRectangular, 0, true}, data);
  const BasisSystem sys = BasisSystem::build(tree, data, p);
  EXPECT_LT((implied_covariance(sys) - dense(data, p)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Basis, MatchesDenseRecursionOracle) {
  const std::vector<Location> data = testing::random_points(70, 3);
  for (double nu : {0.5, 1.0, 1.7}) {
    const CovarianceParams p{1.3, 0.2, nu};
    const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{2, 4, 4, PartitionMode::kRectangular, 0, false});
    const BasisSystem sys = BasisSystem::build(tree, data, p);
    const Eigen::MatrixXd expect = oracle_covariance(tree, data, p, false);
    EXPECT_LT((implied_covariance(sys) - expect).cwiseAbs().maxCoeff(), 1e-9) << "nu=" << nu;
  }
}

TEST(Basis, ExactWithinLeavesWhenFinestKnotsAreData) {
  const std::vector<Location> data = testing::random_points(60, 9);
  const CovarianceParams p{1.0, 0.15, 1.0};
  const PartitionTree tree =
      PartitionTree::build(Rect{}, TreeOptions{2, 4, 5, PartitionMode::kRectangular, 0, true}, data);
  const BasisSystem sys = BasisSystem::build(tree, data, p);
  const Eigen::MatrixXd c = implied_covariance(sys);
  const Eigen::MatrixXd d = dense(data, p);
  const RegionAssignment& a = sys.assignment();
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (a.leaf(i) == a.leaf(k)) {
        EXPECT_NEAR(c(i, k), d(i, k), 1e-8);
      }
    }
  }
  EXPECT_LT((c - oracle_covariance(tree, data, p, false)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Basis, RemainderVarianceDecreasesToZeroAtKnots) {
  const std::vector<Location> data = testing::random_points(40, 14);
  const CovarianceParams p{2.0, 0.3, 1.0};
  const PartitionTree tree =
      PartitionTree::build(Rect{}, TreeOptions{2, 4, 4, PartitionMode::kRectangular, 0, true}, data);
  const BasisSystem sys = BasisSystem::build(tree, data, p);
  for (const Location& s : testing::random_points(50, 15)) {
    EXPECT_DOUBLE_EQ(sys.remainder_variance(tree, s, 0), 2.0);
    double prev = 2.0;
    for (int m = 1; m <= 3; ++m) {
      const double v = sys.remainder_variance(tree, s, m);
      EXPECT_LE(v, prev + 1e-12);
      EXPECT_GE(v, -1e-9);
      prev = v;
    }
  }
  for (const Location& s : data) EXPECT_NEAR(sys.remainder_variance(tree, s, 3), 0.0, 1e-8);
  EXPECT_THROW(sys.remainder_variance(tree, data[0], 4), std::out_of_range);
}

TEST(Basis, SigmaRescaleEqualsRebuild) {
  const std::vector<Location> data = testing::random_points(90, 7);
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{2, 4, 9, PartitionMode::kRectangular, 0, false});
  const BasisSystem a = BasisSystem::build(tree, data, CovarianceParams{1.0, 0.1, 1.0}).with_sigma2(2.7);
  const BasisSystem b = BasisSystem::build(tree, data, CovarianceParams{2.7, 0.1, 1.0});
  EXPECT_EQ(a.params(), b.params());
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const NodeBasis& x = a.node(static_cast<int>(id));
    const NodeBasis& y = b.node(static_cast<int>(id));
    EXPECT_LT((x.basis - y.basis).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((x.gram - y.gram).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + y.gram.cwiseAbs().maxCoeff()));
    EXPECT_NEAR(x.prior.log_det, y.prior.log_det, 1e-6 * (1.0 + std::abs(y.prior.log_det)));
  }
  EXPECT_LT((implied_covariance(a) - implied_covariance(b)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Basis, PathEvaluationMatchesStoredRows) {
  const std::vector<Location> data = testing::random_points(120, 31);
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{3, 4, 4, PartitionMode::kRectangular, 0, false});
  const BasisSystem sys = BasisSystem::build(tree, data, CovarianceParams{1.0, 0.1, 0.8});
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()),
                                            static_cast<Eigen::Index>(sys.num_weights()));
  for (std::size_t i = 0; i < data.size(); ++i) b.row(static_cast<Eigen::Index>(i)) = sys.evaluate_basis(tree, data[i]);
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const NodeBasis& nb = sys.node(static_cast<int>(id));
    for (std::size_t k = 0; k < nb.rows.size(); ++k) {
      const Eigen::VectorXd stored = nb.basis.row(static_cast<Eigen::Index>(k)).transpose();
      const Eigen::VectorXd direct = b.row(nb.rows[k]).segment(nb.weight_offset, nb.rank()).transpose();
      EXPECT_LT((stored - direct).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
  Rng rng(3);
  Eigen::VectorXd eta(static_cast<Eigen::Index>(sys.num_weights()));
  for (Eigen::Index k = 0; k < eta.size(); ++k) eta(k) = rng.normal();
  EXPECT_LT((sys.apply(eta) - b * eta).cwiseAbs().maxCoeff(), 1e-12);

  const std::vector<Location> fresh = testing::random_points(40, 32);
  const auto batch = sys.evaluate_paths(tree, fresh);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const auto single = sys.evaluate_path(tree, fresh[i]);
    ASSERT_EQ(batch[i].nodes, single.nodes);
    for (std::size_t k = 0; k < single.rows.size(); ++k) {
      EXPECT_LT((batch[i].rows[k] - single.rows[k]).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(Basis, BasisVanishesOutsideNodeRegion) {
  // A level-1 basis function b_{1,j}(s) is defined only in region j; the
  // stacked row of s is zero for every node off its path.
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{2, 4, 4, PartitionMode::kRectangular, 0, false});
  const BasisSystem sys = BasisSystem::build(tree, {}, CovarianceParams{});
  const Location s{0.1, 0.1};
  const std::vector<int> path = tree.path(s);
  const Eigen::VectorXd row = sys.evaluate_basis(tree, s);
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const NodeBasis& nb = sys.node(static_cast<int>(id));
    const bool on_path = std::find(path.begin(), path.end(), static_cast<int>(id)) != path.end();
    if (!on_path) {
      EXPECT_EQ(row.segment(nb.weight_offset, nb.rank()).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(PrecisionFactor, JitterEscalatesThenFails) {
  BasisOptions opts;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(3, 3);
  PrecisionFactor f;
  EXPECT_DOUBLE_EQ(f.factor(v, 1.0, opts), 1e-10);
  EXPECT_NEAR(f.log_det, 3.0 * std::log1p(1e-10), 1e-15);
  v(2, 2) = -5e-9;  // needs eps > 5e-9
  const double eps = f.factor(v, 1.0, opts);
  EXPECT_NEAR(eps, 1e-8, 1e-20);
  v(2, 2) = -1.0;
  EXPECT_THROW(f.factor(v, 1.0, opts), NumericalError);
}

TEST(Basis, DuplicateKnotsStillFactorize) {
  std::vector<Location> data = testing::random_points(20, 2);
  data.push_back(data[0]);
  const PartitionTree tree =
      PartitionTree::build(Rect{}, TreeOptions{0, 4, 21, PartitionMode::kRectangular, 0, true}, data);
  const BasisSystem sys = BasisSystem::build(tree, data, CovarianceParams{1.0, 0.5, 1.0});
  EXPECT_GT(sys.node(0).jitter, 0.0);
  EXPECT_TRUE(implied_covariance(sys).allFinite());
}

}  // namespace
}  // namespace mixmra
