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

#pragma once

#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mixmra/covariance.hpp"
#include "mixmra/geometry.hpp"

namespace mixmra {

struct BasisOptions {
  double jitter_start = 1e-10;  ///< relative to sigma2
  double jitter_max = 1e-6;
  double jitter_factor = 10.0;
};

/// Factorization of a node's prior precision K^{-1} = v_m(Q, Q) (+ jitter).
struct PrecisionFactor {
  Eigen::MatrixXd precision;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;  ///< log det(precision)

  /// Factorizes `v` after adding eps * scale to the diagonal, starting at
  /// opts.jitter_start and escalating. Returns the eps used; throws
  /// NumericalError when even opts.jitter_max fails.
  double factor(const Eigen::MatrixXd& v, double scale, const BasisOptions& opts);
  /// K x = precision^{-1} x.
  Eigen::MatrixXd covariance_times(const Eigen::MatrixXd& x) const { return llt.solve(x); }
  double quadratic(const Eigen::VectorXd& eta) const { return eta.dot(precision * eta); }
  Eigen::Index rank() const { return precision.rows(); }
};

/// Basis functions and prior of one tree node.
struct NodeBasis {
  int level = 0;
  int weight_offset = 0;  ///< position of this node's block in the stacked weights
  PrecisionFactor prior;
  double jitter = 0.0;
  /// K_{a_k} b_{a_k}(Q)' for every ancestor a_k (k < level), r_{a_k} x r.
  std::vector<Eigen::MatrixXd> ancestor_kbt;
  /// Data rows inside the node's region.
  std::vector<int> rows;
  /// b_{m,j} at those rows, |rows| x r.
  Eigen::MatrixXd basis;
  /// basis' basis.
  Eigen::MatrixXd gram;

  int rank() const { return static_cast<int>(prior.rank()); }
};

struct JitterEvent {
  int node = 0;
  double epsilon = 0.0;
};

/// Basis functions of every tree node evaluated at the data locations,
/// together with the block-diagonal prior covariances of the weights.
class BasisSystem {
 public:
  static BasisSystem build(const PartitionTree& tree, std::span<const Location> locations,
                           const CovarianceParams& params, const BasisOptions& opts = {});

  /// The same system at a different marginal variance. v_m scales linearly
  /// in sigma2, so bases scale by the ratio and precisions by the ratio.
  BasisSystem with_sigma2(double sigma2) const;

  const CovarianceParams& params() const { return params_; }
  const BasisOptions& options() const { return opts_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_weights() const { return num_weights_; }
  std::size_t num_locations() const { return assignment_.size(); }
  const NodeBasis& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const RegionAssignment& assignment() const { return assignment_; }
  const std::vector<JitterEvent>& jitter_events() const { return jitter_events_; }

  /// Basis rows along the path of `s`: rows[k] = b_{k, path[k]}(s).
  struct PathRows {
    std::vector<int> nodes;
    std::vector<Eigen::VectorXd> rows;
  };
  PathRows evaluate_path(const PartitionTree& tree, const Location& s) const;
  /// Batched evaluate_path, sharing one kernel table and one recursion per
  /// finest-level node.
  std::vector<PathRows> evaluate_paths(const PartitionTree& tree, std::span<const Location> locations) const;

  /// Dense row over all stacked weights; zero outside the path of `s`.
  Eigen::VectorXd evaluate_basis(const PartitionTree& tree, const Location& s) const;

  /// Remainder variance v_level(s, s), for level in 0..M+1.
  double remainder_variance(const PartitionTree& tree, const Location& s, int level) const;

  /// sum_{m,j} B_{m,j} eta_{m,j} at the data locations.
  Eigen::VectorXd apply(const Eigen::VectorXd& stacked_eta) const;

 private:
  // Rows of b_{a_k}(points) for k = 0..depth along the chain `ancestors`.
  std::vector<Eigen::MatrixXd> chain_rows(std::span<const Location> points,
                                          std::span<const int> ancestors,
                                          const PartitionTree& tree,
                                          const MaternKernel& kernel) const;

  CovarianceParams params_;
  BasisOptions opts_;
  RegionAssignment assignment_;
  std::vector<NodeBasis> nodes_;
  std::size_t num_weights_ = 0;
  std::vector<JitterEvent> jitter_events_;
};

/// Dense covariance of the approximated process at the data locations,
/// sum_{m,j} B K B'. Testing utility: materializes an n x n matrix.
Eigen::MatrixXd implied_covariance(const BasisSystem& system);

}  // namespace mixmra
