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

#include "mixmra/basis.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "mixmra/error.hpp"

namespace mixmra {

double PrecisionFactor::factor(const Eigen::MatrixXd& v, double scale, const BasisOptions& opts) {
  const Eigen::Index r = v.rows();
  for (double eps = opts.jitter_start; eps <= opts.jitter_max * (1.0 + 1e-9);
       eps *= opts.jitter_factor) {
    precision = v;
    precision.diagonal().array() += eps * scale;
    llt.compute(precision);
    if (llt.info() != Eigen::Success) continue;
    const auto diag = llt.matrixLLT().diagonal();
    bool ok = true;
    double ld = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
      if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
        ok = false;
        break;
      }
      ld += 2.0 * std::log(diag(i));
    }
    if (!ok) continue;
    log_det = ld;
    return eps;
  }
  throw NumericalError("prior precision factorization failed at maximum jitter " +
                       std::to_string(opts.jitter_max) + " (near-duplicate knots?)");
}

std::vector<Eigen::MatrixXd> BasisSystem::chain_rows(std::span<const Location> points,
                                                     std::span<const int> ancestors,
                                                     const PartitionTree& tree,
                                                     const MaternKernel& kernel) const {
  std::vector<Eigen::MatrixXd> rows(ancestors.size());
  for (std::size_t k = 0; k < ancestors.size(); ++k) {
    const int a = ancestors[k];
    const NodeBasis& nb = nodes_[static_cast<std::size_t>(a)];
    Eigen::MatrixXd r = cov_matrix(points, tree.node(a).knots, kernel);
    for (std::size_t kp = 0; kp < k; ++kp) {
      r.noalias() -= rows[kp] * nb.ancestor_kbt[kp];
    }
    rows[k] = std::move(r);
  }
  return rows;
}

BasisSystem BasisSystem::build(const PartitionTree& tree, std::span<const Location> locations,
                               const CovarianceParams& params, const BasisOptions& opts) {
  params.validate();
  BasisSystem sys;
  sys.params_ = params;
  sys.opts_ = opts;
  sys.assignment_ = assign_regions(tree, locations);
  sys.nodes_.resize(tree.size());
  const MaternKernel kernel(params, MaternKernel::Evaluation::kTabulated);

  // Prior recursion over knots, top-down so every ancestor is ready.
  std::size_t offset = 0;
  std::vector<int> chain;
  for (const Node& n : tree.nodes()) {
    NodeBasis& nb = sys.nodes_[static_cast<std::size_t>(n.id)];
    nb.level = n.level;
    nb.weight_offset = static_cast<int>(offset);
    offset += n.knots.size();

    chain.assign(static_cast<std::size_t>(n.level), 0);
    for (int id = n.parent, k = n.level - 1; id >= 0; id = tree.node(id).parent, --k) {
      chain[static_cast<std::size_t>(k)] = id;
    }
    std::vector<Eigen::MatrixXd> rows = sys.chain_rows(n.knots, chain, tree, kernel);
    Eigen::MatrixXd v = cov_matrix(n.knots, kernel);
    nb.ancestor_kbt.resize(chain.size());
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const NodeBasis& anc = sys.nodes_[static_cast<std::size_t>(chain[k])];
      nb.ancestor_kbt[k] = anc.prior.covariance_times(rows[k].transpose());
      v.noalias() -= rows[k] * nb.ancestor_kbt[k];
    }
    v = 0.5 * (v + v.transpose()).eval();
    nb.jitter = nb.prior.factor(v, params.sigma2, opts);
    if (nb.jitter > opts.jitter_start * (1.0 + 1e-9)) {
      sys.jitter_events_.push_back({n.id, nb.jitter});
    }
  }
  sys.num_weights_ = offset;

  // Data rows, grouped by finest-level node.
  const int leaf_first = tree.level_offset(tree.levels());
  const int leaf_count = tree.level_size(tree.levels());
  std::vector<std::vector<int>> by_leaf(static_cast<std::size_t>(leaf_count));
  for (std::size_t i = 0; i < locations.size(); ++i) {
    by_leaf[static_cast<std::size_t>(sys.assignment_.leaf(i) - leaf_first)].push_back(static_cast<int>(i));
  }
  std::vector<int> counts(tree.size(), 0);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    for (int m = 0; m <= tree.levels(); ++m) ++counts[static_cast<std::size_t>(sys.assignment_.node(i, m))];
  }
  for (std::size_t id = 0; id < tree.size(); ++id) {
    NodeBasis& nb = sys.nodes_[id];
    nb.basis.resize(counts[id], nb.rank());
    nb.rows.reserve(static_cast<std::size_t>(counts[id]));
  }
  std::vector<Location> pts;
  for (int g = 0; g < leaf_count; ++g) {
    const auto& idx = by_leaf[static_cast<std::size_t>(g)];
    if (idx.empty()) continue;
    pts.clear();
    for (int i : idx) pts.push_back(locations[static_cast<std::size_t>(i)]);
    const int leaf = leaf_first + g;
    chain.assign(static_cast<std::size_t>(tree.levels()) + 1, 0);
    for (int id = leaf, k = tree.levels(); id >= 0; id = tree.node(id).parent, --k) {
      chain[static_cast<std::size_t>(k)] = id;
    }
    std::vector<Eigen::MatrixXd> rows = sys.chain_rows(pts, chain, tree, kernel);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      NodeBasis& nb = sys.nodes_[static_cast<std::size_t>(chain[k])];
      const auto start = static_cast<Eigen::Index>(nb.rows.size());
      nb.basis.middleRows(start, rows[k].rows()) = rows[k];
      nb.rows.insert(nb.rows.end(), idx.begin(), idx.end());
    }
  }
  for (NodeBasis& nb : sys.nodes_) nb.gram.noalias() = nb.basis.transpose() * nb.basis;
  return sys;
}

BasisSystem BasisSystem::with_sigma2(double sigma2) const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("sigma2 must be positive");
  }
  BasisSystem out = *this;
  const double ratio = sigma2 / params_.sigma2;
  out.params_.sigma2 = sigma2;
  for (NodeBasis& nb : out.nodes_) {
    nb.basis *= ratio;
    nb.gram *= ratio * ratio;
    nb.prior.precision *= ratio;
    nb.prior.llt.compute(nb.prior.precision);
    if (nb.prior.llt.info() != Eigen::Success) {
      throw NumericalError("rescaled precision lost positive definiteness");
    }
    nb.prior.log_det += static_cast<double>(nb.rank()) * std::log(ratio);
  }
  return out;
}

BasisSystem::PathRows BasisSystem::evaluate_path(const PartitionTree& tree, const Location& s) const {
  return std::move(evaluate_paths(tree, std::span<const Location>(&s, 1)).front());
}

std::vector<BasisSystem::PathRows> BasisSystem::evaluate_paths(const PartitionTree& tree,
                                                               std::span<const Location> locations) const {
  std::vector<PathRows> out(locations.size());
  std::map<int, std::vector<std::size_t>> by_leaf;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    out[i].nodes = tree.path(locations[i]);
    by_leaf[out[i].nodes.back()].push_back(i);
  }
  const MaternKernel kernel(params_, MaternKernel::Evaluation::kTabulated);
  std::vector<Location> pts;
  for (const auto& [leaf, idx] : by_leaf) {
    pts.clear();
    for (std::size_t i : idx) pts.push_back(locations[i]);
    const std::vector<int>& chain = out[idx.front()].nodes;
    const std::vector<Eigen::MatrixXd> rows = chain_rows(pts, chain, tree, kernel);
    for (std::size_t q = 0; q < idx.size(); ++q) {
      PathRows& pr = out[idx[q]];
      pr.rows.reserve(rows.size());
      for (const Eigen::MatrixXd& r : rows) pr.rows.push_back(r.row(static_cast<Eigen::Index>(q)).transpose());
    }
  }
  return out;
}

Eigen::VectorXd BasisSystem::evaluate_basis(const PartitionTree& tree, const Location& s) const {
  const PathRows p = evaluate_path(tree, s);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_weights_));
  for (std::size_t k = 0; k < p.nodes.size(); ++k) {
    const NodeBasis& nb = node(p.nodes[k]);
    row.segment(nb.weight_offset, nb.rank()) = p.rows[k];
  }
  return row;
}

double BasisSystem::remainder_variance(const PartitionTree& tree, const Location& s, int level) const {
  if (level < 0 || level > tree.levels() + 1) throw std::out_of_range("remainder level out of range");
  const PathRows p = evaluate_path(tree, s);
  double v = params_.sigma2;
  for (int k = 0; k < level; ++k) {
    const NodeBasis& nb = node(p.nodes[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd& b = p.rows[static_cast<std::size_t>(k)];
    const Eigen::VectorXd kb = nb.prior.llt.solve(b);
    v -= b.dot(kb);
  }
  return v;
}

Eigen::VectorXd BasisSystem::apply(const Eigen::VectorXd& stacked_eta) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_locations()));
  for (const NodeBasis& nb : nodes_) {
    if (nb.rows.empty() || nb.rank() == 0) continue;
    const Eigen::VectorXd contrib = nb.basis * stacked_eta.segment(nb.weight_offset, nb.rank());
    for (std::size_t i = 0; i < nb.rows.size(); ++i) out(nb.rows[i]) += contrib(static_cast<Eigen::Index>(i));
  }
  return out;
}

Eigen::MatrixXd implied_covariance(const BasisSystem& system) {
  const auto n = static_cast<Eigen::Index>(system.num_locations());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t id = 0; id < system.num_nodes(); ++id) {
    const NodeBasis& nb = system.node(static_cast<int>(id));
    if (nb.rows.empty() || nb.rank() == 0) continue;
    const Eigen::MatrixXd kbt = nb.prior.covariance_times(nb.basis.transpose());
    const Eigen::MatrixXd block = nb.basis * kbt;
    for (std::size_t a = 0; a < nb.rows.size(); ++a) {
      for (std::size_t b = 0; b < nb.rows.size(); ++b) {
        c(nb.rows[a], nb.rows[b]) += block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  return c;
}

}  // namespace mixmra
