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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/basis.hpp"
#include "mixmra/data.hpp"
#include "mixmra/geometry.hpp"
#include "mixmra/sampler.hpp"

namespace mixmra {

struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);

/// Moments (sd with the n - 1 divisor) and 95% equal-tailed interval.
/// Throws std::invalid_argument for fewer than two draws.
ScalarSummary summarize_draws(std::span<const double> draws);

struct PosteriorSummary {
  int num_draws = 0;
  std::vector<std::string> names;  ///< beta.<name>, tau2, rho, sigma2, phi, nu, L
  std::vector<ScalarSummary> scalars;
  std::vector<ScalarSummary> eta;  ///< per stacked weight
  Eigen::VectorXd z_mean;          ///< E[Z_{m,j} | y] per node
  std::vector<int> node_levels;

  const ScalarSummary& scalar(const std::string& name) const;
  /// Average of E[Z | y] over the nodes of `level`.
  double mean_z(int level) const;
};

PosteriorSummary summarize(const ChainOutput& chain);
nlohmann::json to_json(const PosteriorSummary& s);

/// Region 1: shrunk, slow decay. Region 2: active, fast decay.
inline constexpr int kRegionShrunk = 1;
inline constexpr int kRegionActive = 2;

struct RegionLabeling {
  int level = 0;
  std::vector<int> nodes;        ///< ids of the level's nodes
  std::vector<int> node_labels;
  std::vector<Location> knots;   ///< every knot of the level
  std::vector<int> knot_nodes;
  std::vector<int> knot_labels;
};

/// Median probability model: a node is Region 1 iff E[Z | y] < 0.5, and its
/// knots inherit the label.
RegionLabeling classify_regions(const PosteriorSummary& s, const PartitionTree& tree, int level);

/// Plain M-RA rule: a knot is Region 1 iff |E[eta_{m,j,h} | y]| < threshold.
/// Node labels are left at 0.
RegionLabeling classify_knots_by_weight(const PosteriorSummary& s, const PartitionTree& tree,
                                        int level, double threshold);

/// Rows: classified region; columns: true region.
struct ConfusionMatrix {
  std::array<std::array<long, 2>, 2> counts{};

  long total() const;
  /// Share of true-region-k knots classified as k, or NaN when none.
  double percent_correct(int region) const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
};

/// `truth` holds 1 or 2 per knot of the labeling.
ConfusionMatrix confusion_matrix(const RegionLabeling& labels, std::span<const int> truth);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

/// Draw-averaged predictions x(s)' beta + b(s)' eta, with N(0, tau2) added
/// per draw when `include_noise`. `design` holds one row per location.
/// Every draw uses `system`, which suits fixed-theta chains.
/// Throws std::out_of_range for a location outside the domain.
Prediction predict(const ChainOutput& chain, const BasisSystem& system, const PartitionTree& tree,
                   std::span<const Location> locations, const Eigen::MatrixXd& design,
                   bool include_noise, std::uint64_t noise_seed = 0);

/// As above, with the basis rebuilt for every run of consecutive draws that
/// share theta.
Prediction predict(const ChainOutput& chain, const PartitionTree& tree,
                   std::span<const Location> locations, const Eigen::MatrixXd& design,
                   bool include_noise, std::uint64_t noise_seed = 0, const BasisOptions& opts = {});

struct Score {
  double mspe = 0.0;
  double mape = 0.0;
};

Score score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

/// Error metrics for a group of weights.
struct WeightErrors {
  long count = 0;
  double mean_z = 0.0;    ///< average E[Z | y] of the weights' nodes
  double mae = 0.0;
  double mse = 0.0;
  double bias = 0.0;      ///< mean of (posterior mean - truth)
  double coverage = 0.0;  ///< share of 95% intervals containing the truth
  /// Relative metrics against |truth|; only defined for nonzero weights.
  double rel_mae = 0.0;
  double rel_bias = 0.0;
  double rel_mse = 0.0;
};

struct WeightRecovery {
  WeightErrors all;
  WeightErrors zero;
  WeightErrors nonzero;
  std::vector<std::uint8_t> covered;  ///< per stacked weight
};

/// Compares weight posteriors with the generating values, stratified by
/// truth == 0. Level-0 weights are included.
WeightRecovery coverage(const PosteriorSummary& s, const Eigen::VectorXd& truth,
                        const BasisSystem& system);

nlohmann::json to_json(const WeightRecovery& w);
nlohmann::json to_json(const ConfusionMatrix& c);

}  // namespace mixmra
