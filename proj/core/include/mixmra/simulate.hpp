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

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/covariance.hpp"
#include "mixmra/data.hpp"
#include "mixmra/geometry.hpp"
#include "mixmra/random.hpp"

namespace mixmra {

enum class Study { kMraWeights, kTwoRegion };

const char* to_string(Study s);
Study study_from_string(const std::string& name);

/// Settings of a synthetic study. Defaults depend on the study; use
/// SimSpec::defaults().
struct SimSpec {
  Study study = Study::kTwoRegion;
  int n = 1012;
  int n_train = 756;  ///< two-region study only; 0 keeps every row for training
  CovarianceParams theta{1.0, 0.1, 1.0};
  double tau2 = 0.05;

  // Weight study: generation tree and zero-weight quadrants.
  TreeOptions tree{3, 4, 9, PartitionMode::kRectangular, 0, false};
  bool zero_mask = true;

  // Two-region study: ranges of the left (s_x < 0.5) and right halves.
  double phi_left = 1.0;
  double phi_right = 0.01;

  int replicates = 1;
  std::uint64_t seed = 1;

  static SimSpec defaults(Study study);
  void validate() const;
};

nlohmann::json to_json(const SimSpec& s);
/// Fields absent from `j` keep the defaults of the named study.
SimSpec sim_spec_from_json(const nlohmann::json& j);

/// Weight study output. Nodes of levels >= 1 lying inside the upper-right or
/// lower-left quadrant carry zero weights.
struct Sim1Result {
  Dataset data;  ///< region: 1 inside a zero-weight quadrant, 2 elsewhere
  PartitionTree tree;
  Eigen::VectorXd eta;          ///< true stacked weights
  std::vector<std::uint8_t> zeroed;  ///< per node
};

/// Two-region study output; region 1 is s_x < 0.5 (slow decay), region 2
/// the fast-decay half.
struct Sim2Result {
  Dataset data;
};

/// True when `node` lies inside [0, .5]^2 or [.5, 1]^2 of the unit square.
bool in_zero_quadrant(const Rect& node);
/// 1 for s_x < 0.5, else 2.
int two_region_label(const Location& s);

std::vector<Location> uniform_locations(int n, const Rect& domain, Rng& rng);

/// Draws N(0, cov) by Cholesky with jitter escalating from 1e-10 to 1e-6 of
/// the mean diagonal. Throws NumericalError when every attempt fails.
Eigen::VectorXd draw_dense_gaussian(const Eigen::MatrixXd& cov, Rng& rng);

/// Replicate k uses the seed derive_seed(spec.seed, k).
Sim1Result simulate_sim1(const SimSpec& spec, int replicate = 0);
Sim2Result simulate_sim2(const SimSpec& spec, int replicate = 0);

}  // namespace mixmra
