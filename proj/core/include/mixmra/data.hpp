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

#include "mixmra/geometry.hpp"

namespace mixmra {

/// Observations y(s_i) at locations s_i with a design matrix for the mean.
struct Dataset {
  std::vector<Location> locations;
  Eigen::VectorXd response;
  /// n x p design; the default is a single intercept column.
  Eigen::MatrixXd design;
  std::vector<std::string> design_names;
  /// Optional ground-truth region label per row (simulation output), 0 = none.
  std::vector<int> region;
  /// Optional training-set flag per row.
  std::vector<std::uint8_t> train;

  std::size_t size() const { return locations.size(); }
  bool intercept_only() const { return design.cols() == 1 && design_names.size() == 1 &&
                                       design_names[0] == "intercept"; }

  /// Validates shapes; throws std::invalid_argument on mismatch.
  void validate() const;
  Dataset subset(const std::vector<int>& rows) const;
  /// Rows flagged as training (all rows when no flag is present).
  Dataset training() const;
  /// Rows not flagged as training (empty when no flag is present).
  Dataset held_out() const;

  static Dataset with_intercept(std::vector<Location> locations, Eigen::VectorXd response);
};

}  // namespace mixmra
