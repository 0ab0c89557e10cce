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

#include "mixmra/data.hpp"

#include <stdexcept>

namespace mixmra {

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(locations.size());
  if (response.size() != n) throw std::invalid_argument("response length differs from location count");
  if (design.rows() != n) throw std::invalid_argument("design row count differs from location count");
  if (static_cast<std::size_t>(design.cols()) != design_names.size()) {
    throw std::invalid_argument("design column names do not match design width");
  }
  if (!region.empty() && region.size() != locations.size()) {
    throw std::invalid_argument("region column length differs from location count");
  }
  if (!train.empty() && train.size() != locations.size()) {
    throw std::invalid_argument("train column length differs from location count");
  }
  if (!response.allFinite() || !design.allFinite()) {
    throw std::invalid_argument("response and design must be finite");
  }
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.design_names = design_names;
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  out.design.resize(static_cast<Eigen::Index>(rows.size()), design.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int i = rows[k];
    out.locations.push_back(locations[static_cast<std::size_t>(i)]);
    out.response(static_cast<Eigen::Index>(k)) = response(i);
    out.design.row(static_cast<Eigen::Index>(k)) = design.row(i);
    if (!region.empty()) out.region.push_back(region[static_cast<std::size_t>(i)]);
    if (!train.empty()) out.train.push_back(train[static_cast<std::size_t>(i)]);
  }
  return out;
}

Dataset Dataset::training() const {
  if (train.empty()) return *this;
  std::vector<int> rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i]) rows.push_back(static_cast<int>(i));
  }
  return subset(rows);
}

Dataset Dataset::held_out() const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!train[i]) rows.push_back(static_cast<int>(i));
  }
  return subset(rows);
}

Dataset Dataset::with_intercept(std::vector<Location> locations, Eigen::VectorXd response) {
  Dataset d;
  d.design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(locations.size()), 1);
  d.design_names = {"intercept"};
  d.locations = std::move(locations);
  d.response = std::move(response);
  return d;
}

}  // namespace mixmra
