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
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mixmra/geometry.hpp"
#include "mixmra/io.hpp"
#include "mixmra/model.hpp"
#include "mixmra/sampler.hpp"

namespace mixmra::cli {

/// Everything a `fit` run depends on. The output directory is deliberately
/// not part of the serialized form, so a rerun elsewhere writes identical
/// metadata.
struct RunConfig {
  std::filesystem::path data;
  DatasetSchema schema;
  std::optional<Rect> domain;  ///< bounding box of all rows when empty
  TreeOptions tree{3, 4, 16, PartitionMode::kRectangular, 0, false};
  ChainConfig chain;
  MixtureHyper hyper;
  int label_level = -1;              ///< -1 selects the finest level
  /// Ground truth for knot labels: "none", "two-region" (s_x < 0.5 is
  /// region 1) or "zero-quadrant" (nodes inside a zero-weight quadrant).
  std::string knot_truth = "none";
  bool predict_include_noise = true;
  int chains = 1;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Relative data paths resolve against `base_dir`. Unknown fields throw
/// ConfigError naming the field.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Default output root: $MIXMRA_OUTPUT_ROOT, else ./mixmra_out.
std::filesystem::path output_root();

}  // namespace mixmra::cli
