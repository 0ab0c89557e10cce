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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixmra/simulate.hpp"
#include "run_config.hpp"

namespace mixmra::cli {

/// Writes one dataset CSV per replicate (sim1_rep<k>.csv or sim2_rep<k>.csv,
/// k from 1), the true weights of the weight study (sim1_rep<k>_weights.csv)
/// and spec.json. Returns the dataset paths.
std::vector<std::filesystem::path> run_simulate(const SimSpec& spec, const std::filesystem::path& out);

/// Fits one or more chains and writes draws.csv, summary.json, labels.csv,
/// fitted.csv, predictions.csv (held-out rows only), adaptation.json,
/// confusion.json (with knot truth) and metadata.json. Several chains go to
/// chain_<c> subdirectories with derived seeds. Returns the metadata (or
/// the chain index for several chains). Timing goes to `log` only.
nlohmann::json run_fit(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Configuration recorded in a metadata.json written by run_fit. Throws
/// IoError when the data file no longer matches the recorded hash.
RunConfig config_from_metadata(const std::filesystem::path& metadata_path);

struct PredictRequest {
  std::filesystem::path run_dir;
  std::filesystem::path locations;  ///< CSV with x, y and the covariates
  std::optional<bool> include_noise;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};
void run_predict(const PredictRequest& req);

struct VariogramRequest {
  std::filesystem::path data;
  std::string x = "x", y = "y", value = "response";
  std::string group;  ///< optional column splitting the rows
  int bins = 15;
  std::optional<double> max_distance;  ///< half the bounding-box diameter by default
  std::filesystem::path out;
};
void run_variogram(const VariogramRequest& req);

struct GewekeRequest {
  std::filesystem::path draws;
  std::vector<std::string> columns;  ///< every non-eta, non-Z column by default
  double first = 0.1;
  double last = 0.5;
  std::filesystem::path out;
};
nlohmann::json run_geweke(const GewekeRequest& req);

/// Sums the confusion matrices of one or more labels.csv files with a truth
/// column and writes a region-by-region table.
struct ConfusionRequest {
  std::vector<std::filesystem::path> labels;
  std::optional<int> level;
  std::filesystem::path out;
};
ConfusionMatrix run_confusion(const ConfusionRequest& req);

/// Stationary maximum-likelihood refit per group, plus fitted correlation
/// curves on a distance grid.
struct RefitRequest {
  std::filesystem::path data;
  std::string x = "x", y = "y", value = "response";
  std::string group;
  std::optional<double> fixed_nu;
  std::optional<double> max_distance;
  int curve_points = 101;
  std::filesystem::path out;
  std::filesystem::path curves;
};
void run_refit(const RefitRequest& req);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace mixmra::cli
