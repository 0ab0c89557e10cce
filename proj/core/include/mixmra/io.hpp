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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/data.hpp"
#include "mixmra/diagnostics.hpp"
#include "mixmra/geometry.hpp"
#include "mixmra/inference.hpp"
#include "mixmra/sampler.hpp"

namespace mixmra {

/// 17 significant digits, so every double round-trips; "NA" for NaN.
std::string format_double(double v);
/// Inverse of format_double; "NA" and "nan" give NaN. Throws IoError.
double parse_double(const std::string& text, const std::string& context);

/// Comma-separated table with a header row. Quoting is not supported;
/// fields must not contain commas or newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has_column(const std::string& name) const;
  /// Throws IoError naming the missing column.
  std::size_t column(const std::string& name) const;
  std::vector<double> numeric(const std::string& name) const;
  void add_row(std::vector<std::string> row);
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

struct DatasetSchema {
  std::string x = "x";
  std::string y = "y";
  std::string response = "response";
  std::vector<std::string> covariates;  ///< an intercept is always added
  /// Optional columns, read when present.
  std::string region = "region";
  std::string train = "train";
};

Dataset read_dataset(const std::filesystem::path& path, const DatasetSchema& schema = {});
/// Columns x, y, response, covariates (non-intercept design columns),
/// then region and train when present.
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Column names of the draws table, in order.
std::vector<std::string> draw_columns(const ChainOutput& chain, const PartitionTree& tree);
/// One row per stored draw: beta.<name>, eta.m.j.h, Z.m.j, tau2, rho,
/// sigma2, phi, nu, L, with 1-based j and h.
void write_draws(const std::filesystem::path& path, const ChainOutput& chain, const PartitionTree& tree);
/// Reads a table written by write_draws. The adaptation log is left empty.
ChainOutput read_draws(const std::filesystem::path& path, const PartitionTree& tree,
                       const std::vector<std::string>& beta_names);

void write_labels(const std::filesystem::path& path, const RegionLabeling& labels,
                  const PosteriorSummary& summary, std::span<const int> truth = {});
/// Columns x, y, mean, sd, plus actual and residual (actual - mean) when
/// `actual` is given.
void write_predictions(const std::filesystem::path& path, std::span<const Location> locations,
                       const Prediction& pred, const Eigen::VectorXd* actual = nullptr);

struct VariogramGroup {
  std::string name;
  std::vector<VariogramBin> bins;
};
void write_variograms(const std::filesystem::path& path, std::span<const VariogramGroup> groups);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace mixmra
