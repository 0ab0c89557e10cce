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

#include "mixmra/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"

namespace mixmra {

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& context) {
  if (text == "NA" || text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (text == "Inf") return std::numeric_limits<double>::infinity();
  if (text == "-Inf") return -std::numeric_limits<double>::infinity();
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE) {
    throw IoError("cannot parse '" + text + "' as a number in " + context);
  }
  return v;
}

bool CsvTable::has_column(const std::string& name) const {
  for (const std::string& h : header) {
    if (h == name) return true;
  }
  return false;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw IoError("missing column '" + name + "'");
}

std::vector<double> CsvTable::numeric(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back(parse_double(rows[r][c], "column '" + name + "', row " + std::to_string(r + 1)));
  }
  return out;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::invalid_argument("CSV row width differs from header");
  rows.push_back(std::move(row));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (std::string& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
    std::size_t start = 0;
    while (start < f.size() && (f[start] == ' ' || f[start] == '\t')) ++start;
    f.erase(0, start);
  }
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw IoError("'" + path.string() + "' has no header row");
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream os = open_output(path);
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) os << ',';
      os << fields[k];
    }
    os << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  finish(os, path);
}

Dataset read_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  const CsvTable t = read_csv(path);
  const std::string where = " in '" + path.string() + "'";
  for (const std::string* name : {&schema.x, &schema.y, &schema.response}) {
    if (!t.has_column(*name)) throw IoError("missing column '" + *name + "'" + where);
  }
  for (const std::string& c : schema.covariates) {
    if (!t.has_column(c)) throw IoError("missing covariate column '" + c + "'" + where);
  }
  const std::vector<double> xs = t.numeric(schema.x), ys = t.numeric(schema.y), rs = t.numeric(schema.response);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  std::vector<Location> locs;
  locs.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) locs.push_back({xs[i], ys[i]});
  Eigen::VectorXd resp = Eigen::Map<const Eigen::VectorXd>(rs.data(), n);
  if (!resp.allFinite()) throw IoError("column '" + schema.response + "' has missing or non-finite values" + where);
  Dataset d = Dataset::with_intercept(std::move(locs), std::move(resp));
  if (!schema.covariates.empty()) {
    Eigen::MatrixXd x(n, 1 + static_cast<Eigen::Index>(schema.covariates.size()));
    x.col(0).setOnes();
    for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
      const std::vector<double> v = t.numeric(schema.covariates[k]);
      x.col(static_cast<Eigen::Index>(k) + 1) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
      d.design_names.push_back(schema.covariates[k]);
    }
    d.design = std::move(x);
  }
  if (t.has_column(schema.region)) {
    for (double v : t.numeric(schema.region)) d.region.push_back(std::isnan(v) ? 0 : static_cast<int>(v));
  }
  if (t.has_column(schema.train)) {
    for (double v : t.numeric(schema.train)) d.train.push_back(v != 0.0 ? 1 : 0);
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string(e.what()) + where);
  }
  return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  CsvTable t;
  t.header = {"x", "y", "response"};
  std::vector<Eigen::Index> extra;
  for (std::size_t k = 0; k < data.design_names.size(); ++k) {
    if (data.design_names[k] == "intercept") continue;
    t.header.push_back(data.design_names[k]);
    extra.push_back(static_cast<Eigen::Index>(k));
  }
  if (!data.region.empty()) t.header.push_back("region");
  if (!data.train.empty()) t.header.push_back("train");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<std::string> row = {format_double(data.locations[i].x), format_double(data.locations[i].y),
                                    format_double(data.response(r))};
    for (Eigen::Index c : extra) row.push_back(format_double(data.design(r, c)));
    if (!data.region.empty()) row.push_back(std::to_string(data.region[i]));
    if (!data.train.empty()) row.push_back(std::to_string(data.train[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

std::vector<std::string> draw_columns(const ChainOutput& chain, const PartitionTree& tree) {
  std::vector<std::string> cols;
  for (const std::string& n : chain.beta_names) cols.push_back("beta." + n);
  for (const Node& n : tree.nodes()) {
    for (std::size_t h = 0; h < n.knots.size(); ++h) {
      cols.push_back("eta." + std::to_string(n.level) + "." + std::to_string(n.index + 1) + "." + std::to_string(h + 1));
    }
  }
  for (const Node& n : tree.nodes()) cols.push_back("Z." + std::to_string(n.level) + "." + std::to_string(n.index + 1));
  for (const char* s : {"tau2", "rho", "sigma2", "phi", "nu", "L"}) cols.emplace_back(s);
  return cols;
}

void write_draws(const std::filesystem::path& path, const ChainOutput& chain, const PartitionTree& tree) {
  const std::vector<std::string> cols = draw_columns(chain, tree);
  if (cols.size() != static_cast<std::size_t>(chain.beta.cols() + chain.eta.cols()) + tree.size() + 6) {
    throw std::invalid_argument("chain output does not match the tree");
  }
  std::ofstream os = open_output(path);
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (int d = 0; d < chain.num_draws; ++d) {
    bool first = true;
    auto put = [&](const std::string& s) {
      if (!first) os << ',';
      os << s;
      first = false;
    };
    for (Eigen::Index k = 0; k < chain.beta.cols(); ++k) put(format_double(chain.beta(d, k)));
    for (Eigen::Index k = 0; k < chain.eta.cols(); ++k) put(format_double(chain.eta(d, k)));
    for (std::uint8_t z : chain.z[static_cast<std::size_t>(d)]) put(z ? "1" : "0");
    for (const Eigen::VectorXd* v : {&chain.tau2, &chain.rho, &chain.sigma2, &chain.phi, &chain.nu, &chain.shrink}) {
      put(format_double((*v)(d)));
    }
    os << '\n';
  }
  finish(os, path);
}

ChainOutput read_draws(const std::filesystem::path& path, const PartitionTree& tree,
                       const std::vector<std::string>& beta_names) {
  const CsvTable t = read_csv(path);
  ChainOutput out;
  out.beta_names = beta_names;
  out.num_draws = static_cast<int>(t.rows.size());
  const std::vector<std::string> cols = draw_columns(out, tree);
  if (t.header != cols) throw IoError("'" + path.string() + "' does not match the run's tree and design");
  const auto d = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(beta_names.size());
  Eigen::Index w = 0;
  for (const Node& n : tree.nodes()) {
    out.node_levels.push_back(n.level);
    for (std::size_t h = 0; h < n.knots.size(); ++h) out.weight_levels.push_back(n.level);
    w += static_cast<Eigen::Index>(n.knots.size());
  }
  out.beta.resize(d, p);
  out.eta.resize(d, w);
  for (Eigen::VectorXd* v : {&out.tau2, &out.rho, &out.sigma2, &out.phi, &out.nu, &out.shrink}) v->resize(d);
  const std::string where = "'" + path.string() + "'";
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    std::size_t c = 0;
    for (Eigen::Index k = 0; k < p; ++k) out.beta(r, k) = parse_double(row[c++], where);
    for (Eigen::Index k = 0; k < w; ++k) out.eta(r, k) = parse_double(row[c++], where);
    Indicators z(tree.size());
    for (std::size_t k = 0; k < tree.size(); ++k) {
      const std::string& f = row[c++];
      if (f != "0" && f != "1") throw IoError("indicator column holds '" + f + "' in " + where);
      z[k] = f == "1" ? 1 : 0;
    }
    out.z.push_back(std::move(z));
    for (Eigen::VectorXd* v : {&out.tau2, &out.rho, &out.sigma2, &out.phi, &out.nu, &out.shrink}) {
      (*v)(r) = parse_double(row[c++], where);
    }
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const RegionLabeling& labels,
                  const PosteriorSummary& summary, std::span<const int> truth) {
  CsvTable t;
  t.header = {"level", "node", "knot_x", "knot_y", "mean_Z", "label"};
  if (!truth.empty()) t.header.push_back("truth");
  int prev = -1, h = 0;
  for (std::size_t k = 0; k < labels.knots.size(); ++k) {
    const int id = labels.knot_nodes[k];
    h = id == prev ? h + 1 : 0;
    prev = id;
    std::vector<std::string> row = {std::to_string(labels.level), std::to_string(id),
                                    format_double(labels.knots[k].x), format_double(labels.knots[k].y),
                                    format_double(summary.z_mean(id)), std::to_string(labels.knot_labels[k])};
    if (!truth.empty()) row.push_back(std::to_string(truth[k]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_predictions(const std::filesystem::path& path, std::span<const Location> locations,
                       const Prediction& pred, const Eigen::VectorXd* actual) {
  CsvTable t;
  t.header = {"x", "y", "mean", "sd"};
  if (actual) {
    t.header.push_back("actual");
    t.header.push_back("residual");
  }
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<std::string> row = {format_double(locations[i].x), format_double(locations[i].y),
                                    format_double(pred.mean(r)), format_double(pred.sd(r))};
    if (actual) {
      row.push_back(format_double((*actual)(r)));
      row.push_back(format_double((*actual)(r) - pred.mean(r)));
    }
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_variograms(const std::filesystem::path& path, std::span<const VariogramGroup> groups) {
  CsvTable t;
  t.header = {"group", "lower", "upper", "mean_distance", "gamma", "count"};
  for (const VariogramGroup& g : groups) {
    for (const VariogramBin& b : g.bins) {
      t.rows.push_back({g.name, format_double(b.lower), format_double(b.upper), format_double(b.mean_distance),
                        format_double(b.gamma), std::to_string(b.count)});
    }
  }
  write_csv(path, t);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream os = open_output(path);
  os << doc.dump(2) << '\n';
  finish(os, path);
}

}  // namespace mixmra
