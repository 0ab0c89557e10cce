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

#include "mixmra/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mixmra/random.hpp"

namespace mixmra {

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScalarSummary summarize_draws(std::span<const double> draws) {
  if (draws.size() < 2) throw std::invalid_argument("summary needs at least two draws");
  const double n = static_cast<double>(draws.size());
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  ScalarSummary s;
  s.mean = mean;
  s.sd = std::sqrt(ss / (n - 1.0));
  s.q025 = quantile_sorted(sorted, 0.025);
  s.q975 = quantile_sorted(sorted, 0.975);
  return s;
}

const ScalarSummary& PosteriorSummary::scalar(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return scalars[k];
  }
  throw std::out_of_range("no summary for '" + name + "'");
}

double PosteriorSummary::mean_z(int level) const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t id = 0; id < node_levels.size(); ++id) {
    if (node_levels[id] != level) continue;
    sum += z_mean(static_cast<Eigen::Index>(id));
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / count;
}

namespace {

ScalarSummary summarize_vector(const Eigen::VectorXd& v) {
  return summarize_draws(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

PosteriorSummary summarize(const ChainOutput& chain) {
  if (chain.num_draws < 2) throw std::invalid_argument("summary needs at least two stored draws");
  PosteriorSummary s;
  s.num_draws = chain.num_draws;
  s.node_levels = chain.node_levels;
  for (Eigen::Index k = 0; k < chain.beta.cols(); ++k) {
    s.names.push_back("beta." + chain.beta_names[static_cast<std::size_t>(k)]);
    s.scalars.push_back(summarize_vector(chain.beta.col(k)));
  }
  const std::pair<const char*, const Eigen::VectorXd*> scalars[] = {
      {"tau2", &chain.tau2}, {"rho", &chain.rho},  {"sigma2", &chain.sigma2},
      {"phi", &chain.phi},   {"nu", &chain.nu},    {"L", &chain.shrink}};
  for (const auto& [name, draws] : scalars) {
    s.names.emplace_back(name);
    s.scalars.push_back(summarize_vector(*draws));
  }
  s.eta.reserve(static_cast<std::size_t>(chain.eta.cols()));
  for (Eigen::Index k = 0; k < chain.eta.cols(); ++k) s.eta.push_back(summarize_vector(chain.eta.col(k)));
  s.z_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain.node_levels.size()));
  for (const Indicators& z : chain.z) {
    for (std::size_t id = 0; id < z.size(); ++id) s.z_mean(static_cast<Eigen::Index>(id)) += z[id];
  }
  s.z_mean /= static_cast<double>(chain.z.size());
  return s;
}

nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json j;
  j["num_draws"] = s.num_draws;
  nlohmann::json params;
  for (std::size_t k = 0; k < s.names.size(); ++k) {
    const ScalarSummary& v = s.scalars[k];
    params[s.names[k]] = {{"mean", v.mean}, {"sd", v.sd}, {"q025", v.q025}, {"q975", v.q975}};
  }
  j["parameters"] = std::move(params);
  std::vector<double> z(s.z_mean.data(), s.z_mean.data() + s.z_mean.size());
  j["z_mean"] = std::move(z);
  j["node_levels"] = s.node_levels;
  nlohmann::json by_level = nlohmann::json::array();
  const int max_level = s.node_levels.empty() ? -1 : *std::max_element(s.node_levels.begin(), s.node_levels.end());
  for (int m = 0; m <= max_level; ++m) by_level.push_back(s.mean_z(m));
  j["z_mean_by_level"] = std::move(by_level);
  return j;
}

namespace {

RegionLabeling level_skeleton(const PartitionTree& tree, int level) {
  if (level < 0 || level > tree.levels()) throw std::invalid_argument("level outside the tree");
  RegionLabeling out;
  out.level = level;
  for (int k = 0; k < tree.level_size(level); ++k) {
    const Node& n = tree.node(tree.node_id(level, k));
    out.nodes.push_back(n.id);
    for (const Location& q : n.knots) {
      out.knots.push_back(q);
      out.knot_nodes.push_back(n.id);
    }
  }
  return out;
}

}  // namespace

RegionLabeling classify_regions(const PosteriorSummary& s, const PartitionTree& tree, int level) {
  RegionLabeling out = level_skeleton(tree, level);
  for (int id : out.nodes) {
    out.node_labels.push_back(s.z_mean(id) < 0.5 ? kRegionShrunk : kRegionActive);
  }
  for (int id : out.knot_nodes) {
    out.knot_labels.push_back(s.z_mean(id) < 0.5 ? kRegionShrunk : kRegionActive);
  }
  return out;
}

RegionLabeling classify_knots_by_weight(const PosteriorSummary& s, const PartitionTree& tree,
                                        int level, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  RegionLabeling out = level_skeleton(tree, level);
  out.node_labels.assign(out.nodes.size(), 0);
  std::size_t offset = 0;
  for (int id = 0; id < tree.level_offset(level); ++id) offset += tree.node(id).knots.size();
  for (std::size_t k = 0; k < out.knots.size(); ++k) {
    out.knot_labels.push_back(std::abs(s.eta[offset + k].mean) < threshold ? kRegionShrunk : kRegionActive);
  }
  return out;
}

long ConfusionMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double ConfusionMatrix::percent_correct(int region) const {
  const auto c = static_cast<std::size_t>(region - 1);
  const long column = counts[0][c] + counts[1][c];
  if (column == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * static_cast<double>(counts[c][c]) / static_cast<double>(column);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) counts[a][b] += o.counts[a][b];
  }
  return *this;
}

ConfusionMatrix confusion_matrix(const RegionLabeling& labels, std::span<const int> truth) {
  if (truth.size() != labels.knot_labels.size()) throw std::invalid_argument("truth length differs from knot count");
  ConfusionMatrix c;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const int got = labels.knot_labels[k];
    const int want = truth[k];
    if ((got != 1 && got != 2) || (want != 1 && want != 2)) throw std::invalid_argument("region labels must be 1 or 2");
    ++c.counts[static_cast<std::size_t>(got - 1)][static_cast<std::size_t>(want - 1)];
  }
  return c;
}

namespace {

void check_prediction_inputs(const ChainOutput& chain, std::span<const Location> locations,
                             const Eigen::MatrixXd& design) {
  if (chain.num_draws < 1) throw std::invalid_argument("prediction needs at least one stored draw");
  if (design.rows() != static_cast<Eigen::Index>(locations.size()) || design.cols() != chain.beta.cols()) {
    throw std::invalid_argument("prediction design does not match locations or coefficients");
  }
}

// values(d, i) += b(s_i)' eta_d for draws [first, last).
void add_spatial(Eigen::MatrixXd& values, const ChainOutput& chain, const BasisSystem& system,
                 const PartitionTree& tree, std::span<const Location> locations, int first, int last) {
  const int count = last - first;
  const std::vector<BasisSystem::PathRows> paths = system.evaluate_paths(tree, locations);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const BasisSystem::PathRows& rows = paths[i];
    auto column = values.col(static_cast<Eigen::Index>(i)).segment(first, count);
    for (std::size_t k = 0; k < rows.nodes.size(); ++k) {
      const NodeBasis& nb = system.node(rows.nodes[k]);
      if (nb.rank() == 0) continue;
      column.noalias() += chain.eta.middleRows(first, count).middleCols(nb.weight_offset, nb.rank()) * rows.rows[k];
    }
  }
}

Prediction finish_prediction(Eigen::MatrixXd& values, const ChainOutput& chain, bool include_noise,
                             std::uint64_t noise_seed) {
  const int draws = chain.num_draws;
  if (include_noise) {
    Rng rng(noise_seed);
    for (int d = 0; d < draws; ++d) {
      const double sd = std::sqrt(chain.tau2(d));
      for (Eigen::Index i = 0; i < values.cols(); ++i) values(d, i) += sd * rng.normal();
    }
  }
  Prediction out{values.colwise().mean().transpose(), Eigen::VectorXd::Zero(values.cols())};
  if (draws >= 2) {
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
      out.sd(i) = std::sqrt((values.col(i).array() - out.mean(i)).square().sum() / (draws - 1));
    }
  }
  return out;
}

}  // namespace

Prediction predict(const ChainOutput& chain, const BasisSystem& system, const PartitionTree& tree,
                   std::span<const Location> locations, const Eigen::MatrixXd& design,
                   bool include_noise, std::uint64_t noise_seed) {
  check_prediction_inputs(chain, locations, design);
  const int draws = chain.num_draws;
  Eigen::MatrixXd values = chain.beta.topRows(draws) * design.transpose();  // draws x n
  add_spatial(values, chain, system, tree, locations, 0, draws);
  return finish_prediction(values, chain, include_noise, noise_seed);
}

Prediction predict(const ChainOutput& chain, const PartitionTree& tree,
                   std::span<const Location> locations, const Eigen::MatrixXd& design,
                   bool include_noise, std::uint64_t noise_seed, const BasisOptions& opts) {
  check_prediction_inputs(chain, locations, design);
  const int draws = chain.num_draws;
  Eigen::MatrixXd values = chain.beta.topRows(draws) * design.transpose();
  std::optional<BasisSystem> system;
  int first = 0;
  while (first < draws) {
    const CovarianceParams theta{chain.sigma2(first), chain.phi(first), chain.nu(first)};
    int last = first + 1;
    while (last < draws && chain.sigma2(last) == theta.sigma2 && chain.phi(last) == theta.phi &&
           chain.nu(last) == theta.nu) {
      ++last;
    }
    // Path evaluation needs only the knot-level recursion, not data rows;
    // a sigma2-only change is an exact rescaling.
    if (system && system->params().phi == theta.phi && system->params().nu == theta.nu) {
      system = system->with_sigma2(theta.sigma2);
    } else {
      system = BasisSystem::build(tree, {}, theta, opts);
    }
    add_spatial(values, chain, *system, tree, locations, first, last);
    first = last;
  }
  return finish_prediction(values, chain, include_noise, noise_seed);
}

Score score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("score inputs differ in length");
  if (predicted.size() == 0) throw std::invalid_argument("score of empty vectors");
  const Eigen::ArrayXd d = (predicted - actual).array();
  return {d.square().mean(), d.abs().mean()};
}

namespace {

struct ErrorAccumulator {
  long count = 0;
  double z = 0.0, abs = 0.0, sq = 0.0, bias = 0.0, covered = 0.0;
  double rel_abs = 0.0, rel_bias = 0.0, rel_sq = 0.0;

  void add(const ScalarSummary& s, double truth, double z_mean, bool in_ci) {
    const double e = s.mean - truth;
    ++count;
    z += z_mean;
    abs += std::abs(e);
    sq += e * e;
    bias += e;
    covered += in_ci ? 1.0 : 0.0;
    if (truth != 0.0) {
      rel_abs += std::abs(e) / std::abs(truth);
      rel_bias += e / std::abs(truth);
      rel_sq += e * e / (truth * truth);
    }
  }

  WeightErrors finish(bool relative) const {
    WeightErrors w;
    w.count = count;
    if (count == 0) return w;
    const double c = static_cast<double>(count);
    w.mean_z = z / c;
    w.mae = abs / c;
    w.mse = sq / c;
    w.bias = bias / c;
    w.coverage = covered / c;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    w.rel_mae = relative ? rel_abs / c : nan;
    w.rel_bias = relative ? rel_bias / c : nan;
    w.rel_mse = relative ? rel_sq / c : nan;
    return w;
  }
};

}  // namespace

WeightRecovery coverage(const PosteriorSummary& s, const Eigen::VectorXd& truth, const BasisSystem& system) {
  if (truth.size() != static_cast<Eigen::Index>(s.eta.size())) {
    throw std::invalid_argument("truth length differs from the number of weights");
  }
  WeightRecovery out;
  out.covered.assign(s.eta.size(), 0);
  ErrorAccumulator all, zero, nonzero;
  for (std::size_t id = 0; id < system.num_nodes(); ++id) {
    const NodeBasis& nb = system.node(static_cast<int>(id));
    const double z = s.z_mean(static_cast<Eigen::Index>(id));
    for (int h = 0; h < nb.rank(); ++h) {
      const auto k = static_cast<std::size_t>(nb.weight_offset + h);
      const double t = truth(static_cast<Eigen::Index>(k));
      const ScalarSummary& e = s.eta[k];
      const bool in_ci = e.q025 <= t && t <= e.q975;
      out.covered[k] = in_ci ? 1 : 0;
      all.add(e, t, z, in_ci);
      (t == 0.0 ? zero : nonzero).add(e, t, z, in_ci);
    }
  }
  out.all = all.finish(false);
  out.zero = zero.finish(false);
  out.nonzero = nonzero.finish(true);
  return out;
}

namespace {

nlohmann::json errors_json(const WeightErrors& w) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"count", w.count},         {"mean_z", num(w.mean_z)},     {"mae", num(w.mae)},
          {"mse", num(w.mse)},         {"bias", num(w.bias)},         {"coverage", num(w.coverage)},
          {"rel_mae", num(w.rel_mae)}, {"rel_bias", num(w.rel_bias)}, {"rel_mse", num(w.rel_mse)}};
}

}  // namespace

nlohmann::json to_json(const WeightRecovery& w) {
  return {{"all", errors_json(w.all)}, {"zero", errors_json(w.zero)}, {"nonzero", errors_json(w.nonzero)}};
}

nlohmann::json to_json(const ConfusionMatrix& c) {
  auto pct = [&](int r) {
    const double v = c.percent_correct(r);
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  return {{"classified_1_true_1", c.counts[0][0]}, {"classified_1_true_2", c.counts[0][1]},
          {"classified_2_true_1", c.counts[1][0]}, {"classified_2_true_2", c.counts[1][1]},
          {"percent_correct_region_1", pct(1)},    {"percent_correct_region_2", pct(2)}};
}

}  // namespace mixmra
