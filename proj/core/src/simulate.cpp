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

#include "mixmra/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "mixmra/basis.hpp"
#include "mixmra/error.hpp"

namespace mixmra {

const char* to_string(Study s) { return s == Study::kMraWeights ? "sim1" : "sim2"; }

Study study_from_string(const std::string& name) {
  if (name == "sim1" || name == "mra-weights") return Study::kMraWeights;
  if (name == "sim2" || name == "two-region") return Study::kTwoRegion;
  throw ConfigError("unknown study '" + name + "' (expected sim1 or sim2)");
}

SimSpec SimSpec::defaults(Study study) {
  SimSpec s;
  s.study = study;
  if (study == Study::kMraWeights) {
    s.n = 756;
    s.n_train = 0;
  }
  return s;
}

void SimSpec::validate() const {
  if (n < 2) throw ConfigError("simulate.n must be >= 2");
  if (n_train < 0 || n_train > n) throw ConfigError("simulate.n_train must lie in [0, n]");
  try {
    theta.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("simulate.theta: ") + e.what());
  }
  if (!(tau2 >= 0.0)) throw ConfigError("simulate.tau2 must be non-negative");
  if (study == Study::kTwoRegion && !(phi_left > 0.0 && phi_right > 0.0)) {
    throw ConfigError("simulate.phi_left and simulate.phi_right must be positive");
  }
  if (tree.levels < 0 || tree.children < 2 || tree.knots < 1) {
    throw ConfigError("simulate.tree needs levels >= 0, children >= 2, knots >= 1");
  }
  if (replicates < 1) throw ConfigError("simulate.replicates must be >= 1");
}

nlohmann::json to_json(const SimSpec& s) {
  nlohmann::json j;
  j["study"] = to_string(s.study);
  j["n"] = s.n;
  j["n_train"] = s.n_train;
  j["theta"] = {{"sigma2", s.theta.sigma2}, {"phi", s.theta.phi}, {"nu", s.theta.nu}};
  j["tau2"] = s.tau2;
  j["tree"] = {{"M", s.tree.levels}, {"J", s.tree.children}, {"r", s.tree.knots},
               {"mode", to_string(s.tree.mode)}, {"seed", s.tree.seed}};
  j["zero_mask"] = s.zero_mask;
  j["phi_left"] = s.phi_left;
  j["phi_right"] = s.phi_right;
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  return j;
}

SimSpec sim_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simulation spec must be a JSON object");
  Study study = Study::kTwoRegion;
  if (j.contains("study")) {
    if (!j["study"].is_string()) throw ConfigError("'study' must be a string");
    study = study_from_string(j["study"].get<std::string>());
  }
  SimSpec s = SimSpec::defaults(study);
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
    return v.get<long long>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "study") continue;
    if (key == "n") s.n = static_cast<int>(integer(v, key));
    else if (key == "n_train") s.n_train = static_cast<int>(integer(v, key));
    else if (key == "tau2") s.tau2 = number(v, key);
    else if (key == "phi_left") s.phi_left = number(v, key);
    else if (key == "phi_right") s.phi_right = number(v, key);
    else if (key == "replicates") s.replicates = static_cast<int>(integer(v, key));
    else if (key == "seed") {
      if (integer(v, key) < 0) throw ConfigError("'seed' must be non-negative");
      s.seed = v.get<std::uint64_t>();
    }
    else if (key == "zero_mask") {
      if (!v.is_boolean()) throw ConfigError("'zero_mask' must be a boolean");
      s.zero_mask = v.get<bool>();
    }
    else if (key == "theta") {
      if (!v.is_object()) throw ConfigError("'theta' must be an object");
      for (const auto& [tk, tv] : v.items()) {
        if (tk == "sigma2") s.theta.sigma2 = number(tv, "theta.sigma2");
        else if (tk == "phi") s.theta.phi = number(tv, "theta.phi");
        else if (tk == "nu") s.theta.nu = number(tv, "theta.nu");
        else throw ConfigError("unknown field 'theta." + tk + "'");
      }
    }
    else if (key == "tree") {
      if (!v.is_object()) throw ConfigError("'tree' must be an object");
      for (const auto& [tk, tv] : v.items()) {
        if (tk == "M") s.tree.levels = static_cast<int>(integer(tv, "tree.M"));
        else if (tk == "J") s.tree.children = static_cast<int>(integer(tv, "tree.J"));
        else if (tk == "r") s.tree.knots = static_cast<int>(integer(tv, "tree.r"));
        else if (tk == "mode") {
          if (!tv.is_string()) throw ConfigError("'tree.mode' must be a string");
          try {
            s.tree.mode = partition_mode_from_string(tv.get<std::string>());
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("tree.mode: ") + e.what());
          }
        }
        else if (tk == "seed") s.tree.seed = static_cast<std::uint64_t>(integer(tv, "tree.seed"));
        else throw ConfigError("unknown field 'tree." + tk + "'");
      }
    }
    else throw ConfigError("unknown field '" + key + "'");
  }
  s.validate();
  return s;
}

bool in_zero_quadrant(const Rect& r) {
  const bool lower_left = r.x1 <= 0.5 && r.y1 <= 0.5;
  const bool upper_right = r.x0 >= 0.5 && r.y0 >= 0.5;
  return lower_left || upper_right;
}

int two_region_label(const Location& s) { return s.x < 0.5 ? 1 : 2; }

std::vector<Location> uniform_locations(int n, const Rect& domain, Rng& rng) {
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(domain.x0, domain.x1);
    const double y = rng.uniform(domain.y0, domain.y1);
    out.push_back({x, y});
  }
  return out;
}

Eigen::VectorXd draw_dense_gaussian(const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::Index n = cov.rows();
  Eigen::VectorXd xi(n);
  for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.normal();
  if (n == 0) return xi;
  const double scale = cov.diagonal().mean();
  for (double eps = 1e-10; eps <= 1e-6 * (1.0 + 1e-9); eps *= 10.0) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += eps * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL() * xi;
  }
  throw NumericalError("covariance not positive definite even with jitter 1e-6");
}

Sim1Result simulate_sim1(const SimSpec& spec, int replicate) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(replicate)));
  const Rect domain{};
  std::vector<Location> locs = uniform_locations(spec.n, domain, rng);
  PartitionTree tree = PartitionTree::build(domain, spec.tree);
  const BasisSystem sys = BasisSystem::build(tree, locs, spec.theta);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.num_weights()));
  std::vector<std::uint8_t> zeroed(tree.size(), 0);
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const Node& node = tree.node(static_cast<int>(id));
    const NodeBasis& nb = sys.node(static_cast<int>(id));
    Eigen::VectorXd xi(nb.rank());
    for (int h = 0; h < nb.rank(); ++h) xi(h) = rng.normal();
    // K = precision^{-1} = (U'U)^{-1}, so U^{-1} xi ~ N(0, K).
    const Eigen::VectorXd draw = nb.prior.llt.matrixU().solve(xi);
    if (spec.zero_mask && node.level >= 1 && in_zero_quadrant(node.bounds)) {
      zeroed[id] = 1;
      continue;
    }
    eta.segment(nb.weight_offset, nb.rank()) = draw;
  }
  Eigen::VectorXd y = sys.apply(eta);
  const double sd = std::sqrt(spec.tau2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sd * rng.normal();

  Sim1Result out{Dataset::with_intercept(locs, std::move(y)), std::move(tree), std::move(eta),
                 std::move(zeroed)};
  out.data.region.reserve(locs.size());
  for (const Location& s : locs) {
    const bool ll = s.x < 0.5 && s.y < 0.5;
    const bool ur = s.x >= 0.5 && s.y >= 0.5;
    out.data.region.push_back(spec.zero_mask && (ll || ur) ? 1 : 2);
  }
  return out;
}

Sim2Result simulate_sim2(const SimSpec& spec, int replicate) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(replicate)));
  std::vector<Location> locs = uniform_locations(spec.n, Rect{}, rng);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(spec.n);
  for (int half = 1; half <= 2; ++half) {
    std::vector<Location> pts;
    std::vector<int> rows;
    for (int i = 0; i < spec.n; ++i) {
      if (two_region_label(locs[static_cast<std::size_t>(i)]) == half) {
        pts.push_back(locs[static_cast<std::size_t>(i)]);
        rows.push_back(i);
      }
    }
    CovarianceParams p = spec.theta;
    p.phi = half == 1 ? spec.phi_left : spec.phi_right;
    const Eigen::VectorXd w = draw_dense_gaussian(cov_matrix(pts, MaternKernel(p)), rng);
    for (std::size_t k = 0; k < rows.size(); ++k) y(rows[k]) = w(static_cast<Eigen::Index>(k));
  }
  const double sd = std::sqrt(spec.tau2);
  for (int i = 0; i < spec.n; ++i) y(i) += sd * rng.normal();

  Sim2Result out{Dataset::with_intercept(locs, std::move(y))};
  for (const Location& s : locs) out.data.region.push_back(two_region_label(s));
  if (spec.n_train > 0) {
    // Partial Fisher-Yates on row indices, driven by the pinned engine.
    std::vector<int> order(static_cast<std::size_t>(spec.n));
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < spec.n_train; ++k) {
      const int span = spec.n - k;
      const int pick = k + std::min(span - 1, static_cast<int>(rng.uniform() * span));
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick)]);
    }
    out.data.train.assign(static_cast<std::size_t>(spec.n), 0);
    for (int k = 0; k < spec.n_train; ++k) out.data.train[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
  }
  return out;
}

}  // namespace mixmra
