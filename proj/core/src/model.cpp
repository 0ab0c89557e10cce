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

#include "mixmra/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"

namespace mixmra {

void MixtureHyper::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("hyperparameter '") + name + "' must be positive");
    }
  };
  positive(rho_alpha, "rho_alpha");
  positive(rho_beta, "rho_beta");
  positive(tau2_shape, "tau2_shape");
  positive(tau2_rate, "tau2_rate");
  positive(sigma2_shape, "sigma2_shape");
  positive(sigma2_rate, "sigma2_rate");
  positive(phi_shape, "phi_shape");
  positive(phi_rate, "phi_rate");
  positive(nu_max, "nu_max");
  positive(mean_prior_variance, "mean_prior_variance");
}

nlohmann::json to_json(const MixtureHyper& h) {
  return {{"rho_alpha", h.rho_alpha},
          {"rho_beta", h.rho_beta},
          {"tau2_shape", h.tau2_shape},
          {"tau2_rate", h.tau2_rate},
          {"sigma2_shape", h.sigma2_shape},
          {"sigma2_rate", h.sigma2_rate},
          {"phi_shape", h.phi_shape},
          {"phi_rate", h.phi_rate},
          {"nu_max", h.nu_max},
          {"mean_prior_variance", h.mean_prior_variance}};
}

MixtureHyper hyper_from_json(const nlohmann::json& j) {
  MixtureHyper h;
  auto read = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) throw ConfigError(std::string("hyper.") + key + " must be a number");
    dst = j.at(key).get<double>();
  };
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"rho_alpha", "rho_beta", "tau2_shape", "tau2_rate",
                                  "sigma2_shape", "sigma2_rate", "phi_shape", "phi_rate",
                                  "nu_max", "mean_prior_variance"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown field 'hyper." + key + "'");
  }
  read("rho_alpha", h.rho_alpha);
  read("rho_beta", h.rho_beta);
  read("tau2_shape", h.tau2_shape);
  read("tau2_rate", h.tau2_rate);
  read("sigma2_shape", h.sigma2_shape);
  read("sigma2_rate", h.sigma2_rate);
  read("phi_shape", h.phi_shape);
  read("phi_rate", h.phi_rate);
  read("nu_max", h.nu_max);
  read("mean_prior_variance", h.mean_prior_variance);
  h.validate();
  return h;
}

double level_inclusion_prob(double rho, int level) {
  if (level == 0) return 1.0;
  return std::pow(rho, level);
}

bool satisfies_heredity(const PartitionTree& tree, const Indicators& z) {
  if (z.size() != tree.size() || z.empty() || z[0] != 1) return false;
  for (const Node& n : tree.nodes()) {
    if (n.parent >= 0 && z[static_cast<std::size_t>(n.id)] && !z[static_cast<std::size_t>(n.parent)]) {
      return false;
    }
  }
  return true;
}

double log_prior_weights(const Eigen::VectorXd& eta, const PrecisionFactor& precision,
                         bool active, double shrink) {
  const double c = active ? 1.0 : shrink;
  const auto r = static_cast<double>(eta.size());
  return -0.5 * r * std::log(2.0 * std::numbers::pi) + 0.5 * (precision.log_det + r * std::log(c)) -
         0.5 * c * precision.quadratic(eta);
}

double log_prior_weights(const Eigen::VectorXd& eta, const Eigen::MatrixXd& covariance,
                         bool active, double shrink) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("weight prior covariance is not positive definite");
  }
  const double c = active ? 1.0 : shrink;
  const auto r = static_cast<double>(eta.size());
  const Eigen::VectorXd w = llt.matrixL().solve(eta);
  const double log_det_cov = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * r * std::log(2.0 * std::numbers::pi) - 0.5 * (log_det_cov - r * std::log(c)) -
         0.5 * c * w.squaredNorm();
}

double log_active_to_shrunk_ratio(double quadratic, int rank, double shrink) {
  return -0.5 * rank * std::log(shrink) + 0.5 * (shrink - 1.0) * quadratic;
}

double log_indicator_prior(const PartitionTree& tree, const Indicators& z, double rho) {
  if (!satisfies_heredity(tree, z)) {
    throw std::invalid_argument("indicator configuration violates the heredity constraint");
  }
  double lp = 0.0;
  for (const Node& n : tree.nodes()) {
    if (n.parent < 0 || !z[static_cast<std::size_t>(n.parent)]) continue;
    const double p = level_inclusion_prob(rho, n.level);
    lp += z[static_cast<std::size_t>(n.id)] ? std::log(p) : std::log1p(-p);
  }
  return lp;
}

}  // namespace mixmra
