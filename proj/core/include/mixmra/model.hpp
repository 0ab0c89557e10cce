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
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/basis.hpp"
#include "mixmra/geometry.hpp"

namespace mixmra {

/// Hyperparameters of the mixture prior and of the remaining parameters.
/// Inverse-Gamma and Gamma priors use the shape/rate parameterization.
///
/// The shrink factor L is not part of this struct: it is tuned during
/// burn-in and lives in ChainConfig / ChainState.
struct MixtureHyper {
  double rho_alpha = 1.0;
  double rho_beta = 1.0;
  double tau2_shape = 2.0;
  double tau2_rate = 1.0;
  double sigma2_shape = 2.0;
  double sigma2_rate = 1.0;
  double phi_shape = 0.001;
  double phi_rate = 0.001;
  double nu_max = 2.0;  ///< nu ~ Uniform(0, nu_max)
  /// Prior variance of the mean when the design is intercept-only. Designs
  /// with covariates get a flat prior on all coefficients.
  double mean_prior_variance = 1e6;

  void validate() const;
};

nlohmann::json to_json(const MixtureHyper& h);
MixtureHyper hyper_from_json(const nlohmann::json& j);

/// Per-node indicators Z_{m,j}; 1 selects the active (non-shrunk) component.
using Indicators = std::vector<std::uint8_t>;

/// p_m = rho^m.
double level_inclusion_prob(double rho, int level);

/// True when Z_{0,1} = 1 and no active node has an inactive parent.
bool satisfies_heredity(const PartitionTree& tree, const Indicators& z);

/// Log density of eta under N(0, K) (active) or N(0, K / L) (shrunk), with
/// K^{-1} given by its factorization.
double log_prior_weights(const Eigen::VectorXd& eta, const PrecisionFactor& precision,
                         bool active, double shrink);
/// Convenience overload factorizing the covariance K directly.
double log_prior_weights(const Eigen::VectorXd& eta, const Eigen::MatrixXd& covariance,
                         bool active, double shrink);

/// log of N(eta; 0, K) / N(eta; 0, K / L) for quadratic form q = eta' K^{-1} eta
/// and block size r: -(r/2) log L + (L - 1) q / 2.
double log_active_to_shrunk_ratio(double quadratic, int rank, double shrink);

/// Log prior mass of an indicator configuration under the heredity-
/// constrained Bernoulli(rho^m) prior. Throws std::invalid_argument on a
/// heredity violation.
double log_indicator_prior(const PartitionTree& tree, const Indicators& z, double rho);

}  // namespace mixmra
