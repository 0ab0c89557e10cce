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

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/covariance.hpp"
#include "mixmra/geometry.hpp"

namespace mixmra {

struct VariogramBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_distance = 0.0;  ///< NaN when empty
  double gamma = 0.0;          ///< NaN when empty
  long count = 0;
};

/// `n` equal-width edges from 0 to `max_dist`.
std::vector<double> equal_width_edges(double max_dist, int bins = 15);

/// Matheron estimator (1 / 2N) sum (y_i - y_k)^2 over pairs whose distance
/// falls in [edge_b, edge_{b+1}); the last bin is closed on the right.
/// Empty bins report count 0 and NaN values.
std::vector<VariogramBin> empirical_semivariogram(std::span<const Location> locations,
                                                  const Eigen::VectorXd& values,
                                                  std::span<const double> edges);

/// 15 bins up to half the diameter of the locations' bounding box.
std::vector<VariogramBin> empirical_semivariogram(std::span<const Location> locations,
                                                  const Eigen::VectorXd& values);

struct StationaryFitOptions {
  std::optional<double> fixed_nu;  ///< estimate nu in (0.05, 2] when empty
  int max_evaluations = 2000;
  double tolerance = 1e-8;   ///< on the simplex spread of objective values
  int max_points = 3000;     ///< dense-solver limit
};

struct StationaryFit {
  CovarianceParams theta;
  double tau2 = 0.0;
  Eigen::VectorXd beta;
  double log_likelihood = 0.0;
  bool converged = false;
  /// False when the profile likelihood is flat in phi around the optimum.
  bool phi_identified = true;
  int evaluations = 0;
};

/// Gaussian log-likelihood of y ~ N(X beta, C_theta + tau2 I).
double gaussian_log_likelihood(std::span<const Location> locations, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& design, const Eigen::VectorXd& beta,
                               const CovarianceParams& theta, double tau2);

/// Maximum likelihood for the Matérn + nugget model with the mean and
/// sigma2 profiled out; phi, the noise ratio and (optionally) nu are found
/// by Nelder-Mead after a coarse grid over phi. Requires 30 <= n <=
/// opts.max_points.
StationaryFit fit_stationary_region(std::span<const Location> locations, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& design, const StationaryFitOptions& opts = {});

/// Minimizes f from `start` with initial simplex steps `step`.
struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                             int max_evaluations, double tolerance);

/// Geweke z comparing the first `frac_a` and last `frac_b` of the draws,
/// with each segment's mean variance from non-overlapping batch means
/// (floor(sqrt(segment length)) batches). A constant chain gives 0.
/// Throws std::invalid_argument for fewer than 100 draws.
double geweke(std::span<const double> draws, double frac_a = 0.1, double frac_b = 0.5);

/// Variance of the mean of `x` from non-overlapping batch means.
double batch_means_variance(std::span<const double> x);

nlohmann::json to_json(const StationaryFit& f);

}  // namespace mixmra
