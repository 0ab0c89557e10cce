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

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mixmra/geometry.hpp"

namespace mixmra {

/// Matérn parameters theta = (sigma2, phi, nu).
struct CovarianceParams {
  double sigma2 = 1.0;  ///< marginal variance
  double phi = 1.0;     ///< range; larger means slower decay
  double nu = 0.5;      ///< smoothness, in (0, 2]

  /// Throws std::invalid_argument unless sigma2 > 0, phi > 0, 0 < nu <= 2.
  void validate() const;
  friend bool operator==(const CovarianceParams&, const CovarianceParams&) = default;
};

/// Modified Bessel function of the second kind K_nu(x) for a fixed order.
///
/// Order-dependent constants are computed once at construction; evaluation
/// uses Temme's series for x <= 2 and Steed's continued fraction beyond,
/// followed by upward recurrence from the reduced order in [-1/2, 1/2).
class BesselK {
 public:
  explicit BesselK(double nu);

  double order() const { return nu_; }
  /// K_nu(x); throws std::domain_error unless x > 0.
  double operator()(double x) const;

 private:
  double nu_;
  double mu_;  // reduced order
  int steps_;  // recurrence steps from mu to nu
  double gam1_, gam2_, gampl_, gammi_;
  double fact_;  // pi*mu / sin(pi*mu)
};

double bessel_k(double nu, double x);

/// C(d) = sigma2 * 2^(1-nu) / Gamma(nu) * (d/phi)^nu * K_nu(d/phi).
///
/// kTabulated replaces the per-call Bessel evaluation by piecewise Chebyshev
/// interpolation of e^x * corr(x) in log x, built once per kernel (a few
/// hundred Bessel calls). Relative error stays below 1e-12; used wherever
/// many entries share one parameter set.
class MaternKernel {
 public:
  enum class Evaluation { kDirect, kTabulated };

  explicit MaternKernel(const CovarianceParams& p, Evaluation mode = Evaluation::kDirect);

  const CovarianceParams& params() const { return p_; }
  double operator()(double d) const;
  double correlation(double d) const;

 private:
  CovarianceParams p_;
  BesselK bessel_;
  double inv_phi_;
  double log_norm_;  // log(2^(1-nu) / Gamma(nu))
  int closed_form_;  // 1 for nu = 1/2, 3 for nu = 3/2, 0 otherwise
  std::vector<double> table_;  // Chebyshev coefficients, kTableDegree per piece

  double direct_correlation(double x) const;
};

double matern(double d, const CovarianceParams& p);

/// |a| x |b| matrix of Matérn covariances between two location sets.
Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const CovarianceParams& p);
Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const MaternKernel& kernel);
/// Symmetric |a| x |a| covariance; the upper triangle is mirrored exactly.
Eigen::MatrixXd cov_matrix(std::span<const Location> a, const MaternKernel& kernel);

}  // namespace mixmra
