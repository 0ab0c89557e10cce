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

#include "mixmra/covariance.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mixmra {

void CovarianceParams::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("sigma2 must be positive, got " + std::to_string(sigma2));
  }
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw std::invalid_argument("phi must be positive, got " + std::to_string(phi));
  }
  if (!(nu > 0.0 && nu <= 2.0)) {
    throw std::invalid_argument("nu must lie in (0, 2], got " + std::to_string(nu));
  }
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;
constexpr double kSeriesLimit = 2.0;

// Taylor coefficients of 1/Gamma(1 + x) about 0.
constexpr std::array<double, 27> kRecipGamma = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
};

}  // namespace

BesselK::BesselK(double nu) : nu_(nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw std::domain_error("Bessel order must be finite and non-negative");
  }
  steps_ = static_cast<int>(nu + 0.5);
  mu_ = nu - steps_;
  // gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2.
  const double mu2 = mu_ * mu_;
  double odd = 0.0;
  double even = 0.0;
  for (int k = static_cast<int>(kRecipGamma.size()) - 1; k >= 0; --k) {
    if (k % 2 == 0) {
      even = even * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
    } else {
      odd = odd * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
    }
  }
  gam1_ = -odd;
  gam2_ = even;
  gampl_ = gam2_ - mu_ * gam1_;
  gammi_ = gam2_ + mu_ * gam1_;
  const double pimu = std::numbers::pi * mu_;
  fact_ = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
}

double BesselK::operator()(double x) const {
  if (!(x > 0.0) || std::isnan(x)) {
    throw std::domain_error("bessel_k requires x > 0");
  }
  if (std::isinf(x)) return 0.0;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;
  const double mu2 = mu_ * mu_;
  double k_mu = 0.0;
  double k_mu1 = 0.0;
  if (x <= kSeriesLimit) {
    const double x2 = 0.5 * x;
    double d = -std::log(x2);
    double e = mu_ * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    double ff = fact_ * (gam1_ * std::cosh(e) + gam2_ * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl_;
    double q = 0.5 / (e * gammi_);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= d / di;
      p /= di - mu_;
      q /= di + mu_;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    k_mu = sum;
    k_mu1 = sum1 * xi2;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
      a -= 2.0 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    h = a1 * h;
    k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu_ + x + 0.5 - h) * xi;
  }
  for (int i = 1; i <= steps_; ++i) {
    const double next = (mu_ + i) * xi2 * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

double bessel_k(double nu, double x) { return BesselK(nu)(x); }

namespace {

// Table layout: pieces of equal width in t = log x over [kTableLo, kTableHi].
constexpr int kTableDegree = 12;
constexpr int kTablePieces = 27;
constexpr double kPieceWidth = 0.5;
constexpr double kTableHi = 6.551080335043404;  // log(700), below exp overflow
constexpr double kTableLo = kTableHi - kTablePieces * kPieceWidth;

}  // namespace

MaternKernel::MaternKernel(const CovarianceParams& p, Evaluation mode)
    : p_((p.validate(), p)), bessel_(p.nu), inv_phi_(1.0 / p.phi) {
  log_norm_ = (1.0 - p.nu) * std::numbers::ln2 - std::lgamma(p.nu);
  closed_form_ = p.nu == 0.5 ? 1 : (p.nu == 1.5 ? 3 : 0);
  if (mode == Evaluation::kTabulated && closed_form_ == 0) {
    const int pieces = kTablePieces;
    table_.resize(static_cast<std::size_t>(pieces * kTableDegree));
    std::array<double, kTableDegree> values{};
    for (int piece = 0; piece < pieces; ++piece) {
      const double mid = kTableLo + (piece + 0.5) * kPieceWidth;
      for (int k = 0; k < kTableDegree; ++k) {
        const double u = std::cos(std::numbers::pi * (k + 0.5) / kTableDegree);
        const double x = std::exp(mid + 0.5 * kPieceWidth * u);
        values[static_cast<std::size_t>(k)] = std::exp(x) * direct_correlation(x);
      }
      for (int j = 0; j < kTableDegree; ++j) {
        double c = 0.0;
        for (int k = 0; k < kTableDegree; ++k) {
          c += values[static_cast<std::size_t>(k)] *
               std::cos(std::numbers::pi * j * (k + 0.5) / kTableDegree);
        }
        table_[static_cast<std::size_t>(piece * kTableDegree + j)] =
            (j == 0 ? 1.0 : 2.0) * c / kTableDegree;
      }
    }
  }
}

double MaternKernel::direct_correlation(double x) const {
  if (x < 1e-150) return 1.0;
  if (x > 745.0) return 0.0;
  return std::exp(log_norm_ + p_.nu * std::log(x)) * bessel_(x);
}

double MaternKernel::correlation(double d) const {
  if (!std::isfinite(d) || d < 0.0) {
    throw std::domain_error("Matérn distance must be finite and non-negative");
  }
  if (d == 0.0) return 1.0;
  const double x = d * inv_phi_;
  if (closed_form_ == 1) return std::exp(-x);
  if (closed_form_ == 3) return (1.0 + x) * std::exp(-x);
  if (!table_.empty()) {
    const double t = std::log(x);
    if (t >= kTableLo && t < kTableHi) {
      const int piece = static_cast<int>((t - kTableLo) / kPieceWidth);
      const double u = 2.0 * (t - kTableLo - piece * kPieceWidth) / kPieceWidth - 1.0;
      const double* c = &table_[static_cast<std::size_t>(piece * kTableDegree)];
      // Clenshaw recurrence.
      double b1 = 0.0;
      double b2 = 0.0;
      for (int j = kTableDegree - 1; j >= 1; --j) {
        const double b0 = 2.0 * u * b1 - b2 + c[j];
        b2 = b1;
        b1 = b0;
      }
      return (u * b1 - b2 + c[0]) * std::exp(-x);
    }
  }
  return direct_correlation(x);
}

double MaternKernel::operator()(double d) const { return p_.sigma2 * correlation(d); }

double matern(double d, const CovarianceParams& p) { return MaternKernel(p)(d); }

Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const MaternKernel& kernel) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index k = 0; k < c.cols(); ++k) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      c(i, k) = kernel(distance(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(k)]));
    }
  }
  return c;
}

Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const CovarianceParams& p) {
  return cov_matrix(a, b, MaternKernel(p));
}

Eigen::MatrixXd cov_matrix(std::span<const Location> a, const MaternKernel& kernel) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    c(k, k) = kernel(0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double v = kernel(distance(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(k)]));
      c(i, k) = v;
      c(k, i) = v;
    }
  }
  return c;
}

}  // namespace mixmra
