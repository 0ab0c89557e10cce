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

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include "mixmra/covariance.hpp"
#include "test_support.hpp"

namespace mixmra {
namespace {

struct BesselRef {
  double nu, x, value;
};

// K_nu(x) to 19 digits, computed offline with mpmath.besselk at 40-digit
// working precision.
const BesselRef kMpmath[] = {
    {0.05, 1e-06, 15.11552856947829162},
    {0.05, 0.001, 7.182654365388769047},
    {0.05, 0.1, 2.437019277201168394},
    {0.05, 0.5, 0.9258332416237405751},
    {0.05, 1.0, 0.4214093551541034791},
    {0.05, 1.99, 0.1153617943569173102},
    {0.05, 2.0, 0.1139529136683690345},
    {0.05, 2.01, 0.1125624339424817742},
    {0.05, 5.0, 0.003691944293433675819},
    {0.05, 12.0, 2.201045871742550024e-6},
    {0.05, 30.0, 2.13256492136261403e-14},
    {0.05, 50.0, 3.41025217037854027e-23},
    {0.3, 1e-06, 116.164630606269119},
    {0.3, 0.001, 14.40654752904102718},
    {0.3, 0.1, 2.805056475021572206},
    {0.3, 0.5, 0.9764741243817879171},
    {0.3, 1.0, 0.4350760242088020233},
    {0.3, 1.99, 0.1174807272976591268},
    {0.3, 2.0, 0.1160369743481192584},
    {0.3, 2.01, 0.1146122575169099092},
    {0.3, 5.0, 0.003721669328873425497},
    {0.3, 12.0, 2.208776072733587538e-6},
    {0.3, 30.0, 2.135627028326094877e-14},
    {0.3, 50.0, 3.413208199536853019e-23},
    {0.75, 1e-06, 32585.64305842638157},
    {0.75, 0.001, 183.2346385217582164},
    {0.75, 0.1, 5.596702511268131554},
    {0.75, 0.5, 1.291749816217912676},
    {0.75, 1.0, 0.5157753006959186286},
    {0.75, 1.99, 0.1295478356794960217},
    {0.75, 2.0, 0.1279029786291790263},
    {0.75, 2.01, 0.1262808781625253859},
    {0.75, 5.0, 0.003886159254974276494},
    {0.75, 12.0, 2.250979270409948204e-6},
    {0.75, 30.0, 2.152237744711505179e-14},
    {0.75, 50.0, 3.429214804693557442e-23},
    {1.0, 1e-06, 999999.9999927843242},
    {1.0, 0.001, 999.9962381560855535},
    {1.0, 0.1, 9.853844780870605574},
    {1.0, 0.5, 1.656441120003300894},
    {1.0, 1.0, 0.6019072301972345747},
    {1.0, 1.99, 0.141717561622401307},
    {1.0, 2.0, 0.1398658818165224273},
    {1.0, 2.01, 0.1380408773192077053},
    {1.0, 5.0, 0.004044613445452164208},
    {1.0, 12.0, 2.290757464767187816e-6},
    {1.0, 30.0, 2.167732001891549425e-14},
    {1.0, 50.0, 3.444102226717555613e-23},
    {1.25, 1e-06, 34086199.58792590156},
    {1.25, 0.001, 6061.472774488987383},
    {1.25, 0.1, 19.02248687064842679},
    {1.25, 0.5, 2.252066141149798699},
    {1.25, 1.0, 0.7311451879202113909},
    {1.25, 1.99, 0.1588973313755922782},
    {1.25, 2.0, 0.1567475478393932156},
    {1.25, 2.01, 0.1546302302941664168},
    {1.25, 5.0, 0.004257389528177460557},
    {1.25, 12.0, 2.342910259162410211e-6},
    {1.25, 30.0, 2.187815481099989104e-14},
    {1.25, 50.0, 3.463337593569306298e-23},
    {1.6, 1e-06, 5391629177.009427504},
    {1.6, 0.001, 85451.52819041583891},
    {1.6, 0.1, 53.70052021007634007},
    {1.6, 0.5, 3.772714904925264842},
    {1.6, 1.0, 1.021944773706107616},
    {1.6, 1.99, 0.1941225492017208375},
    {1.6, 2.0, 0.1913421973488196336},
    {1.6, 2.01, 0.1886070153987013339},
    {1.6, 5.0, 0.004661173304558204456},
    {1.6, 12.0, 2.438258974432054492e-6},
    {1.6, 30.0, 2.223883977009622854e-14},
    {1.6, 50.0, 3.497711153027549857e-23},
    {2.0, 1e-06, 1999999999999.500181},
    {2.0, 0.001, 1999999.500000971628},
    {2.0, 0.1, 199.5039646421141171},
    {2.0, 0.5, 7.550183551240869437},
    {2.0, 1.0, 1.624838898635177483},
    {2.0, 1.99, 0.2577314777250444456},
    {2.0, 2.0, 0.2537597545660558629},
    {2.0, 2.01, 0.2498584677840093609},
    {2.0, 5.0, 0.005308943712223459958},
    {2.0, 12.0, 2.582618308106022703e-6},
    {2.0, 30.0, 2.276992963255826333e-14},
    {2.0, 50.0, 3.547931838858197738e-23},
};

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Independent route: K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt. The
// integrand is smooth and decays double-exponentially, so the trapezoid
// rule converges geometrically.
double bessel_k_quadrature(double nu, double x) {
  const double h = 1.0 / 64.0;
  double sum = 0.5 * std::exp(-x);
  for (int k = 1;; ++k) {
    const double t = k * h;
    const double term = std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
    sum += term;
    if (term < 1e-300 || (term < 1e-18 * sum && t > 1.0)) break;
  }
  return h * sum;
}

TEST(BesselK, MatchesMpmathTable) {
  for (const BesselRef& r : kMpmath) {
    EXPECT_LT(rel_err(bessel_k(r.nu, r.x), r.value), 1e-12) << "nu=" << r.nu << " x=" << r.x;
  }
}

TEST(BesselK, OrderOneOracleWithinCriterionTolerance) {
  int checked = 0;
  for (const BesselRef& r : kMpmath) {
    if (r.nu != 1.0) continue;
    EXPECT_LT(rel_err(BesselK(1.0)(r.x), r.value), 1e-10) << "x=" << r.x;
    ++checked;
  }
  EXPECT_EQ(checked, 12);
}

TEST(BesselK, HalfIntegerClosedForms) {
  for (double x : {1e-4, 0.01, 0.3, 1.0, 1.9, 2.0, 2.1, 5.0, 17.0, 60.0, 300.0}) {
    const double base = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
    EXPECT_LT(rel_err(bessel_k(0.5, x), base), 1e-12) << x;
    EXPECT_LT(rel_err(bessel_k(1.5, x), base * (1.0 + 1.0 / x)), 1e-12) << x;
    EXPECT_LT(rel_err(bessel_k(2.5, x), base * (1.0 + 3.0 / x + 3.0 / (x * x))), 1e-12) << x;
  }
}

TEST(BesselK, AgreesWithBoostOnGrid) {
  for (double nu = 0.0; nu <= 2.0 + 1e-12; nu += 0.0625) {
    const BesselK k(nu);
    for (double lx = -4.0; lx <= 2.5; lx += 0.125) {
      const double x = std::pow(10.0, lx);
      EXPECT_LT(rel_err(k(x), boost::math::cyl_bessel_k(nu, x)), 1e-12) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselK, AgreesWithIntegralRepresentation) {
  for (double nu : {0.1, 0.5, 0.9, 1.0, 1.37, 2.0}) {
    for (double x : {0.05, 0.5, 1.5, 2.0, 2.5, 8.0, 30.0}) {
      EXPECT_LT(rel_err(bessel_k(nu, x), bessel_k_quadrature(nu, x)), 1e-11) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselK, RecurrenceAndSymmetry) {
  // K_{nu+1}(x) = K_{nu-1}(x) + (2 nu / x) K_nu(x).
  for (double nu : {1.1, 1.5, 1.9}) {
    for (double x : {0.2, 1.0, 3.0, 12.0}) {
      const double lhs = bessel_k(nu + 1.0, x);
      const double rhs = bessel_k(nu - 1.0, x) + 2.0 * nu / x * bessel_k(nu, x);
      EXPECT_LT(rel_err(lhs, rhs), 1e-12);
    }
  }
}

TEST(BesselK, RejectsInvalidArguments) {
  EXPECT_THROW(bessel_k(1.0, 0.0), std::domain_error);
  EXPECT_THROW(bessel_k(1.0, -1.0), std::domain_error);
  EXPECT_THROW(BesselK(-0.5), std::domain_error);
  EXPECT_EQ(bessel_k(1.0, std::numeric_limits<double>::infinity()), 0.0);
}

TEST(Matern, HalfSmoothnessIsExponential) {
  const CovarianceParams p{2.3, 0.17, 0.5};
  for (double d : {0.0, 1e-6, 0.01, 0.1, 0.5, 1.0, 3.0}) {
    const double expected = p.sigma2 * std::exp(-d / p.phi);
    EXPECT_LE(std::abs(matern(d, p) - expected), 1e-12 * expected) << d;
  }
}

TEST(Matern, ThreeHalvesClosedForm) {
  const CovarianceParams p{1.0, 0.3, 1.5};
  for (double d : {0.01, 0.2, 0.9, 2.0}) {
    const double x = d / p.phi;
    EXPECT_LT(rel_err(matern(d, p), (1.0 + x) * std::exp(-x)), 1e-12);
  }
}

TEST(Matern, GeneralFormulaAgainstBoost) {
  for (double nu : {0.3, 1.0, 1.7}) {
    const CovarianceParams p{1.4, 0.25, nu};
    for (double d : {0.001, 0.05, 0.3, 1.2}) {
      const double x = d / p.phi;
      const double expected =
          p.sigma2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * boost::math::cyl_bessel_k(nu, x);
      EXPECT_LT(rel_err(matern(d, p), expected), 1e-12);
    }
  }
}

TEST(Matern, ValueAtZeroAndMonotoneDecay) {
  for (double nu : {0.2, 0.5, 1.0, 1.5, 2.0}) {
    const CovarianceParams p{0.7, 0.1, nu};
    EXPECT_DOUBLE_EQ(matern(0.0, p), 0.7);
    double prev = matern(0.0, p);
    for (double d = 1e-5; d < 5.0; d *= 1.3) {
      const double c = matern(d, p);
      EXPECT_LE(c, prev + 1e-15) << "nu=" << nu << " d=" << d;
      EXPECT_GE(c, 0.0);
      prev = c;
    }
  }
}

TEST(Matern, TabulatedMatchesDirect) {
  for (double nu : {0.05, 0.4, 0.5, 1.0, 1.3, 1.5, 2.0}) {
    const CovarianceParams p{1.0, 0.07, nu};
    const MaternKernel direct(p);
    const MaternKernel table(p, MaternKernel::Evaluation::kTabulated);
    for (double d = 1e-7; d < 60.0; d *= 1.07) {
      const double a = direct(d);
      const double b = table(d);
      if (a < 1e-280) continue;
      EXPECT_LE(std::abs(a - b), 1e-12 * a) << "nu=" << nu << " d=" << d;
    }
  }
}

TEST(Matern, ValidateRejectsOutOfRange) {
  EXPECT_THROW((CovarianceParams{0.0, 1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((CovarianceParams{1.0, -1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((CovarianceParams{1.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((CovarianceParams{1.0, 1.0, 2.5}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((CovarianceParams{1.0, 1.0, 2.0}.validate()));
  EXPECT_THROW(matern(-1.0, CovarianceParams{}), std::domain_error);
}

TEST(CovMatrix, SymmetricPositiveDefinite) {
  const std::vector<Location> pts = testing::random_points(80, 5);
  for (double nu : {0.5, 1.0, 2.0}) {
    const MaternKernel k(CovarianceParams{1.0, 0.1, nu});
    const Eigen::MatrixXd c = cov_matrix(pts, k);
    EXPECT_EQ((c - c.transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::MatrixXd jittered = c;
    jittered.diagonal().array() += 1e-8;
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(jittered).info(), Eigen::Success);
    const Eigen::MatrixXd cross = cov_matrix(pts, pts, k);
    EXPECT_LT((cross - c).cwiseAbs().maxCoeff(), 1e-15);
  }
}

}  // namespace
}  // namespace mixmra
