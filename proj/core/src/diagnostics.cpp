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

#include "mixmra/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

namespace mixmra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<double> equal_width_edges(double max_dist, int bins) {
  if (!(max_dist > 0.0) || bins < 1) throw std::invalid_argument("variogram needs max_dist > 0 and bins >= 1");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) edges[static_cast<std::size_t>(b)] = max_dist * b / bins;
  return edges;
}

std::vector<VariogramBin> empirical_semivariogram(std::span<const Location> locations,
                                                  const Eigen::VectorXd& values,
                                                  std::span<const double> edges) {
  if (locations.size() < 2) throw std::invalid_argument("variogram needs at least two points");
  if (values.size() != static_cast<Eigen::Index>(locations.size())) {
    throw std::invalid_argument("variogram values differ in length from locations");
  }
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("variogram edges must be strictly increasing");
  }
  const std::size_t nb = edges.size() - 1;
  std::vector<double> dist_sum(nb, 0.0), sq_sum(nb, 0.0);
  std::vector<long> count(nb, 0);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    for (std::size_t k = i + 1; k < locations.size(); ++k) {
      const double d = distance(locations[i], locations[k]);
      if (d < edges.front() || d > edges.back()) continue;
      auto it = std::upper_bound(edges.begin(), edges.end(), d);
      std::size_t b = static_cast<std::size_t>(it - edges.begin());
      b = b == 0 ? 0 : std::min(b - 1, nb - 1);
      const double diff = values(static_cast<Eigen::Index>(i)) - values(static_cast<Eigen::Index>(k));
      dist_sum[b] += d;
      sq_sum[b] += diff * diff;
      ++count[b];
    }
  }
  std::vector<VariogramBin> out(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    out[b].lower = edges[b];
    out[b].upper = edges[b + 1];
    out[b].count = count[b];
    out[b].mean_distance = count[b] ? dist_sum[b] / count[b] : kNaN;
    out[b].gamma = count[b] ? sq_sum[b] / (2.0 * count[b]) : kNaN;
  }
  return out;
}

std::vector<VariogramBin> empirical_semivariogram(std::span<const Location> locations,
                                                  const Eigen::VectorXd& values) {
  if (locations.empty()) throw std::invalid_argument("variogram needs at least two points");
  Rect box{locations[0].x, locations[0].y, locations[0].x, locations[0].y};
  for (const Location& s : locations) {
    box.x0 = std::min(box.x0, s.x);
    box.y0 = std::min(box.y0, s.y);
    box.x1 = std::max(box.x1, s.x);
    box.y1 = std::max(box.y1, s.y);
  }
  const std::vector<double> edges = equal_width_edges(0.5 * box.diameter());
  return empirical_semivariogram(locations, values, edges);
}

double gaussian_log_likelihood(std::span<const Location> locations, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& design, const Eigen::VectorXd& beta,
                               const CovarianceParams& theta, double tau2) {
  Eigen::MatrixXd cov = cov_matrix(locations, MaternKernel(theta));
  cov.diagonal().array() += tau2;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd r = y - design * beta;
  const Eigen::VectorXd u = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + u.squaredNorm());
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                             int max_evaluations, double tolerance) {
  const Eigen::Index d = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), start);
  for (Eigen::Index k = 0; k < d; ++k) pts[static_cast<std::size_t>(k + 1)](k) += step(k);
  std::vector<double> val(pts.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (std::size_t k = 0; k < pts.size(); ++k) val[k] = eval(pts[k]);
  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (evals < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::isfinite(val[worst]) && std::abs(val[worst] - val[best]) <= tolerance * (1.0 + std::abs(val[best]))) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k != worst) centroid += pts[k];
    }
    centroid /= static_cast<double>(d);
    const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
    const double fr = eval(reflected);
    if (fr < val[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        val[worst] = fe;
      } else {
        pts[worst] = reflected;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = reflected;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = contracted;
      val[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      val[k] = eval(pts[k]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best], evals, converged};
}

namespace {

struct Profile {
  double log_lik = -std::numeric_limits<double>::infinity();
  double sigma2 = 0.0;
  Eigen::VectorXd beta;
};

// Profile log-likelihood in (phi, nu, g = tau2 / sigma2) with beta by GLS and
// sigma2 in closed form.
Profile profile(std::span<const Location> locs, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                double phi, double nu, double g) {
  Profile out;
  Eigen::MatrixXd a;
  try {
    a = cov_matrix(locs, MaternKernel({1.0, phi, nu}, MaternKernel::Evaluation::kTabulated));
  } catch (const std::invalid_argument&) {
    return out;
  }
  a.diagonal().array() += g;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return out;
  const Eigen::MatrixXd lx = llt.matrixL().solve(x);
  const Eigen::VectorXd ly = llt.matrixL().solve(y);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  if (x.cols() > 0) beta = (lx.transpose() * lx).ldlt().solve(lx.transpose() * ly);
  const double n = static_cast<double>(y.size());
  const double q = (ly - lx * beta).squaredNorm();
  if (!(q > 0.0)) return out;
  out.sigma2 = q / n;
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.log_lik = -0.5 * (n * std::log(2.0 * std::numbers::pi * out.sigma2) + n + log_det);
  out.beta = std::move(beta);
  return out;
}

}  // namespace

StationaryFit fit_stationary_region(std::span<const Location> locations, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& design, const StationaryFitOptions& opts) {
  const auto n = static_cast<int>(locations.size());
  if (n < 30) throw std::invalid_argument("stationary fit needs at least 30 points");
  if (n > opts.max_points) throw std::invalid_argument("stationary fit exceeds the dense-solver limit");
  if (y.size() != n || design.rows() != n) throw std::invalid_argument("stationary fit inputs differ in length");
  if (opts.fixed_nu && !(*opts.fixed_nu > 0.0 && *opts.fixed_nu <= 2.0)) {
    throw std::invalid_argument("fixed nu must lie in (0, 2]");
  }

  double max_d = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) max_d = std::max(max_d, distance(locations[static_cast<std::size_t>(i)], locations[static_cast<std::size_t>(k)]));
  }
  const double log_phi_lo = std::log(1e-4 * max_d), log_phi_hi = std::log(10.0 * max_d);
  const double log_g_lo = std::log(1e-6), log_g_hi = std::log(1e3);
  const bool estimate_nu = !opts.fixed_nu;
  auto nu_of = [&](const Eigen::VectorXd& u) {
    if (!estimate_nu) return *opts.fixed_nu;
    return 0.05 + 1.95 / (1.0 + std::exp(-u(2)));
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    if (u(0) < log_phi_lo || u(0) > log_phi_hi || u(1) < log_g_lo || u(1) > log_g_hi) {
      return std::numeric_limits<double>::infinity();
    }
    return -profile(locations, y, design, std::exp(u(0)), nu_of(u), std::exp(u(1))).log_lik;
  };

  // Coarse start: the best point of a grid over (log phi, log g).
  Eigen::VectorXd start(estimate_nu ? 3 : 2);
  start.setZero();
  double best = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  for (int a = 0; a < 12; ++a) {
    for (double lg : {std::log(0.01), std::log(0.1), std::log(1.0)}) {
      Eigen::VectorXd u = start;
      u(0) = std::log(2e-3 * max_d) + a * (std::log(2.0 * max_d) - std::log(2e-3 * max_d)) / 11.0;
      u(1) = lg;
      const double v = objective(u);
      ++evaluations;
      if (v < best) {
        best = v;
        start = u;
      }
    }
  }
  Eigen::VectorXd step = Eigen::VectorXd::Constant(start.size(), 0.5);
  NelderMeadResult nm = nelder_mead(objective, start, step, opts.max_evaluations, opts.tolerance);
  // One restart from the optimum guards against a collapsed simplex.
  NelderMeadResult again = nelder_mead(objective, nm.x, step * 0.5, opts.max_evaluations, opts.tolerance);
  evaluations += nm.evaluations + again.evaluations;
  if (again.value <= nm.value) nm.x = again.x, nm.value = again.value;

  StationaryFit fit;
  const double phi = std::exp(nm.x(0)), g = std::exp(nm.x(1)), nu = nu_of(nm.x);
  const Profile p = profile(locations, y, design, phi, nu, g);
  fit.theta = {p.sigma2, phi, nu};
  fit.tau2 = g * p.sigma2;
  fit.beta = p.beta;
  fit.log_likelihood = p.log_lik;
  fit.converged = again.converged && std::isfinite(p.log_lik);
  fit.evaluations = evaluations;

  // Curvature test: halving or doubling phi (other parameters fixed) must
  // cost at least 0.05 log-likelihood units.
  const double h = std::log(2.0);
  double drop = std::numeric_limits<double>::infinity();
  for (double s : {-h, h}) {
    const double lp = profile(locations, y, design, std::exp(nm.x(0) + s), nu, g).log_lik;
    drop = std::min(drop, p.log_lik - lp);
  }
  fit.phi_identified = drop > 0.05;
  return fit;
}

double batch_means_variance(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) throw std::invalid_argument("batch means need at least four values");
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t k = 0; k < size; ++k) means[b] += x[b * size + k];
    means[b] /= static_cast<double>(size);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return ss / static_cast<double>(batches - 1) / static_cast<double>(batches);
}

double geweke(std::span<const double> draws, double frac_a, double frac_b) {
  if (draws.size() < 100) throw std::invalid_argument("Geweke diagnostic needs at least 100 draws");
  if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0)) {
    throw std::invalid_argument("Geweke fractions must be positive and sum to at most 1");
  }
  const std::size_t n = draws.size();
  const auto na = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(n)));
  const std::span<const double> a = draws.first(na);
  const std::span<const double> b = draws.last(nb);
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(na);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(nb);
  const double var = batch_means_variance(a) + batch_means_variance(b);
  if (ma == mb) return 0.0;
  if (!(var > 0.0)) return ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return (ma - mb) / std::sqrt(var);
}

nlohmann::json to_json(const StationaryFit& f) {
  std::vector<double> beta(f.beta.data(), f.beta.data() + f.beta.size());
  return {{"sigma2", f.theta.sigma2}, {"phi", f.theta.phi},   {"nu", f.theta.nu},
          {"tau2", f.tau2},           {"beta", beta},          {"log_likelihood", f.log_likelihood},
          {"converged", f.converged}, {"phi_identified", f.phi_identified},
          {"evaluations", f.evaluations}};
}

}  // namespace mixmra
