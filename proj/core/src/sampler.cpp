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

#include "mixmra/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"

namespace mixmra {

const char* to_string(MhParam p) {
  switch (p) {
    case MhParam::kRho: return "rho";
    case MhParam::kSigma2: return "sigma2";
    case MhParam::kPhi: return "phi";
    case MhParam::kNu: return "nu";
  }
  return "?";
}

const char* to_string(IndicatorUpdate u) {
  return u == IndicatorUpdate::kCollapsed ? "collapsed" : "conditional";
}

IndicatorUpdate indicator_update_from_string(const std::string& name) {
  if (name == "collapsed") return IndicatorUpdate::kCollapsed;
  if (name == "conditional") return IndicatorUpdate::kConditional;
  throw ConfigError("unknown indicator update '" + name + "' (expected collapsed or conditional)");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t idx(MhParam p) { return static_cast<std::size_t>(p); }

const char* const kParamNames[kNumMhParams] = {"rho", "sigma2", "phi", "nu"};

nlohmann::json widths_json(const ProposalWidths& w) {
  nlohmann::json j;
  for (int k = 0; k < kNumMhParams; ++k) j[kParamNames[k]] = w[static_cast<std::size_t>(k)];
  return j;
}

ProposalWidths widths_from_json(const nlohmann::json& j, ProposalWidths w, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    int k = 0;
    while (k < kNumMhParams && key != kParamNames[k]) ++k;
    if (k == kNumMhParams) throw ConfigError("unknown field '" + where + "." + key + "'");
    if (!value.is_number()) throw ConfigError("'" + where + "." + key + "' must be a number");
    w[static_cast<std::size_t>(k)] = value.get<double>();
  }
  return w;
}

// Draws from N(P^{-1} b, P^{-1}) given the Cholesky factor of P.
Eigen::VectorXd draw_gaussian_canonical(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                        const Eigen::VectorXd& b, Rng& rng) {
  Eigen::VectorXd xi(b.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
  Eigen::VectorXd out = llt.solve(b);
  out.noalias() += llt.matrixU().solve(xi);
  return out;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_iter < 1) throw ConfigError("chain.n_iter must be >= 1");
  if (n_burn < 0 || n_burn >= n_iter) throw ConfigError("chain.n_burn must satisfy 0 <= n_burn < n_iter");
  if (thin < 1) throw ConfigError("chain.thin must be >= 1");
  if (!(initial_shrink > 1.0)) throw ConfigError("chain.initial_L must exceed 1");
  if (shrink_check_interval < 1) throw ConfigError("chain.L_check_interval must be >= 1");
  if (!(shrink_decay > 0.0 && shrink_decay < 1.0)) throw ConfigError("chain.L_decay must lie in (0, 1)");
  if (adapt_interval < 1) throw ConfigError("chain.adapt_interval must be >= 1");
  if (!(adapt_target > 0.0 && adapt_target < 1.0)) throw ConfigError("chain.adapt_target must lie in (0, 1)");
  for (std::size_t k = 0; k < kNumMhParams; ++k) {
    if (initial_widths[k] < 0.0 || !(min_widths[k] > 0.0) || !(max_widths[k] >= min_widths[k])) {
      throw ConfigError(std::string("inconsistent proposal widths for ") + kParamNames[k]);
    }
  }
  if (initial_tau2 && !(*initial_tau2 > 0.0)) throw ConfigError("chain.initial_tau2 must be positive");
  if (!(initial_rho > 0.0 && initial_rho < 1.0)) throw ConfigError("chain.initial_rho must lie in (0, 1)");
  try {
    theta.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("chain.theta: ") + e.what());
  }
}

nlohmann::json to_json(const ChainConfig& c) {
  nlohmann::json j;
  j["n_iter"] = c.n_iter;
  j["n_burn"] = c.n_burn;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["initial_L"] = c.initial_shrink;
  j["tune_L"] = c.tune_shrink;
  j["L_check_interval"] = c.shrink_check_interval;
  j["L_threshold"] = c.shrink_threshold;
  j["L_decay"] = c.shrink_decay;
  j["adapt_interval"] = c.adapt_interval;
  j["adapt_target"] = c.adapt_target;
  j["adapt_rate"] = c.adapt_rate;
  j["initial_widths"] = widths_json(c.initial_widths);
  j["min_widths"] = widths_json(c.min_widths);
  j["max_widths"] = widths_json(c.max_widths);
  j["estimate_theta"] = c.estimate_theta;
  j["theta"] = {{"sigma2", c.theta.sigma2}, {"phi", c.theta.phi}, {"nu", c.theta.nu}};
  j["initial_tau2"] = c.initial_tau2 ? nlohmann::json(*c.initial_tau2) : nlohmann::json(nullptr);
  j["initial_rho"] = c.initial_rho;
  j["indicator_update"] = to_string(c.indicator_update);
  j["jitter"] = {{"start", c.basis.jitter_start}, {"max", c.basis.jitter_max}, {"factor", c.basis.jitter_factor}};
  return j;
}

ChainConfig chain_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("'chain' must be an object");
  ChainConfig c;
  auto number = [&](const std::string& key) {
    if (!j.at(key).is_number()) throw ConfigError("'chain." + key + "' must be a number");
    return j.at(key).get<double>();
  };
  auto integer = [&](const std::string& key) {
    if (!j.at(key).is_number_integer()) throw ConfigError("'chain." + key + "' must be an integer");
    return j.at(key).get<long long>();
  };
  auto boolean = [&](const std::string& key) {
    if (!j.at(key).is_boolean()) throw ConfigError("'chain." + key + "' must be a boolean");
    return j.at(key).get<bool>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "n_iter") c.n_iter = static_cast<int>(integer(key));
    else if (key == "n_burn") c.n_burn = static_cast<int>(integer(key));
    else if (key == "thin") c.thin = static_cast<int>(integer(key));
    else if (key == "seed") {
      if (!value.is_number_integer() || (value.is_number_integer() && !value.is_number_unsigned() && value.get<long long>() < 0)) {
        throw ConfigError("'chain.seed' must be a non-negative integer");
      }
      c.seed = value.get<std::uint64_t>();
    }
    else if (key == "initial_L") c.initial_shrink = number(key);
    else if (key == "tune_L") c.tune_shrink = boolean(key);
    else if (key == "L_check_interval") c.shrink_check_interval = static_cast<int>(integer(key));
    else if (key == "L_threshold") c.shrink_threshold = number(key);
    else if (key == "L_decay") c.shrink_decay = number(key);
    else if (key == "adapt_interval") c.adapt_interval = static_cast<int>(integer(key));
    else if (key == "adapt_target") c.adapt_target = number(key);
    else if (key == "adapt_rate") c.adapt_rate = number(key);
    else if (key == "initial_widths") c.initial_widths = widths_from_json(value, c.initial_widths, "chain.initial_widths");
    else if (key == "min_widths") c.min_widths = widths_from_json(value, c.min_widths, "chain.min_widths");
    else if (key == "max_widths") c.max_widths = widths_from_json(value, c.max_widths, "chain.max_widths");
    else if (key == "estimate_theta") c.estimate_theta = boolean(key);
    else if (key == "theta") {
      if (!value.is_object()) throw ConfigError("'chain.theta' must be an object");
      for (const auto& [tk, tv] : value.items()) {
        if (!tv.is_number()) throw ConfigError("'chain.theta." + tk + "' must be a number");
        if (tk == "sigma2") c.theta.sigma2 = tv.get<double>();
        else if (tk == "phi") c.theta.phi = tv.get<double>();
        else if (tk == "nu") c.theta.nu = tv.get<double>();
        else throw ConfigError("unknown field 'chain.theta." + tk + "'");
      }
    }
    else if (key == "initial_tau2") {
      if (value.is_null()) c.initial_tau2.reset();
      else c.initial_tau2 = number(key);
    }
    else if (key == "initial_rho") c.initial_rho = number(key);
    else if (key == "indicator_update") {
      if (!value.is_string()) throw ConfigError("'chain.indicator_update' must be a string");
      c.indicator_update = indicator_update_from_string(value.get<std::string>());
    }
    else if (key == "jitter") {
      if (!value.is_object()) throw ConfigError("'chain.jitter' must be an object");
      for (const auto& [jk, jv] : value.items()) {
        if (!jv.is_number()) throw ConfigError("'chain.jitter." + jk + "' must be a number");
        if (jk == "start") c.basis.jitter_start = jv.get<double>();
        else if (jk == "max") c.basis.jitter_max = jv.get<double>();
        else if (jk == "factor") c.basis.jitter_factor = jv.get<double>();
        else throw ConfigError("unknown field 'chain.jitter." + jk + "'");
      }
    }
    else throw ConfigError("unknown field 'chain." + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const AdaptationLog& log, bool estimate_theta) {
  nlohmann::json j;
  j["L_trajectory"] = log.shrink_trajectory;
  nlohmann::json checks = nlohmann::json::array();
  for (const ShrinkCheck& c : log.shrink_checks) {
    checks.push_back({{"iteration", c.iteration}, {"window_mean_Z_finest", c.window_mean},
                      {"L_before", c.before}, {"L_after", c.after}});
  }
  j["L_checks"] = std::move(checks);
  nlohmann::json widths = nlohmann::json::array();
  for (const WidthUpdate& w : log.width_updates) {
    widths.push_back({{"iteration", w.iteration}, {"parameter", to_string(w.param)},
                      {"acceptance", w.acceptance}, {"width", w.width}});
  }
  j["width_updates"] = std::move(widths);
  nlohmann::json rates;
  for (int k = 0; k < kNumMhParams; ++k) {
    if (k > 0 && !estimate_theta) continue;
    const AcceptanceCounter& c = log.post_burn[static_cast<std::size_t>(k)];
    rates[kParamNames[k]] = {{"accepted", c.accepted}, {"proposed", c.proposed}, {"rate", c.rate()}};
  }
  j["post_burn_acceptance"] = std::move(rates);
  j["rejected_factorizations"] = log.rejected_factorizations;
  return j;
}

Sampler::Sampler(Dataset data, const PartitionTree& tree, ChainConfig cfg, MixtureHyper hyper)
    : data_((data.validate(), std::move(data))),
      tree_(tree),
      cfg_((cfg.validate(), std::move(cfg))),
      hyper_((hyper.validate(), hyper)),
      rng_(cfg_.seed),
      basis_(BasisSystem::build(tree, data_.locations, cfg_.theta, cfg_.basis)) {
  if (cfg_.theta.nu > hyper_.nu_max) throw ConfigError("initial nu exceeds the nu prior support");
  const auto n = static_cast<Eigen::Index>(data_.size());
  const Eigen::Index p = data_.design.cols();
  flat_beta_ = !data_.intercept_only();
  xtx_ = data_.design.transpose() * data_.design;
  state_.beta = Eigen::VectorXd::Zero(p);
  if (p > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data_.design);
    qr.setThreshold(1e-10);
    const bool full_rank = n >= p && qr.rank() == p;
    if (flat_beta_ && !full_rank) throw ConfigError("design matrix must have full column rank");
    if (full_rank) state_.beta = qr.solve(data_.response);
  }
  state_.eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_.num_weights()));
  state_.z.assign(tree_.size(), 1);
  state_.rho = cfg_.initial_rho;
  state_.theta = cfg_.theta;
  state_.shrink = cfg_.initial_shrink;
  if (cfg_.initial_tau2) {
    state_.tau2 = *cfg_.initial_tau2;
  } else if (n >= 2) {
    const Eigen::VectorXd r = data_.response - data_.design * state_.beta;
    state_.tau2 = std::max(0.5 * r.squaredNorm() / static_cast<double>(n - 1), 1e-3);
  } else {
    state_.tau2 = 1.0;
  }
  const ProposalWidths defaults = {0.1, 0.1 * cfg_.theta.sigma2, 0.1 * cfg_.theta.phi, 0.1};
  for (std::size_t k = 0; k < kNumMhParams; ++k) {
    state_.widths[k] = cfg_.initial_widths[k] > 0.0 ? cfg_.initial_widths[k] : defaults[k];
    state_.widths[k] = std::clamp(state_.widths[k], cfg_.min_widths[k], cfg_.max_widths[k]);
  }
  finest_first_ = tree_.level_offset(tree_.levels());
  finest_count_ = tree_.level_size(tree_.levels());
  refresh();
}

void Sampler::refresh() {
  fitted_ = basis_.apply(state_.eta);
  residual_ = data_.response - data_.design * state_.beta - fitted_;
}

void Sampler::set_response(const Eigen::VectorXd& y) {
  if (y.size() != data_.response.size()) throw std::invalid_argument("response length mismatch");
  data_.response = y;
  refresh();
}

void Sampler::set_state(const ChainState& s) {
  if (!(s.theta == basis_.params())) {
    if (s.theta.phi == basis_.params().phi && s.theta.nu == basis_.params().nu) {
      basis_ = basis_.with_sigma2(s.theta.sigma2);
    } else {
      basis_ = BasisSystem::build(tree_, data_.locations, s.theta, cfg_.basis);
    }
  }
  state_ = s;
  refresh();
}

void Sampler::check_finite(double value, const char* what) const {
  if (std::isfinite(value)) return;
  std::ostringstream os;
  os << "non-finite " << what << " at iteration " << iteration_ << " (tau2=" << state_.tau2
     << ", rho=" << state_.rho << ", sigma2=" << state_.theta.sigma2 << ", phi=" << state_.theta.phi
     << ", nu=" << state_.theta.nu << ", L=" << state_.shrink
     << ", max|eta|=" << (state_.eta.size() ? state_.eta.cwiseAbs().maxCoeff() : 0.0) << ")";
  throw NumericalError(os.str());
}

void Sampler::record(MhParam p, bool accepted) {
  AcceptanceCounter& c = in_burn_in() ? state_.window[idx(p)] : state_.post_burn[idx(p)];
  ++c.proposed;
  if (accepted) ++c.accepted;
}

void Sampler::update_beta() {
  const Eigen::Index p = data_.design.cols();
  if (p == 0) return;
  const Eigen::VectorXd target = data_.response - fitted_;
  Eigen::MatrixXd prec = xtx_ / state_.tau2;
  if (!flat_beta_) prec.diagonal().array() += 1.0 / hyper_.mean_prior_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError("regression posterior precision is singular");
  const Eigen::VectorXd b = data_.design.transpose() * target / state_.tau2;
  state_.beta = draw_gaussian_canonical(llt, b, rng_);
  residual_ = target - data_.design * state_.beta;
}

void Sampler::update_weights_block(int node) {
  const NodeBasis& nb = basis_.node(node);
  const int r = nb.rank();
  if (r == 0) return;
  const double cz = state_.z[static_cast<std::size_t>(node)] ? 1.0 : state_.shrink;
  auto eta = state_.eta.segment(nb.weight_offset, r);
  const Eigen::VectorXd old = eta;

  Eigen::VectorXd rhs = nb.gram * old;
  Eigen::VectorXd local(static_cast<Eigen::Index>(nb.rows.size()));
  for (std::size_t i = 0; i < nb.rows.size(); ++i) local(static_cast<Eigen::Index>(i)) = residual_(nb.rows[i]);
  if (local.size() > 0) rhs.noalias() += nb.basis.transpose() * local;
  rhs /= state_.tau2;

  Eigen::MatrixXd prec = nb.gram / state_.tau2;
  prec.noalias() += cz * nb.prior.precision;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError("weight posterior precision is not positive definite");
  eta = draw_gaussian_canonical(llt, rhs, rng_);

  if (local.size() > 0) apply_block_change(nb, nb.basis * (eta - old));
}

void Sampler::update_weights() {
  for (std::size_t id = 0; id < tree_.size(); ++id) update_weights_block(static_cast<int>(id));
}

int Sampler::forced_indicator(int node) const {
  const Node& n = tree_.node(node);
  if (n.level == 0) return 1;
  if (!state_.z[static_cast<std::size_t>(n.parent)]) return 0;
  for (int c : n.children) {
    // Children only stay active under an active parent.
    if (state_.z[static_cast<std::size_t>(c)]) return 1;
  }
  return -1;
}

double Sampler::children_log_term(int node) const {
  const Node& n = tree_.node(node);
  if (n.children.empty()) return 0.0;
  // All children are inactive here; under Z = 0 they are so with probability 1.
  return static_cast<double>(n.children.size()) *
         std::log1p(-level_inclusion_prob(state_.rho, n.level + 1));
}

namespace {

double bernoulli_logit(double log_odds) {
  return log_odds >= 0.0 ? 1.0 / (1.0 + std::exp(-log_odds))
                         : std::exp(log_odds) / (1.0 + std::exp(log_odds));
}

}  // namespace

void Sampler::update_indicator(int node) {
  auto& z = state_.z[static_cast<std::size_t>(node)];
  const int forced = forced_indicator(node);
  if (forced >= 0) {
    z = static_cast<std::uint8_t>(forced);
    return;
  }
  const Node& n = tree_.node(node);
  const NodeBasis& nb = basis_.node(node);
  const double p = level_inclusion_prob(state_.rho, n.level);
  double log_odds = std::log(p) - std::log1p(-p) + children_log_term(node);
  if (nb.rank() > 0) {
    const Eigen::VectorXd eta = state_.eta.segment(nb.weight_offset, nb.rank());
    log_odds += log_active_to_shrunk_ratio(nb.prior.quadratic(eta), nb.rank(), state_.shrink);
  }
  z = rng_.bernoulli(bernoulli_logit(log_odds)) ? 1 : 0;
}

void Sampler::apply_block_change(const NodeBasis& nb, const Eigen::VectorXd& change) {
  for (std::size_t i = 0; i < nb.rows.size(); ++i) {
    residual_(nb.rows[i]) -= change(static_cast<Eigen::Index>(i));
    fitted_(nb.rows[i]) += change(static_cast<Eigen::Index>(i));
  }
}

void Sampler::update_block_collapsed(int node) {
  const Node& n = tree_.node(node);
  const NodeBasis& nb = basis_.node(node);
  auto& z = state_.z[static_cast<std::size_t>(node)];
  const int forced = forced_indicator(node);
  const int r = nb.rank();
  if (r == 0) {
    if (forced >= 0) {
      z = static_cast<std::uint8_t>(forced);
    } else {
      const double p = level_inclusion_prob(state_.rho, n.level);
      z = rng_.bernoulli(bernoulli_logit(std::log(p) - std::log1p(-p) + children_log_term(node))) ? 1 : 0;
    }
    return;
  }
  auto eta = state_.eta.segment(nb.weight_offset, r);
  const Eigen::VectorXd old = eta;
  Eigen::VectorXd h = nb.gram * old;
  Eigen::VectorXd local(static_cast<Eigen::Index>(nb.rows.size()));
  for (std::size_t i = 0; i < nb.rows.size(); ++i) local(static_cast<Eigen::Index>(i)) = residual_(nb.rows[i]);
  if (local.size() > 0) h.noalias() += nb.basis.transpose() * local;
  h /= state_.tau2;

  // P_c = B'B / tau2 + c K^{-1}; integrating eta out of
  // N(e; B eta, tau2 I) N(eta; 0, K / c) leaves, up to c-free terms,
  // (r/2) log c - (1/2) log det P_c + (1/2) h' P_c^{-1} h.
  auto factor = [&](double c) {
    Eigen::MatrixXd prec = nb.gram / state_.tau2;
    prec.noalias() += c * nb.prior.precision;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("weight posterior precision is not positive definite");
    return llt;
  };
  auto log_marginal = [&](const Eigen::LLT<Eigen::MatrixXd>& llt, double c) {
    const Eigen::VectorXd u = llt.matrixL().solve(h);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return 0.5 * r * std::log(c) - 0.5 * log_det + 0.5 * u.squaredNorm();
  };

  std::optional<Eigen::LLT<Eigen::MatrixXd>> chosen;
  if (forced >= 0) {
    z = static_cast<std::uint8_t>(forced);
    chosen = factor(z ? 1.0 : state_.shrink);
  } else {
    Eigen::LLT<Eigen::MatrixXd> active = factor(1.0);
    Eigen::LLT<Eigen::MatrixXd> shrunk = factor(state_.shrink);
    const double p = level_inclusion_prob(state_.rho, n.level);
    const double log_odds = std::log(p) - std::log1p(-p) + children_log_term(node) +
                            log_marginal(active, 1.0) - log_marginal(shrunk, state_.shrink);
    check_finite(log_odds, "indicator log-odds");
    z = rng_.bernoulli(bernoulli_logit(log_odds)) ? 1 : 0;
    chosen = z ? std::move(active) : std::move(shrunk);
  }
  eta = draw_gaussian_canonical(*chosen, h, rng_);
  if (local.size() > 0) apply_block_change(nb, nb.basis * (eta - old));
}

void Sampler::update_indicators() {
  for (std::size_t id = 0; id < tree_.size(); ++id) update_indicator(static_cast<int>(id));
}

void Sampler::update_nugget() {
  const double n = static_cast<double>(data_.size());
  const double shape = hyper_.tau2_shape + 0.5 * n;
  const double rate = hyper_.tau2_rate + 0.5 * residual_.squaredNorm();
  state_.tau2 = rng_.inverse_gamma(shape, rate);
}

double Sampler::log_rho_target(double rho) const {
  if (!(rho > 0.0 && rho < 1.0)) return kNegInf;
  double lp = (hyper_.rho_alpha - 1.0) * std::log(rho) + (hyper_.rho_beta - 1.0) * std::log1p(-rho);
  for (const Node& n : tree_.nodes()) {
    if (n.parent < 0 || !state_.z[static_cast<std::size_t>(n.parent)]) continue;
    const double p = level_inclusion_prob(rho, n.level);
    lp += state_.z[static_cast<std::size_t>(n.id)] ? std::log(p) : std::log1p(-p);
  }
  return lp;
}

bool Sampler::propose_window(MhParam p, double current, double lo, double hi, double& proposal,
                             double& log_correction) {
  const double half = 0.5 * state_.widths[idx(p)];
  const double a = std::max(lo, current - half);
  const double b = std::min(hi, current + half);
  proposal = rng_.uniform(a, b);
  if (!(proposal > lo && proposal < hi)) return false;
  const double a_rev = std::max(lo, proposal - half);
  const double b_rev = std::min(hi, proposal + half);
  // q(x'|x) = 1 / |window(x)|, so the Hastings factor is |window(x)| / |window(x')|.
  log_correction = std::log(b - a) - std::log(b_rev - a_rev);
  return true;
}

void Sampler::update_rho() {
  double proposal = 0.0;
  double correction = 0.0;
  if (!propose_window(MhParam::kRho, state_.rho, 0.0, 1.0, proposal, correction)) {
    record(MhParam::kRho, false);
    return;
  }
  const double log_alpha = log_rho_target(proposal) - log_rho_target(state_.rho) + correction;
  const bool accept = std::log(rng_.uniform()) < log_alpha;
  if (accept) state_.rho = proposal;
  record(MhParam::kRho, accept);
}

double Sampler::log_theta_target(const BasisSystem& sys) const {
  const double n = static_cast<double>(data_.size());
  const Eigen::VectorXd fitted = sys.apply(state_.eta);
  const double ss = (data_.response - data_.design * state_.beta - fitted).squaredNorm();
  double lp = -0.5 * n * std::log(2.0 * std::numbers::pi * state_.tau2) - 0.5 * ss / state_.tau2;
  for (std::size_t id = 0; id < sys.num_nodes(); ++id) {
    const NodeBasis& nb = sys.node(static_cast<int>(id));
    if (nb.rank() == 0) continue;
    lp += log_prior_weights(state_.eta.segment(nb.weight_offset, nb.rank()), nb.prior,
                            state_.z[id] != 0, state_.shrink);
  }
  return lp;
}

void Sampler::accept_basis(BasisSystem sys) {
  basis_ = std::move(sys);
  refresh();
}

void Sampler::update_theta() {
  double current = log_theta_target(basis_);
  check_finite(current, "log posterior");

  // sigma2: the basis rescales exactly, no rebuild.
  {
    double proposal = 0.0;
    double correction = 0.0;
    const double s2 = state_.theta.sigma2;
    if (propose_window(MhParam::kSigma2, s2, 0.0, std::numeric_limits<double>::infinity(), proposal,
                       correction)) {
      BasisSystem sys = basis_.with_sigma2(proposal);
      const double target = log_theta_target(sys);
      const double prior_ratio = -(hyper_.sigma2_shape + 1.0) * (std::log(proposal) - std::log(s2)) -
                                 hyper_.sigma2_rate * (1.0 / proposal - 1.0 / s2);
      const bool accept = std::log(rng_.uniform()) < target - current + prior_ratio + correction;
      if (accept) {
        state_.theta.sigma2 = proposal;
        accept_basis(std::move(sys));
        current = target;
      }
      record(MhParam::kSigma2, accept);
    } else {
      record(MhParam::kSigma2, false);
    }
  }

  auto rebuild_step = [&](MhParam which, double lo, double hi) {
    double& value = which == MhParam::kPhi ? state_.theta.phi : state_.theta.nu;
    double proposal = 0.0;
    double correction = 0.0;
    if (!propose_window(which, value, lo, hi, proposal, correction)) {
      record(which, false);
      return;
    }
    CovarianceParams theta = state_.theta;
    (which == MhParam::kPhi ? theta.phi : theta.nu) = proposal;
    std::optional<BasisSystem> sys;
    try {
      sys = BasisSystem::build(tree_, data_.locations, theta, cfg_.basis);
    } catch (const NumericalError&) {
      ++log_.rejected_factorizations;
      record(which, false);
      return;
    }
    const double target = log_theta_target(*sys);
    double prior_ratio = 0.0;
    if (which == MhParam::kPhi) {
      prior_ratio = (hyper_.phi_shape - 1.0) * (std::log(proposal) - std::log(value)) -
                    hyper_.phi_rate * (proposal - value);
    }
    const bool accept = std::isfinite(target) &&
                        std::log(rng_.uniform()) < target - current + prior_ratio + correction;
    if (accept) {
      value = proposal;
      accept_basis(std::move(*sys));
      current = target;
    }
    record(which, accept);
  };
  rebuild_step(MhParam::kPhi, 0.0, std::numeric_limits<double>::infinity());
  rebuild_step(MhParam::kNu, 0.0, hyper_.nu_max);
}

void Sampler::adapt() {
  if (!in_burn_in()) return;
  for (int k = 0; k < kNumMhParams; ++k) {
    const auto p = static_cast<MhParam>(k);
    AcceptanceCounter& c = state_.window[static_cast<std::size_t>(k)];
    if (c.proposed == 0) continue;
    const double rate = c.rate();
    double& w = state_.widths[static_cast<std::size_t>(k)];
    w *= std::exp(cfg_.adapt_rate * (rate - cfg_.adapt_target));
    w = std::clamp(w, cfg_.min_widths[static_cast<std::size_t>(k)], cfg_.max_widths[static_cast<std::size_t>(k)]);
    log_.width_updates.push_back({iteration_, p, rate, w});
    c = AcceptanceCounter{};
  }
}

void Sampler::tune_shrink() {
  if (!in_burn_in() || finest_window_iters_ == 0) return;
  const double mean = finest_window_sum_ / finest_window_iters_;
  const double before = state_.shrink;
  if (mean > cfg_.shrink_threshold) state_.shrink *= cfg_.shrink_decay;
  log_.shrink_checks.push_back({iteration_, mean, before, state_.shrink});
  finest_window_sum_ = 0.0;
  finest_window_iters_ = 0;
}

void Sampler::sweep() {
  ++iteration_;
  update_beta();
  if (cfg_.indicator_update == IndicatorUpdate::kCollapsed) {
    for (std::size_t id = 0; id < tree_.size(); ++id) update_block_collapsed(static_cast<int>(id));
  } else {
    update_weights();
    update_indicators();
  }
  update_nugget();
  update_rho();
  if (cfg_.estimate_theta) update_theta();

  if (in_burn_in()) {
    int active = 0;
    for (int k = 0; k < finest_count_; ++k) active += state_.z[static_cast<std::size_t>(finest_first_ + k)];
    finest_window_sum_ += static_cast<double>(active) / finest_count_;
    ++finest_window_iters_;
    if (iteration_ % cfg_.adapt_interval == 0) adapt();
    if (cfg_.tune_shrink && iteration_ % cfg_.shrink_check_interval == 0) tune_shrink();
  }
  log_.shrink_trajectory.push_back(state_.shrink);
}

ChainOutput Sampler::run() {
  const auto start = std::chrono::steady_clock::now();
  ChainOutput out;
  out.estimate_theta = cfg_.estimate_theta;
  out.beta_names = data_.design_names;
  const int draws = cfg_.num_draws();
  const auto p = data_.design.cols();
  const auto w = static_cast<Eigen::Index>(basis_.num_weights());
  out.beta.resize(draws, p);
  out.eta.resize(draws, w);
  out.z.reserve(static_cast<std::size_t>(draws));
  for (Eigen::VectorXd* v : {&out.tau2, &out.rho, &out.sigma2, &out.phi, &out.nu, &out.shrink}) v->resize(draws);
  for (std::size_t id = 0; id < basis_.num_nodes(); ++id) {
    const NodeBasis& nb = basis_.node(static_cast<int>(id));
    out.node_levels.push_back(nb.level);
    for (int h = 0; h < nb.rank(); ++h) out.weight_levels.push_back(nb.level);
  }
  int stored = 0;
  while (iteration_ < cfg_.n_iter) {
    sweep();
    if (iteration_ > cfg_.n_burn && (iteration_ - cfg_.n_burn) % cfg_.thin == 0 && stored < draws) {
      out.beta.row(stored) = state_.beta.transpose();
      out.eta.row(stored) = state_.eta.transpose();
      out.z.push_back(state_.z);
      out.tau2(stored) = state_.tau2;
      out.rho(stored) = state_.rho;
      out.sigma2(stored) = state_.theta.sigma2;
      out.phi(stored) = state_.theta.phi;
      out.nu(stored) = state_.theta.nu;
      out.shrink(stored) = state_.shrink;
      ++stored;
    }
  }
  out.num_draws = stored;
  out.log = log_;
  out.log.post_burn = state_.post_burn;
  for (const JitterEvent& e : basis_.jitter_events()) {
    out.warnings.push_back("jitter escalated to " + std::to_string(e.epsilon) + " at node " +
                           std::to_string(e.node));
  }
  if (log_.rejected_factorizations > 0) {
    out.warnings.push_back(std::to_string(log_.rejected_factorizations) +
                           " theta proposals rejected after factorization failure");
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ChainOutput run_chain(const Dataset& data, const PartitionTree& tree, const ChainConfig& cfg,
                      const MixtureHyper& hyper) {
  Sampler sampler(data, tree, cfg, hyper);
  return sampler.run();
}

}  // namespace mixmra
