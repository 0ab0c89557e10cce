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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mixmra/basis.hpp"
#include "mixmra/data.hpp"
#include "mixmra/geometry.hpp"
#include "mixmra/model.hpp"
#include "mixmra/random.hpp"

namespace mixmra {

/// Parameters updated by Metropolis-Hastings.
enum class MhParam : int { kRho = 0, kSigma2 = 1, kPhi = 2, kNu = 3 };
inline constexpr int kNumMhParams = 4;
const char* to_string(MhParam p);

/// Widths of the centred uniform proposal windows, indexed by MhParam.
using ProposalWidths = std::array<double, kNumMhParams>;

/// How Z_{m,j} is drawn. kConditional draws Z from p(Z | eta, rest) after
/// the eta sweep. kCollapsed draws (Z, eta) per node as one block, Z from
/// p(Z | rest) with that node's eta integrated out, then eta | Z. Both have
/// the same stationary law; the conditional form cannot leave Z = 1 once a
/// block has more weights than data points backing it.
enum class IndicatorUpdate { kConditional, kCollapsed };
const char* to_string(IndicatorUpdate u);
IndicatorUpdate indicator_update_from_string(const std::string& name);

struct ChainConfig {
  int n_iter = 10000;
  int n_burn = 5000;
  int thin = 1;
  std::uint64_t seed = 1;

  double initial_shrink = 1000.0;  ///< initial L
  bool tune_shrink = true;
  int shrink_check_interval = 1000;
  double shrink_threshold = 0.95;
  double shrink_decay = 0.5;

  int adapt_interval = 100;
  double adapt_target = 0.25;
  double adapt_rate = 1.0;  ///< kappa in w <- w * exp(kappa * (rate - target))
  /// Zero entries start at 0.1 for rho and nu and at 10% of the initial
  /// value for sigma2 and phi.
  ProposalWidths initial_widths = {0.0, 0.0, 0.0, 0.0};
  ProposalWidths min_widths = {1e-4, 1e-6, 1e-6, 1e-4};
  ProposalWidths max_widths = {1.0, 100.0, 100.0, 2.0};

  bool estimate_theta = true;
  /// Initial covariance parameters; held fixed when estimate_theta is false.
  CovarianceParams theta{1.0, 0.1, 1.0};
  std::optional<double> initial_tau2;
  double initial_rho = 0.5;
  IndicatorUpdate indicator_update = IndicatorUpdate::kCollapsed;

  BasisOptions basis;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  int num_draws() const { return (n_iter - n_burn) / thin; }
};

nlohmann::json to_json(const ChainConfig& c);
ChainConfig chain_config_from_json(const nlohmann::json& j);

struct AcceptanceCounter {
  long accepted = 0;
  long proposed = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed; }
};

/// Every sampled quantity plus the adaptive-tuning state.
struct ChainState {
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;  ///< stacked weights, node blocks at NodeBasis::weight_offset
  Indicators z;
  double tau2 = 1.0;
  double rho = 0.5;
  CovarianceParams theta;
  double shrink = 1000.0;
  ProposalWidths widths{};
  std::array<AcceptanceCounter, kNumMhParams> window{};
  std::array<AcceptanceCounter, kNumMhParams> post_burn{};
};

struct ShrinkCheck {
  int iteration = 0;
  double window_mean = 0.0;  ///< mean of Z_{M,j} over nodes and window iterations
  double before = 0.0;
  double after = 0.0;
};

struct WidthUpdate {
  int iteration = 0;
  MhParam param = MhParam::kRho;
  double acceptance = 0.0;
  double width = 0.0;
};

struct AdaptationLog {
  std::vector<double> shrink_trajectory;  ///< L after every iteration
  std::vector<ShrinkCheck> shrink_checks;
  std::vector<WidthUpdate> width_updates;
  std::array<AcceptanceCounter, kNumMhParams> post_burn{};
  long rejected_factorizations = 0;
};

nlohmann::json to_json(const AdaptationLog& log, bool estimate_theta);

/// Thinned post-burn-in draws.
struct ChainOutput {
  int num_draws = 0;
  std::vector<std::string> beta_names;
  Eigen::MatrixXd beta;        ///< draws x p
  Eigen::MatrixXd eta;         ///< draws x num_weights
  std::vector<Indicators> z;   ///< per draw
  Eigen::VectorXd tau2, rho, sigma2, phi, nu, shrink;
  std::vector<int> weight_levels;  ///< level of every stacked weight
  std::vector<int> node_levels;    ///< level of every node
  AdaptationLog log;
  bool estimate_theta = true;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

/// Gibbs / Metropolis-Hastings sampler for the mixture model. One sweep
/// updates beta, every eta block (by level) and every Z (top-down), or the
/// (Z, eta) blocks top-down in collapsed mode, then tau2, rho and, when
/// enabled, sigma2, phi, nu one at a time.
class Sampler {
 public:
  Sampler(Dataset data, const PartitionTree& tree, ChainConfig cfg, MixtureHyper hyper);

  /// One full sweep followed by adaptation bookkeeping.
  void sweep();
  /// Runs all configured iterations from the current state.
  ChainOutput run();

  void update_beta();
  void update_weights_block(int node);
  void update_weights();
  void update_indicator(int node);
  void update_indicators();
  /// Joint draw of (Z, eta) for one node; see IndicatorUpdate::kCollapsed.
  void update_block_collapsed(int node);
  void update_nugget();
  void update_rho();
  void update_theta();
  void adapt();
  void tune_shrink();

  /// Log target of rho: Beta prior plus the indicator prior.
  double log_rho_target(double rho) const;
  /// Log of p(y | beta, eta, tau2, theta) p(eta | Z, theta, L) for `sys`.
  double log_theta_target(const BasisSystem& sys) const;

  /// Replaces the response, keeping all parameters; residuals are refreshed.
  void set_response(const Eigen::VectorXd& y);
  /// Replaces the state (e.g. a draw from the prior); residuals and the
  /// basis are refreshed to match.
  void set_state(const ChainState& s);
  /// Re-synchronizes cached fitted values with the state.
  void refresh();

  const ChainState& state() const { return state_; }
  const BasisSystem& basis() const { return basis_; }
  const PartitionTree& tree() const { return tree_; }
  const Dataset& data() const { return data_; }
  const ChainConfig& config() const { return cfg_; }
  const MixtureHyper& hyper() const { return hyper_; }
  const Eigen::VectorXd& residual() const { return residual_; }
  int iteration() const { return iteration_; }
  bool in_burn_in() const { return iteration_ <= cfg_.n_burn; }
  Rng& rng() { return rng_; }
  const AdaptationLog& log() const { return log_; }

 private:
  bool propose_window(MhParam p, double current, double lo, double hi, double& proposal,
                      double& log_correction);
  void record(MhParam p, bool accepted);
  void check_finite(double value, const char* what) const;
  // Z forced by heredity (-1 when free).
  int forced_indicator(int node) const;
  double children_log_term(int node) const;
  // Applies an eta change for `node` to the cached fitted values.
  void apply_block_change(const NodeBasis& nb, const Eigen::VectorXd& change);
  void accept_basis(BasisSystem sys);

  Dataset data_;
  const PartitionTree& tree_;
  ChainConfig cfg_;
  MixtureHyper hyper_;
  Rng rng_;
  BasisSystem basis_;
  ChainState state_;
  Eigen::VectorXd fitted_;    // B eta
  Eigen::VectorXd residual_;  // y - X beta - B eta
  Eigen::MatrixXd xtx_;
  bool flat_beta_ = false;
  int iteration_ = 0;
  int finest_first_ = 0;
  int finest_count_ = 0;
  double finest_window_sum_ = 0.0;
  int finest_window_iters_ = 0;
  AdaptationLog log_;
};

/// Runs a single chain from the sampler's default initial state.
ChainOutput run_chain(const Dataset& data, const PartitionTree& tree, const ChainConfig& cfg,
                      const MixtureHyper& hyper);

}  // namespace mixmra
