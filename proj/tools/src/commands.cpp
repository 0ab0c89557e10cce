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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "mixmra/diagnostics.hpp"
#include "mixmra/error.hpp"
#include "mixmra/inference.hpp"
#include "mixmra/io.hpp"
#include "mixmra/model.hpp"
#include "mixmra/random.hpp"
#include "mixmra/sampler.hpp"

#ifndef MIXMRA_VERSION
#define MIXMRA_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace mixmra::cli {

namespace {

// Stream used for prediction noise, distinct from the chain's own stream.
constexpr std::uint64_t kPredictStream = 0x7072656469637400ULL;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

Rect bounding_box(std::span<const Location> pts) {
  if (pts.empty()) throw ConfigError("dataset has no rows");
  Rect r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Location& s : pts) {
    r.x0 = std::min(r.x0, s.x);
    r.y0 = std::min(r.y0, s.y);
    r.x1 = std::max(r.x1, s.x);
    r.y1 = std::max(r.y1, s.y);
  }
  if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw ConfigError("locations span a degenerate bounding box");
  return r;
}

nlohmann::json rect_json(const Rect& r) {
  return {{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}};
}

std::vector<int> knot_truth(const std::string& kind, const RegionLabeling& labels, const PartitionTree& tree) {
  std::vector<int> truth;
  if (kind == "none") return truth;
  truth.reserve(labels.knots.size());
  for (std::size_t k = 0; k < labels.knots.size(); ++k) {
    if (kind == "two-region") {
      truth.push_back(two_region_label(labels.knots[k]));
    } else {
      const Node& n = tree.node(labels.knot_nodes[k]);
      truth.push_back(n.level >= 1 && in_zero_quadrant(n.bounds) ? kRegionShrunk : kRegionActive);
    }
  }
  return truth;
}

struct LoadedRun {
  Dataset all;
  Dataset train;
  Dataset held;
  Rect domain;
  PartitionTree tree;
};

LoadedRun load_run(const RunConfig& cfg) {
  LoadedRun r;
  r.all = read_dataset(cfg.data, cfg.schema);
  r.domain = cfg.domain ? *cfg.domain : bounding_box(r.all.locations);
  r.train = r.all.training();
  r.held = r.all.held_out();
  if (r.train.size() < 2) throw ConfigError("fewer than two training rows");
  r.tree = PartitionTree::build(r.domain, cfg.tree, r.train.locations);
  return r;
}

nlohmann::json fit_single(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  ensure_dir(out);
  LoadedRun run = load_run(cfg);
  const PartitionTree& tree = run.tree;

  Sampler sampler(run.train, tree, cfg.chain, cfg.hyper);
  ChainOutput chain = sampler.run();
  if (chain.num_draws < 2) throw ConfigError("at least two stored draws are needed for summaries");
  const PosteriorSummary summary = summarize(chain);

  std::vector<std::string> outputs;
  auto written = [&](const std::string& name) {
    outputs.push_back(name);
    return out / name;
  };

  write_draws(written("draws.csv"), chain, tree);

  // Fitted values at the training rows (no noise), for residual diagnostics.
  const std::uint64_t pseed = derive_seed(cfg.chain.seed, kPredictStream);
  const Prediction fitted =
      predict(chain, tree, run.train.locations, run.train.design, false, pseed, cfg.chain.basis);
  write_predictions(written("fitted.csv"), run.train.locations, fitted, &run.train.response);

  nlohmann::json scores = nlohmann::json::object();
  const Score fit_score = score(fitted.mean, run.train.response);
  scores["training"] = {{"n", run.train.size()}, {"mspe", fit_score.mspe}, {"mape", fit_score.mape}};
  if (run.held.size() > 0) {
    const Prediction pred = predict(chain, tree, run.held.locations, run.held.design, cfg.predict_include_noise,
                                    pseed, cfg.chain.basis);
    write_predictions(written("predictions.csv"), run.held.locations, pred, &run.held.response);
    const Score s = score(pred.mean, run.held.response);
    scores["held_out"] = {{"n", run.held.size()}, {"mspe", s.mspe}, {"mape", s.mape}};
  }

  const int level = cfg.label_level < 0 ? tree.levels() : cfg.label_level;
  const RegionLabeling labels = classify_regions(summary, tree, level);
  const std::vector<int> truth = knot_truth(cfg.knot_truth, labels, tree);
  write_labels(written("labels.csv"), labels, summary, truth);

  long heredity_violations = 0;
  for (const Indicators& z : chain.z) heredity_violations += satisfies_heredity(tree, z) ? 0 : 1;

  nlohmann::json summary_json = to_json(summary);
  summary_json["scores"] = scores;
  nlohmann::json acc = nlohmann::json::object();
  for (int p = 0; p < kNumMhParams; ++p) {
    const auto param = static_cast<MhParam>(p);
    if (!chain.estimate_theta && param != MhParam::kRho) continue;
    acc[to_string(param)] = chain.log.post_burn[static_cast<std::size_t>(p)].rate();
  }
  summary_json["acceptance"] = acc;
  if (!truth.empty()) {
    const ConfusionMatrix cm = confusion_matrix(labels, truth);
    summary_json["confusion"] = to_json(cm);
    nlohmann::json cj = to_json(cm);
    cj["level"] = level;
    cj["truth"] = cfg.knot_truth;
    write_json(written("confusion.json"), cj);
  }
  write_json(written("summary.json"), summary_json);
  write_json(written("adaptation.json"), to_json(chain.log, chain.estimate_theta));

  nlohmann::json jitter = nlohmann::json::array();
  for (const JitterEvent& e : sampler.basis().jitter_events()) {
    jitter.push_back({{"node", e.node}, {"epsilon", e.epsilon}});
  }
  outputs.push_back("metadata.json");
  nlohmann::json meta;
  meta["tool"] = "mixmra";
  meta["version"] = MIXMRA_VERSION;
  meta["rng_algorithm"] = kRngAlgorithm;
  meta["config"] = to_json(cfg);
  meta["data_fnv1a64"] = file_hash(cfg.data);
  meta["rows"] = {{"total", run.all.size()}, {"train", run.train.size()}, {"held_out", run.held.size()}};
  meta["domain"] = rect_json(run.domain);
  meta["tree"] = {{"levels", tree.levels()}, {"nodes", tree.size()}, {"total_knots", tree.total_knots()}};
  meta["num_draws"] = chain.num_draws;
  meta["final_L"] = sampler.state().shrink;
  meta["jitter_events"] = jitter;
  meta["warnings"] = chain.warnings;
  meta["heredity_violations"] = heredity_violations;
  meta["outputs"] = outputs;
  meta["status"] = "complete";
  write_json(out / "metadata.json", meta);

  log << "fit: " << chain.num_draws << " draws in " << chain.seconds << " s -> " << out.string() << "\n";
  for (const std::string& w : chain.warnings) log << "warning: " << w << "\n";
  return meta;
}

std::vector<std::size_t> group_rows(const CsvTable& t, const std::string& group, std::vector<std::string>& names) {
  std::vector<std::size_t> ids(t.rows.size(), 0);
  names.clear();
  if (group.empty()) {
    names.push_back("all");
    return ids;
  }
  const std::size_t col = t.column(group);
  std::set<std::string> distinct;
  for (const auto& row : t.rows) distinct.insert(row[col]);
  names.assign(distinct.begin(), distinct.end());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ids[i] = static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), t.rows[i][col]) - names.begin());
  }
  return ids;
}

std::vector<Location> table_locations(const CsvTable& t, const std::string& x, const std::string& y) {
  const std::vector<double> xs = t.numeric(x);
  const std::vector<double> ys = t.numeric(y);
  std::vector<Location> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = {xs[i], ys[i]};
  return out;
}

}  // namespace

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::vector<fs::path> run_simulate(const SimSpec& spec, const fs::path& out) {
  spec.validate();
  ensure_dir(out);
  std::vector<fs::path> files;
  for (int k = 0; k < spec.replicates; ++k) {
    const std::string stem = std::string(spec.study == Study::kMraWeights ? "sim1" : "sim2") + "_rep" +
                             std::to_string(k + 1);
    const fs::path path = out / (stem + ".csv");
    if (spec.study == Study::kMraWeights) {
      const Sim1Result r = simulate_sim1(spec, k);
      write_dataset(path, r.data);
      CsvTable w;
      w.header = {"level", "node", "knot", "knot_x", "knot_y", "eta", "zeroed"};
      Eigen::Index offset = 0;
      for (const Node& n : r.tree.nodes()) {
        for (std::size_t h = 0; h < n.knots.size(); ++h) {
          w.rows.push_back({std::to_string(n.level), std::to_string(n.index + 1), std::to_string(h + 1),
                            format_double(n.knots[h].x), format_double(n.knots[h].y),
                            format_double(r.eta(offset++)), std::to_string(int(r.zeroed[std::size_t(n.id)]))});
        }
      }
      write_csv(out / (stem + "_weights.csv"), w);
    } else {
      write_dataset(path, simulate_sim2(spec, k).data);
    }
    files.push_back(path);
  }
  write_json(out / "spec.json", to_json(spec));
  return files;
}

nlohmann::json run_fit(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  if (cfg.chains == 1) return fit_single(cfg, out, log);
  ensure_dir(out);
  nlohmann::json index;
  index["config"] = to_json(cfg);
  index["chains"] = nlohmann::json::array();
  for (int c = 0; c < cfg.chains; ++c) {
    RunConfig sub = cfg;
    sub.chains = 1;
    sub.chain.seed = derive_seed(cfg.chain.seed, static_cast<std::uint64_t>(c));
    const std::string dir = "chain_" + std::to_string(c + 1);
    fit_single(sub, out / dir, log);
    index["chains"].push_back({{"dir", dir}, {"seed", sub.chain.seed}});
  }
  write_json(out / "chains.json", index);
  return index;
}

RunConfig config_from_metadata(const fs::path& metadata_path) {
  const nlohmann::json meta = read_json(metadata_path);
  if (!meta.is_object() || !meta.contains("config")) {
    throw ConfigError("'" + metadata_path.string() + "' has no 'config' entry");
  }
  RunConfig cfg = run_config_from_json(meta.at("config"));
  if (meta.contains("data_fnv1a64")) {
    const std::string now = file_hash(cfg.data);
    if (now != meta.at("data_fnv1a64").get<std::string>()) {
      throw IoError("data file '" + cfg.data.string() + "' changed since the recorded run");
    }
  }
  return cfg;
}

void run_predict(const PredictRequest& req) {
  const RunConfig cfg = config_from_metadata(req.run_dir / "metadata.json");
  const LoadedRun run = load_run(cfg);
  const ChainOutput chain = read_draws(req.run_dir / "draws.csv", run.tree, run.train.design_names);

  const CsvTable t = read_csv(req.locations);
  const std::vector<Location> locs = table_locations(t, cfg.schema.x, cfg.schema.y);
  Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(locs.size()),
                                                 static_cast<Eigen::Index>(cfg.schema.covariates.size()) + 1);
  for (std::size_t c = 0; c < cfg.schema.covariates.size(); ++c) {
    const std::vector<double> v = t.numeric(cfg.schema.covariates[c]);
    for (std::size_t i = 0; i < v.size(); ++i) design(Eigen::Index(i), Eigen::Index(c) + 1) = v[i];
  }
  for (const Location& s : locs) {
    if (!run.tree.in_domain(s)) {
      throw ConfigError("location (" + format_double(s.x) + ", " + format_double(s.y) + ") lies outside the domain");
    }
  }
  const bool noise = req.include_noise.value_or(cfg.predict_include_noise);
  const std::uint64_t seed = req.seed.value_or(derive_seed(cfg.chain.seed, kPredictStream));
  const Prediction pred = predict(chain, run.tree, locs, design, noise, seed, cfg.chain.basis);
  if (!req.out.parent_path().empty()) ensure_dir(req.out.parent_path());
  if (t.has_column(cfg.schema.response)) {
    const std::vector<double> y = t.numeric(cfg.schema.response);
    const Eigen::VectorXd actual = Eigen::Map<const Eigen::VectorXd>(y.data(), Eigen::Index(y.size()));
    write_predictions(req.out, locs, pred, &actual);
  } else {
    write_predictions(req.out, locs, pred);
  }
}

void run_variogram(const VariogramRequest& req) {
  if (req.bins < 1) throw ConfigError("bins must be >= 1");
  const CsvTable t = read_csv(req.data);
  const std::vector<Location> locs = table_locations(t, req.x, req.y);
  const std::vector<double> vals = t.numeric(req.value);
  const double max_dist = req.max_distance.value_or(0.5 * bounding_box(locs).diameter());
  if (!(max_dist > 0.0)) throw ConfigError("max distance must be positive");
  const std::vector<double> edges = equal_width_edges(max_dist, req.bins);

  std::vector<std::string> names;
  const std::vector<std::size_t> ids = group_rows(t, req.group, names);
  std::vector<VariogramGroup> groups;
  for (std::size_t g = 0; g < names.size(); ++g) {
    std::vector<Location> gl;
    std::vector<double> gv;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != g) continue;
      gl.push_back(locs[i]);
      gv.push_back(vals[i]);
    }
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(gv.data(), Eigen::Index(gv.size()));
    groups.push_back({names[g], empirical_semivariogram(gl, v, edges)});
  }
  if (!req.out.parent_path().empty()) ensure_dir(req.out.parent_path());
  write_variograms(req.out, groups);
}

nlohmann::json run_geweke(const GewekeRequest& req) {
  const CsvTable t = read_csv(req.draws);
  std::vector<std::string> cols = req.columns;
  if (cols.empty()) {
    for (const std::string& h : t.header) {
      if (h.rfind("eta.", 0) != 0 && h.rfind("Z.", 0) != 0) cols.push_back(h);
    }
  }
  nlohmann::json out = nlohmann::json::object();
  for (const std::string& c : cols) {
    const std::vector<double> d = t.numeric(c);
    out[c] = geweke(d, req.first, req.last);
  }
  nlohmann::json doc = {{"first", req.first}, {"last", req.last}, {"draws", t.rows.size()}, {"z", out}};
  if (!req.out.empty()) {
    if (!req.out.parent_path().empty()) ensure_dir(req.out.parent_path());
    write_json(req.out, doc);
  }
  return doc;
}

ConfusionMatrix run_confusion(const ConfusionRequest& req) {
  if (req.labels.empty()) throw ConfigError("at least one labels file is required");
  ConfusionMatrix total;
  for (const fs::path& p : req.labels) {
    const CsvTable t = read_csv(p);
    const std::size_t lc = t.column("level");
    const std::size_t cc = t.column("label");
    const std::size_t tc = t.column("truth");
    for (const auto& row : t.rows) {
      if (req.level && std::stoi(row[lc]) != *req.level) continue;
      const int cls = std::stoi(row[cc]);
      const int tru = std::stoi(row[tc]);
      if (cls < 1 || cls > 2 || tru < 1 || tru > 2) throw IoError("labels must be 1 or 2 in '" + p.string() + "'");
      ++total.counts[std::size_t(cls - 1)][std::size_t(tru - 1)];
    }
  }
  CsvTable out;
  out.header = {"classification", "region_1", "region_2"};
  for (int c = 0; c < 2; ++c) {
    out.rows.push_back({"classified_region_" + std::to_string(c + 1), std::to_string(total.counts[std::size_t(c)][0]),
                        std::to_string(total.counts[std::size_t(c)][1])});
  }
  out.rows.push_back({"percent_correct", format_double(total.percent_correct(1)),
                      format_double(total.percent_correct(2))});
  if (!req.out.parent_path().empty()) ensure_dir(req.out.parent_path());
  write_csv(req.out, out);
  return total;
}

void run_refit(const RefitRequest& req) {
  if (req.curve_points < 2) throw ConfigError("curve_points must be >= 2");
  const CsvTable t = read_csv(req.data);
  const std::vector<Location> locs = table_locations(t, req.x, req.y);
  const std::vector<double> vals = t.numeric(req.value);
  const double max_dist = req.max_distance.value_or(0.5 * bounding_box(locs).diameter());

  std::vector<std::string> names;
  const std::vector<std::size_t> ids = group_rows(t, req.group, names);
  StationaryFitOptions opts;
  opts.fixed_nu = req.fixed_nu;

  CsvTable est, curves;
  est.header = {"group", "n", "sigma2", "phi", "nu", "tau2", "beta", "log_likelihood", "converged", "phi_identified"};
  curves.header = {"group", "distance", "correlation"};
  for (std::size_t g = 0; g < names.size(); ++g) {
    std::vector<Location> gl;
    std::vector<double> gv;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != g) continue;
      gl.push_back(locs[i]);
      gv.push_back(vals[i]);
    }
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(gv.data(), Eigen::Index(gv.size()));
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(y.size(), 1);
    const StationaryFit f = fit_stationary_region(gl, y, x, opts);
    est.rows.push_back({names[g], std::to_string(gl.size()), format_double(f.theta.sigma2), format_double(f.theta.phi),
                        format_double(f.theta.nu), format_double(f.tau2), format_double(f.beta(0)),
                        format_double(f.log_likelihood), f.converged ? "1" : "0", f.phi_identified ? "1" : "0"});
    const MaternKernel k(f.theta);
    for (int i = 0; i < req.curve_points; ++i) {
      const double d = max_dist * i / (req.curve_points - 1);
      curves.rows.push_back({names[g], format_double(d), format_double(k.correlation(d))});
    }
  }
  if (!req.out.parent_path().empty()) ensure_dir(req.out.parent_path());
  write_csv(req.out, est);
  if (!req.curves.empty()) {
    if (!req.curves.parent_path().empty()) ensure_dir(req.curves.parent_path());
    write_csv(req.curves, curves);
  }
}

}  // namespace mixmra::cli
