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

// mixmra command-line driver: simulate, fit, predict, diagnose.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "mixmra/error.hpp"
#include "mixmra/io.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace mixmra;
using namespace mixmra::cli;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

std::vector<double> parse_triple(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_double(item, "--fix-theta"));
  if (v.size() != 3) throw ConfigError("--fix-theta expects sigma2,phi,nu");
  return v;
}

fs::path default_out(const std::string& name) { return output_root() / name; }

struct FitFlags {
  std::string config, rerun, data, response, mode, fix_theta, indicator_update, knot_truth, out;
  std::vector<std::string> covariates;
  std::optional<int> m, j, r, n_iter, n_burn, thin, chains, label_level;
  std::optional<std::uint64_t> seed;
  std::optional<double> initial_l;
  bool no_tune_l = false;
};

RunConfig build_fit_config(const FitFlags& f) {
  if (!f.rerun.empty()) {
    if (!f.config.empty()) throw ConfigError("--rerun and --config are exclusive");
    return config_from_metadata(f.rerun);
  }
  nlohmann::json j = nlohmann::json::object();
  fs::path base;
  if (!f.config.empty()) {
    j = read_json(f.config);
    base = fs::path(f.config).parent_path();
  }
  if (!f.data.empty()) j["data"] = fs::absolute(f.data).lexically_normal().string();
  RunConfig cfg;
  if (!j.contains("data")) throw ConfigError("no input data: pass --data or set 'data' in --config");
  {
    // Overrides are applied on the JSON form so validation runs once.
    nlohmann::json& s = j["schema"];
    if (s.is_null()) s = nlohmann::json::object();
    if (!f.response.empty()) s["response"] = f.response;
    if (!f.covariates.empty()) s["covariates"] = f.covariates;
    nlohmann::json& t = j["tree"];
    if (t.is_null()) t = nlohmann::json::object();
    if (f.m) t["M"] = *f.m;
    if (f.j) t["J"] = *f.j;
    if (f.r) t["r"] = *f.r;
    if (!f.mode.empty()) t["mode"] = f.mode;
    nlohmann::json& c = j["chain"];
    if (c.is_null()) c = nlohmann::json::object();
    if (f.n_iter) c["n_iter"] = *f.n_iter;
    if (f.n_burn) c["n_burn"] = *f.n_burn;
    if (f.thin) c["thin"] = *f.thin;
    if (f.seed) c["seed"] = *f.seed;
    if (f.initial_l) c["initial_L"] = *f.initial_l;
    if (f.no_tune_l) c["tune_L"] = false;
    if (!f.indicator_update.empty()) c["indicator_update"] = f.indicator_update;
    if (!f.fix_theta.empty()) {
      const std::vector<double> v = parse_triple(f.fix_theta);
      c["estimate_theta"] = false;
      c["theta"] = {{"sigma2", v[0]}, {"phi", v[1]}, {"nu", v[2]}};
    }
    if (f.chains) j["chains"] = *f.chains;
    if (f.label_level) j["label_level"] = *f.label_level;
    if (!f.knot_truth.empty()) j["knot_truth"] = f.knot_truth;
  }
  cfg = run_config_from_json(j, base);
  cfg.data = fs::absolute(cfg.data).lexically_normal();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixmra: mixture multi-resolution approximation for nonstationary spatial data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MIXMRA_VERSION);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic study datasets");
  std::string study = "sim2", spec_path, sim_out;
  std::optional<std::uint64_t> sim_seed;
  std::optional<int> sim_reps, sim_n;
  sim->add_option("--study", study, "sim1 (weight study) or sim2 (two-region study)");
  sim->add_option("--spec", spec_path, "JSON simulation spec; flags override it");
  sim->add_option("--seed", sim_seed, "Base seed");
  sim->add_option("--replicates", sim_reps, "Number of replicates");
  sim->add_option("--n", sim_n, "Locations per replicate");
  sim->add_option("--out", sim_out, "Output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "Run the sampler on a dataset");
  FitFlags ff;
  fit->add_option("--config", ff.config, "JSON run configuration");
  fit->add_option("--rerun", ff.rerun, "Repeat the run recorded in a metadata.json");
  fit->add_option("--data", ff.data, "Input CSV");
  fit->add_option("--response", ff.response, "Response column");
  fit->add_option("--covariates", ff.covariates, "Covariate columns")->delimiter(',');
  fit->add_option("--M", ff.m, "Resolution levels beyond level 0");
  fit->add_option("--J", ff.j, "Children per node");
  fit->add_option("--r", ff.r, "Knots per node");
  fit->add_option("--mode", ff.mode, "rectangular or voronoi");
  fit->add_option("--n-iter", ff.n_iter, "Iterations");
  fit->add_option("--n-burn", ff.n_burn, "Burn-in iterations");
  fit->add_option("--thin", ff.thin, "Thinning interval");
  fit->add_option("--seed", ff.seed, "Chain seed");
  fit->add_option("--initial-L", ff.initial_l, "Initial shrink factor L");
  fit->add_flag("--no-tune-L", ff.no_tune_l, "Keep L fixed");
  fit->add_option("--fix-theta", ff.fix_theta, "Hold sigma2,phi,nu fixed at these values");
  fit->add_option("--indicator-update", ff.indicator_update, "collapsed or conditional");
  fit->add_option("--chains", ff.chains, "Independent chains");
  fit->add_option("--label-level", ff.label_level, "Level used for region labels");
  fit->add_option("--knot-truth", ff.knot_truth, "none, two-region or zero-quadrant");
  fit->add_option("--out", ff.out, "Output directory");

  // predict
  auto* pred = app.add_subcommand("predict", "Predict at new locations from a finished run");
  PredictRequest pr;
  std::string pred_run, pred_locs, pred_out;
  std::optional<bool> pred_noise;
  std::optional<std::uint64_t> pred_seed;
  pred->add_option("--run", pred_run, "Run directory written by fit")->required();
  pred->add_option("--locations", pred_locs, "CSV with x, y and covariates")->required();
  pred->add_option("--include-noise", pred_noise, "Add nugget noise per draw (true/false)");
  pred->add_option("--seed", pred_seed, "Noise seed");
  pred->add_option("--out", pred_out, "Output CSV");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Diagnostics on data, draws and labels");
  diag->require_subcommand(1);
  auto* vg = diag->add_subcommand("variogram", "Binned empirical semivariogram");
  VariogramRequest vr;
  std::string vr_out;
  vg->add_option("--data", vr.data, "Input CSV")->required();
  vg->add_option("--x", vr.x, "x column");
  vg->add_option("--y", vr.y, "y column");
  vg->add_option("--value", vr.value, "Value column");
  vg->add_option("--group", vr.group, "Column splitting rows into groups");
  vg->add_option("--bins", vr.bins, "Number of distance bins");
  vg->add_option("--max-distance", vr.max_distance, "Largest binned distance");
  vg->add_option("--out", vr_out, "Output CSV");

  auto* gw = diag->add_subcommand("geweke", "Geweke z-scores for stored draws");
  GewekeRequest gr;
  gw->add_option("--draws", gr.draws, "draws.csv")->required();
  gw->add_option("--columns", gr.columns, "Columns to test")->delimiter(',');
  gw->add_option("--first", gr.first, "Leading fraction");
  gw->add_option("--last", gr.last, "Trailing fraction");
  gw->add_option("--out", gr.out, "Output JSON (stdout when absent)");

  auto* cf = diag->add_subcommand("confusion", "Sum knot classification tables");
  ConfusionRequest cr;
  std::string cr_out;
  cf->add_option("--labels", cr.labels, "labels.csv files with a truth column")->required();
  cf->add_option("--level", cr.level, "Restrict to one level");
  cf->add_option("--out", cr_out, "Output CSV");

  auto* rf = diag->add_subcommand("refit", "Stationary Matern refit per group");
  RefitRequest rr;
  std::string rr_out;
  rf->add_option("--data", rr.data, "Input CSV")->required();
  rf->add_option("--x", rr.x, "x column");
  rf->add_option("--y", rr.y, "y column");
  rf->add_option("--value", rr.value, "Value column");
  rf->add_option("--group", rr.group, "Column splitting rows into groups");
  rf->add_option("--fixed-nu", rr.fixed_nu, "Hold the smoothness fixed");
  rf->add_option("--max-distance", rr.max_distance, "Extent of the correlation curves");
  rf->add_option("--curves", rr.curves, "Output CSV of fitted correlation curves");
  rf->add_option("--out", rr_out, "Output CSV of estimates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) {
      SimSpec spec = SimSpec::defaults(study_from_string(study));
      if (!spec_path.empty()) {
        nlohmann::json j = read_json(spec_path);
        if (!j.contains("study")) j["study"] = study;
        spec = sim_spec_from_json(j);
      }
      if (sim_seed) spec.seed = *sim_seed;
      if (sim_reps) spec.replicates = *sim_reps;
      if (sim_n) spec.n = *sim_n;
      const fs::path out = sim_out.empty() ? default_out("simulate") : fs::path(sim_out);
      for (const fs::path& p : run_simulate(spec, out)) std::cout << p.string() << "\n";
    } else if (*fit) {
      const RunConfig cfg = build_fit_config(ff);
      const fs::path out = ff.out.empty() ? default_out("fit") : fs::path(ff.out);
      run_fit(cfg, out, std::cerr);
      std::cout << out.string() << "\n";
    } else if (*pred) {
      pr.run_dir = pred_run;
      pr.locations = pred_locs;
      pr.include_noise = pred_noise;
      pr.seed = pred_seed;
      pr.out = pred_out.empty() ? fs::path(pred_run) / "predictions_new.csv" : fs::path(pred_out);
      run_predict(pr);
      std::cout << pr.out.string() << "\n";
    } else if (*vg) {
      vr.out = vr_out.empty() ? default_out("variogram.csv") : fs::path(vr_out);
      run_variogram(vr);
      std::cout << vr.out.string() << "\n";
    } else if (*gw) {
      const nlohmann::json doc = run_geweke(gr);
      if (gr.out.empty()) std::cout << doc.dump(2) << "\n";
    } else if (*cf) {
      cr.out = cr_out.empty() ? default_out("confusion.csv") : fs::path(cr_out);
      run_confusion(cr);
      std::cout << cr.out.string() << "\n";
    } else if (*rf) {
      rr.out = rr_out.empty() ? default_out("refit.csv") : fs::path(rr_out);
      run_refit(rr);
      std::cout << rr.out.string() << "\n";
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    // ConfigError and argument validation failures alike.
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::out_of_range& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
