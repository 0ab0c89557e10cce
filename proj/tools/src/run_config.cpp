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

#include "run_config.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "mixmra/error.hpp"

namespace mixmra::cli {

void RunConfig::validate() const {
  if (data.empty()) throw ConfigError("'data' (input CSV path) is required");
  if (tree.levels < 0) throw ConfigError("tree.M must be >= 0");
  if (tree.children < 2) throw ConfigError("tree.J must be >= 2");
  if (tree.knots < 1) throw ConfigError("tree.r must be >= 1");
  if (label_level < -1 || label_level > tree.levels) throw ConfigError("label_level must lie in [0, M] or be -1");
  if (knot_truth != "none" && knot_truth != "two-region" && knot_truth != "zero-quadrant") {
    throw ConfigError("knot_truth must be 'none', 'two-region' or 'zero-quadrant'");
  }
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (domain && !(domain->x1 > domain->x0 && domain->y1 > domain->y0)) throw ConfigError("domain must have positive extent");
  chain.validate();
  try {
    hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("hyper: ") + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["data"] = c.data.string();
  j["schema"] = {{"x", c.schema.x},
                 {"y", c.schema.y},
                 {"response", c.schema.response},
                 {"covariates", c.schema.covariates},
                 {"region", c.schema.region},
                 {"train", c.schema.train}};
  if (c.domain) {
    j["domain"] = {{"x0", c.domain->x0}, {"y0", c.domain->y0}, {"x1", c.domain->x1}, {"y1", c.domain->y1}};
  } else {
    j["domain"] = nullptr;
  }
  j["tree"] = {{"M", c.tree.levels},
               {"J", c.tree.children},
               {"r", c.tree.knots},
               {"mode", to_string(c.tree.mode)},
               {"seed", c.tree.seed},
               {"data_knots_at_finest", c.tree.data_knots_at_finest}};
  j["chain"] = to_json(c.chain);
  j["hyper"] = to_json(c.hyper);
  j["label_level"] = c.label_level;
  j["knot_truth"] = c.knot_truth;
  j["predict_include_noise"] = c.predict_include_noise;
  j["chains"] = c.chains;
  return j;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string string_field(const nlohmann::json& v, const std::string& key) {
  require(v.is_string(), "'" + key + "' must be a string");
  return v.get<std::string>();
}

long long int_field(const nlohmann::json& v, const std::string& key) {
  require(v.is_number_integer(), "'" + key + "' must be an integer");
  return v.get<long long>();
}

double number_field(const nlohmann::json& v, const std::string& key) {
  require(v.is_number(), "'" + key + "' must be a number");
  return v.get<double>();
}

bool bool_field(const nlohmann::json& v, const std::string& key) {
  require(v.is_boolean(), "'" + key + "' must be a boolean");
  return v.get<bool>();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), "run configuration must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "data") {
      std::filesystem::path p = string_field(v, key);
      c.data = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    } else if (key == "schema") {
      require(v.is_object(), "'schema' must be an object");
      for (const auto& [sk, sv] : v.items()) {
        const std::string name = "schema." + sk;
        if (sk == "x") c.schema.x = string_field(sv, name);
        else if (sk == "y") c.schema.y = string_field(sv, name);
        else if (sk == "response") c.schema.response = string_field(sv, name);
        else if (sk == "region") c.schema.region = string_field(sv, name);
        else if (sk == "train") c.schema.train = string_field(sv, name);
        else if (sk == "covariates") {
          require(sv.is_array(), "'schema.covariates' must be an array");
          c.schema.covariates.clear();
          for (const auto& e : sv) c.schema.covariates.push_back(string_field(e, name));
        } else {
          throw ConfigError("unknown field '" + name + "'");
        }
      }
    } else if (key == "domain") {
      if (v.is_null()) {
        c.domain.reset();
        continue;
      }
      require(v.is_object(), "'domain' must be an object or null");
      Rect r;
      for (const auto& [dk, dv] : v.items()) {
        const std::string name = "domain." + dk;
        if (dk == "x0") r.x0 = number_field(dv, name);
        else if (dk == "y0") r.y0 = number_field(dv, name);
        else if (dk == "x1") r.x1 = number_field(dv, name);
        else if (dk == "y1") r.y1 = number_field(dv, name);
        else throw ConfigError("unknown field '" + name + "'");
      }
      c.domain = r;
    } else if (key == "tree") {
      require(v.is_object(), "'tree' must be an object");
      for (const auto& [tk, tv] : v.items()) {
        const std::string name = "tree." + tk;
        if (tk == "M") c.tree.levels = static_cast<int>(int_field(tv, name));
        else if (tk == "J") c.tree.children = static_cast<int>(int_field(tv, name));
        else if (tk == "r") c.tree.knots = static_cast<int>(int_field(tv, name));
        else if (tk == "seed") {
          require(int_field(tv, name) >= 0, "'tree.seed' must be non-negative");
          c.tree.seed = tv.get<std::uint64_t>();
        } else if (tk == "data_knots_at_finest") {
          c.tree.data_knots_at_finest = bool_field(tv, name);
        } else if (tk == "mode") {
          try {
            c.tree.mode = partition_mode_from_string(string_field(tv, name));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("tree.mode: ") + e.what());
          }
        } else {
          throw ConfigError("unknown field '" + name + "'");
        }
      }
    } else if (key == "chain") {
      c.chain = chain_config_from_json(v);
    } else if (key == "hyper") {
      try {
        c.hyper = hyper_from_json(v);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("hyper: ") + e.what());
      }
    } else if (key == "label_level") {
      c.label_level = static_cast<int>(int_field(v, key));
    } else if (key == "knot_truth") {
      c.knot_truth = string_field(v, key);
    } else if (key == "predict_include_noise") {
      c.predict_include_noise = bool_field(v, key);
    } else if (key == "chains") {
      c.chains = static_cast<int>(int_field(v, key));
    } else {
      throw ConfigError("unknown field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::filesystem::path output_root() {
  const char* env = std::getenv("MIXMRA_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("mixmra_out");
}

}  // namespace mixmra::cli
