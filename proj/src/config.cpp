/*
 * Copyright 2026 The DEXTER-OOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dexter/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dexter/errors.hpp"
#include "dexter/hashing.hpp"
#include "dexter/persistence.hpp"

namespace dexter {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario",
       {"type", "env", "policy", "correlation", "phi", "sigma", "magnitude",
        "standardize", "injection_low", "injection_high", "horizon",
        "dimension_scale", "scale_episodes"}},
      {"detector",
       {"kind", "window", "trees", "subsample", "ensemble_size", "allowance",
        "calibration"}},
      {"evaluation",
       {"train_episodes", "validation_episodes", "test_episodes",
        "clean_test_episodes", "target_fpr", "master_seed", "bench_detectors",
        "bench_correlations", "bench_magnitudes"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const std::string t = trim(text);
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc{} || ptr != end || t.empty()) {
    throw ConfigError(key + ": cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

// Converts the library's own parse errors so the message names the key.
template <class F>
auto named(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

std::uint64_t RunConfig::seed() const {
  if (!master_seed) throw ConfigError("evaluation.master_seed is required");
  return *master_seed;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      throw ConfigError("unknown config section [" + section + "]");
    }
    if (!body.data().empty() && body.empty()) {
      throw ConfigError("top-level key '" + section + "' outside a section");
    }
    for (const auto& kv : body) {
      if (!it->second.contains(kv.first)) {
        throw ConfigError("unknown config key " + section + "." + kv.first);
      }
    }
  }

  RunConfig c;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) {
      return trim(*v);
    }
    return std::nullopt;
  };
  auto size_of = [&](const std::string& key, std::size_t& out) {
    if (auto v = get(key)) out = parse_number<std::size_t>(*v, key);
  };
  auto real_of = [&](const std::string& key, double& out) {
    if (auto v = get(key)) out = parse_number<double>(*v, key);
  };

  if (auto v = get("scenario.type")) {
    c.scenario = named("scenario.type", [&] { return scenario_from_string(*v); });
  }
  if (auto v = get("scenario.env")) {
    c.base_env = named("scenario.env", [&] { return base_env_from_string(*v); });
  }
  if (auto v = get("scenario.policy")) {
    c.policy = named("scenario.policy", [&] { return policy_from_string(*v); });
  }
  if (auto v = get("scenario.correlation")) {
    c.correlation = named("scenario.correlation",
                          [&] { return correlation_from_string(*v); });
  }
  real_of("scenario.phi", c.phi);
  real_of("scenario.sigma", c.sigma);
  real_of("scenario.magnitude", c.magnitude);
  if (auto v = get("scenario.standardize")) {
    c.standardize = parse_bool(*v, "scenario.standardize");
  }
  size_of("scenario.injection_low", c.injection_low);
  size_of("scenario.injection_high", c.injection_high);
  size_of("scenario.horizon", c.horizon);
  if (auto v = get("scenario.dimension_scale"); v && *v != "auto") {
    for (const auto& item : split_list(*v)) {
      c.dimension_scale.push_back(
          parse_number<double>(item, "scenario.dimension_scale"));
    }
  }
  size_of("scenario.scale_episodes", c.scale_episodes);

  if (auto v = get("detector.kind")) {
    c.detector.kind =
        named("detector.kind", [&] { return detector_from_string(*v); });
  }
  size_of("detector.window", c.detector.window);
  size_of("detector.trees", c.detector.forest.trees);
  size_of("detector.subsample", c.detector.forest.subsample);
  size_of("detector.ensemble_size", c.detector.ensemble_size);
  real_of("detector.allowance", c.detector.allowance);
  if (auto v = get("detector.calibration")) {
    if (*v == "unclamped") {
      c.detector.recursion = CalibrationRecursion::kUnclamped;
    } else if (*v == "clamped") {
      c.detector.recursion = CalibrationRecursion::kClamped;
    } else {
      throw ConfigError("detector.calibration: expected clamped|unclamped");
    }
  }

  size_of("evaluation.train_episodes", c.counts.train);
  size_of("evaluation.validation_episodes", c.counts.validation);
  size_of("evaluation.test_episodes", c.counts.test);
  size_of("evaluation.clean_test_episodes", c.counts.clean_test);
  real_of("evaluation.target_fpr", c.detector.target_fpr);
  if (auto v = get("evaluation.master_seed")) {
    c.master_seed = parse_number<std::uint64_t>(*v, "evaluation.master_seed");
  }
  if (auto v = get("evaluation.bench_detectors")) {
    c.bench_detectors.clear();
    for (const auto& item : split_list(*v)) {
      c.bench_detectors.push_back(named("evaluation.bench_detectors",
                                        [&] { return detector_from_string(item); }));
    }
  }
  if (auto v = get("evaluation.bench_correlations")) {
    c.bench_correlations.clear();
    for (const auto& item : split_list(*v)) {
      c.bench_correlations.push_back(named(
          "evaluation.bench_correlations",
          [&] { return correlation_from_string(item); }));
    }
  }
  if (auto v = get("evaluation.bench_magnitudes")) {
    for (const auto& item : split_list(*v)) {
      c.bench_magnitudes.push_back(
          parse_number<double>(item, "evaluation.bench_magnitudes"));
    }
  }
  if (auto v = get("output.dir")) c.output_dir = *v;

  if (c.detector.window < 4) throw ConfigError("detector.window must be >= 4");
  if (c.detector.forest.trees == 0) throw ConfigError("detector.trees must be >= 1");
  if (c.detector.forest.subsample < 2) {
    throw ConfigError("detector.subsample must be >= 2");
  }
  if (c.detector.ensemble_size < 2) {
    throw ConfigError("detector.ensemble_size must be >= 2");
  }
  if (!(c.detector.target_fpr > 0.0 && c.detector.target_fpr < 1.0)) {
    throw ConfigError("evaluation.target_fpr must lie in (0, 1)");
  }
  if (c.counts.validation < 2) {
    throw ConfigError("evaluation.validation_episodes must be >= 2");
  }
  if (c.bench_detectors.empty() || c.bench_correlations.empty()) {
    throw ConfigError("evaluation.bench_* lists must not be empty");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ScenarioConfig scenario_config(const RunConfig& c) {
  return scenario_config(c, c.correlation, c.magnitude);
}

ScenarioConfig scenario_config(const RunConfig& c, Correlation correlation,
                               double magnitude) {
  ScenarioConfig s;
  s.scenario = c.scenario;
  s.base_env = c.base_env;
  s.policy = c.policy;
  s.injection_low = c.injection_low;
  s.injection_high = c.injection_high;
  s.horizon = c.horizon;
  named("scenario.phi", [&] {
    s.noise_pre = ARProcessSpec::white(c.sigma, magnitude, c.standardize);
    s.noise_post = ARProcessSpec::make(correlation, c.phi, c.sigma, magnitude,
                                       c.standardize);
    validate(s.noise_post);
    return 0;
  });
  if (!c.dimension_scale.empty()) {
    s.per_dimension_scale = c.dimension_scale;
  } else if (c.base_env == BaseEnv::kConstant) {
    s.per_dimension_scale.assign(1, 1.0);
  } else {
    // Fixed seed: the scale is part of the scenario, not of the run.
    s.per_dimension_scale = estimate_dimension_scale(
        c.base_env, c.policy, c.horizon, c.scale_episodes, 0x5CA1E);
  }
  validate(s);
  return s;
}

nlohmann::json canonical_json(const RunConfig& c) {
  nlohmann::json bench_detectors = nlohmann::json::array();
  for (auto k : c.bench_detectors) bench_detectors.push_back(to_string(k));
  nlohmann::json bench_correlations = nlohmann::json::array();
  for (auto k : c.bench_correlations) bench_correlations.push_back(to_string(k));
  return nlohmann::json{
      {"scenario",
       {{"type", to_string(c.scenario)},
        {"env", to_string(c.base_env)},
        {"policy", to_string(c.policy)},
        {"correlation", to_string(c.correlation)},
        {"phi", c.phi},
        {"sigma", c.sigma},
        {"magnitude", c.magnitude},
        {"standardize", c.standardize},
        {"injection_low", c.injection_low},
        {"injection_high", c.injection_high},
        {"horizon", c.horizon},
        {"dimension_scale", c.dimension_scale},
        {"scale_episodes", c.scale_episodes}}},
      {"detector", c.detector},
      {"evaluation",
       {{"train_episodes", c.counts.train},
        {"validation_episodes", c.counts.validation},
        {"test_episodes", c.counts.test},
        {"clean_test_episodes", c.counts.clean_test},
        {"master_seed", c.master_seed ? nlohmann::json(*c.master_seed)
                                      : nlohmann::json(nullptr)},
        {"bench_detectors", bench_detectors},
        {"bench_correlations", bench_correlations},
        {"bench_magnitudes", c.bench_magnitudes}}},
  };
}

std::string config_hash(const RunConfig& c) {
  return content_hash(dump(canonical_json(c)));
}

}  // namespace dexter
