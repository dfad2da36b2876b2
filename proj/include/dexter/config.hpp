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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dexter/ar_noise.hpp"
#include "dexter/environments.hpp"
#include "dexter/evaluation.hpp"
#include "json.hpp"

namespace dexter {

// One run = one INI file. Sections: [scenario], [detector], [evaluation],
// [output]. Every key is optional except evaluation.master_seed.
struct RunConfig {
  // [scenario]
  Scenario scenario = Scenario::kARTS;
  BaseEnv base_env = BaseEnv::kConstant;
  PolicyKind policy = PolicyKind::kRandom;
  Correlation correlation = Correlation::kOneStep;
  double phi = 0.95;
  double sigma = 1.0;
  double magnitude = 1.0;
  bool standardize = true;
  std::size_t injection_low = 6;
  std::size_t injection_high = 194;
  std::size_t horizon = 200;
  // Empty means "estimate from noise-free rollouts".
  std::vector<double> dimension_scale;
  std::size_t scale_episodes = 50;

  // [detector]
  DetectorSpec detector;

  // [evaluation]
  EpisodeCounts counts;
  std::optional<std::uint64_t> master_seed;
  // Bench matrix axes.
  std::vector<DetectorKind> bench_detectors{
      DetectorKind::kDexter, DetectorKind::kDexterCusum, DetectorKind::kPedm,
      DetectorKind::kPedmCusum, DetectorKind::kMeanShift};
  std::vector<Correlation> bench_correlations{Correlation::kOneStep,
                                              Correlation::kTwoStep};
  std::vector<double> bench_magnitudes;  // empty: just `magnitude`

  // [output]
  std::filesystem::path output_dir = "out";

  std::uint64_t seed() const;  // throws ConfigError when unset
};

// Parses INI text; unknown sections/keys and malformed values raise
// ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Fully resolved ScenarioConfig (dimension scale estimated when absent).
// Throws ConfigError on invalid combinations.
ScenarioConfig scenario_config(const RunConfig& config);
ScenarioConfig scenario_config(const RunConfig& config, Correlation correlation,
                               double magnitude);

// Canonical document for hashing; output_dir is left out so relocating
// results does not change the hash.
nlohmann::json canonical_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);

}  // namespace dexter
