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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dexter/ar_noise.hpp"
#include "dexter/random.hpp"
#include "json.hpp"

namespace dexter {

enum class Scenario { kARTS, kARNO, kARNS };
enum class BaseEnv { kCartpole, kAcrobot, kConstant };
enum class PolicyKind { kRandom, kHeuristic };

std::string_view to_string(Scenario s);
std::string_view to_string(BaseEnv e);
std::string_view to_string(PolicyKind p);
Scenario scenario_from_string(std::string_view s);
BaseEnv base_env_from_string(std::string_view s);
PolicyKind policy_from_string(std::string_view s);

// Observation dimension m of a base environment.
std::size_t state_dimension(BaseEnv env);
// Number of discrete actions.
int action_count(BaseEnv env);

// Cartpole: (x, x_dot, theta, theta_dot).
// Acrobot: (cos t1, sin t1, cos t2, sin t2, t1_dot, t2_dot).
// Constant: a single zero.
struct EnvState {
  std::vector<double> vector;
  std::size_t step_index = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  // Failure, goal or horizon reached.
  bool terminated = false;
};

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kForce = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
inline constexpr double kPositionLimit = 2.4;
}  // namespace cartpole

namespace acrobot {
inline constexpr double kDt = 0.2;
inline constexpr double kLinkLength1 = 1.0;
inline constexpr double kLinkMass1 = 1.0;
inline constexpr double kLinkMass2 = 1.0;
inline constexpr double kLinkCom1 = 0.5;
inline constexpr double kLinkCom2 = 0.5;
inline constexpr double kLinkMoi = 1.0;
inline constexpr double kGravity = 9.8;
inline constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
inline constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;
}  // namespace acrobot

// `horizon` is the maximum number of observations per episode; a step that
// produces observation index horizon-1 (or later) is terminal.
StepResult cartpole_step(const EnvState& state, int action,
                         std::size_t horizon);
// action in {0, 1, 2} maps to torque {-1, 0, +1}.
StepResult acrobot_step(const EnvState& state, int action, std::size_t horizon);
StepResult constant_step(const EnvState& state, std::size_t horizon);
StepResult env_step(BaseEnv env, const EnvState& state, int action,
                    std::size_t horizon);
EnvState env_reset(BaseEnv env, Rng& rng);

// Time derivative of the acrobot (t1, t2, t1_dot, t2_dot) under `torque`.
std::vector<double> acrobot_derivatives(std::span<const double> angles,
                                        double torque);

// ARTS observation for step t: noise[0][t].
double arts_step(std::size_t t, const NoiseMatrix& noise);

struct NoisyStepResult {
  StepResult transition;     // true (hidden) dynamics
  std::vector<double> observation;
};

// Noise feeds the observation only: o_{t+1} = s_{t+1} + scale * noise[:, t+1].
NoisyStepResult arno_step(BaseEnv env, const EnvState& state, int action,
                          const NoiseMatrix& noise,
                          std::span<const double> scale, std::size_t horizon);

// Noise feeds the dynamics: the transition runs from s_t + scale * noise[:, t].
StepResult arns_step(BaseEnv env, const EnvState& state, int action,
                     const NoiseMatrix& noise, std::span<const double> scale,
                     std::size_t horizon);

using Policy = std::function<int(std::span<const double> observation, Rng&)>;

Policy builtin_policy(BaseEnv env, PolicyKind kind);

struct ScenarioConfig {
  Scenario scenario = Scenario::kARTS;
  BaseEnv base_env = BaseEnv::kConstant;
  PolicyKind policy = PolicyKind::kRandom;
  ARProcessSpec noise_pre = ARProcessSpec::white(1.0, 1.0, true);
  ARProcessSpec noise_post = ARProcessSpec::one_step(0.95, 1.0, 1.0, true);
  // Inclusive range for t_a; must lie strictly inside (5, horizon - 5).
  std::size_t injection_low = 6;
  std::size_t injection_high = 194;
  std::size_t horizon = 200;
  std::vector<double> per_dimension_scale{1.0};

  std::size_t dimension() const { return state_dimension(base_env); }
};

// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& config);

// ARTS on the constant environment, NoCorrelation -> `post` at t_a.
ScenarioConfig default_arts_config(Correlation post, double phi = 0.95);

enum class EpisodeMode { kClean, kInjected };

struct Episode {
  std::uint64_t seed = 0;            // requested seed
  std::uint64_t effective_seed = 0;  // seed after re-rolls
  Scenario scenario = Scenario::kARTS;
  std::optional<std::size_t> injection_time;
  std::vector<std::vector<double>> observations;
  // Hidden true states (equal to observations for ARTS and ARNS).
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  // labels[i] describes the transition producing observations[i + 1]; it is
  // anomalous exactly when i + 1 >= t_a.
  std::vector<bool> labels;
  double reward_sum = 0.0;
  bool usable = true;
  std::size_t retries = 0;

  std::size_t length() const { return observations.size(); }
};

inline constexpr std::size_t kMaxEpisodeRetries = 10;

// Clean mode follows noise_pre for the whole episode. Injected mode samples
// t_a uniformly from the injection window and splices to noise_post; an
// episode ending before t_a is re-rolled with a derived seed up to
// kMaxEpisodeRetries times, then returned with usable = false.
Episode run_episode(const ScenarioConfig& config, const Policy& policy,
                    std::uint64_t seed, EpisodeMode mode);

// Per-dimension observation std over clean, noise-free rollouts; zero
// spreads map to 1.
std::vector<double> estimate_dimension_scale(BaseEnv env, PolicyKind policy,
                                             std::size_t horizon,
                                             std::size_t episodes,
                                             std::uint64_t seed);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);
void to_json(nlohmann::json& j, const Episode& e);
void from_json(const nlohmann::json& j, Episode& e);

}  // namespace dexter
