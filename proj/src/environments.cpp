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

#include "dexter/environments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dexter/errors.hpp"

namespace dexter {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw SimulationDivergedError(std::string("non-finite ") + what);
    }
  }
}

bool horizon_reached(std::size_t step_index, std::size_t horizon) {
  return step_index + 1 >= horizon;
}

double wrap_angle(double x) {
  constexpr double kPi = std::numbers::pi;
  const double diff = 2.0 * kPi;
  while (x > kPi) x -= diff;
  while (x < -kPi) x += diff;
  return x;
}

std::array<double, 4> acrobot_angles(std::span<const double> obs) {
  return {std::atan2(obs[1], obs[0]), std::atan2(obs[3], obs[2]), obs[4],
          obs[5]};
}

std::vector<double> acrobot_observation(const std::array<double, 4>& s) {
  return {std::cos(s[0]), std::sin(s[0]), std::cos(s[1]),
          std::sin(s[1]), s[2],           s[3]};
}

void check_noise_shape(const NoiseMatrix& noise, std::span<const double> scale,
                       std::size_t dim) {
  if (noise.rows() != dim || scale.size() != dim) {
    throw ConfigError("noise matrix / scale dimension does not match state");
  }
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kARTS:
      return "ARTS";
    case Scenario::kARNO:
      return "ARNO";
    case Scenario::kARNS:
      return "ARNS";
  }
  return "ARTS";
}

std::string_view to_string(BaseEnv e) {
  switch (e) {
    case BaseEnv::kCartpole:
      return "cartpole";
    case BaseEnv::kAcrobot:
      return "acrobot";
    case BaseEnv::kConstant:
      return "constant";
  }
  return "constant";
}

std::string_view to_string(PolicyKind p) {
  return p == PolicyKind::kRandom ? "random" : "heuristic";
}

Scenario scenario_from_string(std::string_view s) {
  if (s == "ARTS" || s == "arts") return Scenario::kARTS;
  if (s == "ARNO" || s == "arno") return Scenario::kARNO;
  if (s == "ARNS" || s == "arns") return Scenario::kARNS;
  throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

BaseEnv base_env_from_string(std::string_view s) {
  if (s == "cartpole") return BaseEnv::kCartpole;
  if (s == "acrobot") return BaseEnv::kAcrobot;
  if (s == "constant") return BaseEnv::kConstant;
  throw ConfigError("unknown base environment '" + std::string(s) + "'");
}

PolicyKind policy_from_string(std::string_view s) {
  if (s == "random") return PolicyKind::kRandom;
  if (s == "heuristic") return PolicyKind::kHeuristic;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

std::size_t state_dimension(BaseEnv env) {
  switch (env) {
    case BaseEnv::kCartpole:
      return 4;
    case BaseEnv::kAcrobot:
      return 6;
    case BaseEnv::kConstant:
      return 1;
  }
  return 1;
}

int action_count(BaseEnv env) { return env == BaseEnv::kAcrobot ? 3 : 2; }

StepResult cartpole_step(const EnvState& state, int action,
                         std::size_t horizon) {
  using namespace cartpole;
  if (state.vector.size() != 4) throw ConfigError("cartpole state must be 4-d");
  require_finite(state.vector, "cartpole state");

  const double x = state.vector[0];
  const double x_dot = state.vector[1];
  const double theta = state.vector[2];
  const double theta_dot = state.vector[3];

  constexpr double total_mass = kPoleMass + kCartMass;
  constexpr double polemass_length = kPoleMass * kHalfLength;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_theta = std::cos(theta);
  const double sin_theta = std::sin(theta);

  const double temp =
      (force + polemass_length * theta_dot * theta_dot * sin_theta) /
      total_mass;
  const double theta_acc =
      (kGravity * sin_theta - cos_theta * temp) /
      (kHalfLength *
       (4.0 / 3.0 - kPoleMass * cos_theta * cos_theta / total_mass));
  const double x_acc =
      temp - polemass_length * theta_acc * cos_theta / total_mass;

  StepResult out;
  out.next.step_index = state.step_index + 1;
  out.next.vector = {x + kTau * x_dot, x_dot + kTau * x_acc,
                     theta + kTau * theta_dot, theta_dot + kTau * theta_acc};
  require_finite(out.next.vector, "cartpole state");

  const double nx = out.next.vector[0];
  const double ntheta = out.next.vector[2];
  const bool failed = nx < -kPositionLimit || nx > kPositionLimit ||
                      ntheta < -kAngleLimit || ntheta > kAngleLimit;
  out.reward = 1.0;
  out.terminated = failed || horizon_reached(out.next.step_index, horizon);
  return out;
}

std::vector<double> acrobot_derivatives(std::span<const double> s,
                                        double torque) {
  using namespace acrobot;
  const double m1 = kLinkMass1;
  const double m2 = kLinkMass2;
  const double l1 = kLinkLength1;
  const double lc1 = kLinkCom1;
  const double lc2 = kLinkCom2;
  const double i1 = kLinkMoi;
  const double i2 = kLinkMoi;
  const double g = kGravity;
  const double theta1 = s[0];
  const double theta2 = s[1];
  const double dtheta1 = s[2];
  const double dtheta2 = s[3];

  const double d1 = m1 * lc1 * lc1 +
                    m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(theta2)) +
                    i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + i2;
  // cos(a - pi/2) written as sin(a) so that the hanging rest state is an
  // exact fixed point.
  const double phi2 = m2 * lc2 * g * std::sin(theta1 + theta2);
  const double phi1 =
      -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
      2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
      (m1 * lc1 + m2 * l1) * g * std::sin(theta1) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 -
       m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

StepResult acrobot_step(const EnvState& state, int action,
                        std::size_t horizon) {
  using namespace acrobot;
  if (state.vector.size() != 6) throw ConfigError("acrobot state must be 6-d");
  require_finite(state.vector, "acrobot state");
  const double torque = static_cast<double>(std::clamp(action, 0, 2) - 1);

  const std::array<double, 4> s0 = acrobot_angles(state.vector);
  auto deriv = [torque](const std::array<double, 4>& s) {
    return acrobot_derivatives(s, torque);
  };
  auto axpy = [](const std::array<double, 4>& s, const std::vector<double>& k,
                 double h) {
    std::array<double, 4> r{};
    for (std::size_t i = 0; i < 4; ++i) r[i] = s[i] + h * k[i];
    return r;
  };
  const std::vector<double> k1 = deriv(s0);
  const std::vector<double> k2 = deriv(axpy(s0, k1, kDt / 2));
  const std::vector<double> k3 = deriv(axpy(s0, k2, kDt / 2));
  const std::vector<double> k4 = deriv(axpy(s0, k3, kDt));
  std::array<double, 4> s1{};
  for (std::size_t i = 0; i < 4; ++i) {
    s1[i] = s0[i] + kDt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  require_finite(s1, "acrobot state");
  s1[0] = wrap_angle(s1[0]);
  s1[1] = wrap_angle(s1[1]);
  s1[2] = std::clamp(s1[2], -kMaxVel1, kMaxVel1);
  s1[3] = std::clamp(s1[3], -kMaxVel2, kMaxVel2);

  StepResult out;
  out.next.vector = acrobot_observation(s1);
  out.next.step_index = state.step_index + 1;
  const bool goal = -std::cos(s1[0]) - std::cos(s1[1] + s1[0]) > 1.0;
  out.reward = goal ? 0.0 : -1.0;
  out.terminated = goal || horizon_reached(out.next.step_index, horizon);
  return out;
}

StepResult constant_step(const EnvState& state, std::size_t horizon) {
  StepResult out;
  out.next.vector = state.vector;
  out.next.step_index = state.step_index + 1;
  out.reward = 0.0;
  out.terminated = horizon_reached(out.next.step_index, horizon);
  return out;
}

StepResult env_step(BaseEnv env, const EnvState& state, int action,
                    std::size_t horizon) {
  switch (env) {
    case BaseEnv::kCartpole:
      return cartpole_step(state, action, horizon);
    case BaseEnv::kAcrobot:
      return acrobot_step(state, action, horizon);
    case BaseEnv::kConstant:
      return constant_step(state, horizon);
  }
  return constant_step(state, horizon);
}

EnvState env_reset(BaseEnv env, Rng& rng) {
  EnvState s;
  switch (env) {
    case BaseEnv::kCartpole: {
      std::uniform_real_distribution<double> u(-0.05, 0.05);
      for (int i = 0; i < 4; ++i) s.vector.push_back(u(rng));
      break;
    }
    case BaseEnv::kAcrobot: {
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      std::array<double, 4> a{};
      for (double& v : a) v = u(rng);
      s.vector = acrobot_observation(a);
      break;
    }
    case BaseEnv::kConstant:
      s.vector = {0.0};
      break;
  }
  return s;
}

double arts_step(std::size_t t, const NoiseMatrix& noise) {
  if (noise.rows() != 1) throw ConfigError("ARTS noise must have one row");
  return noise.at(0, t);
}

NoisyStepResult arno_step(BaseEnv env, const EnvState& state, int action,
                          const NoiseMatrix& noise,
                          std::span<const double> scale, std::size_t horizon) {
  check_noise_shape(noise, scale, state.vector.size());
  NoisyStepResult out;
  out.transition = env_step(env, state, action, horizon);
  const std::size_t col = out.transition.next.step_index;
  out.observation = out.transition.next.vector;
  for (std::size_t d = 0; d < out.observation.size(); ++d) {
    out.observation[d] += scale[d] * noise.at(d, col);
  }
  return out;
}

StepResult arns_step(BaseEnv env, const EnvState& state, int action,
                     const NoiseMatrix& noise, std::span<const double> scale,
                     std::size_t horizon) {
  check_noise_shape(noise, scale, state.vector.size());
  EnvState perturbed = state;
  for (std::size_t d = 0; d < perturbed.vector.size(); ++d) {
    perturbed.vector[d] += scale[d] * noise.at(d, state.step_index);
  }
  require_finite(perturbed.vector, "perturbed state");
  return env_step(env, perturbed, action, horizon);
}

Policy builtin_policy(BaseEnv env, PolicyKind kind) {
  const int n_actions = action_count(env);
  if (kind == PolicyKind::kRandom) {
    return [n_actions](std::span<const double>, Rng& rng) {
      std::uniform_int_distribution<int> pick(0, n_actions - 1);
      return pick(rng);
    };
  }
  switch (env) {
    case BaseEnv::kCartpole:
      // Push toward the side the pole is falling to.
      return [](std::span<const double> obs, Rng&) {
        const double u = obs[2] + 0.5 * obs[3] + 0.01 * obs[0] + 0.1 * obs[1];
        return u > 0.0 ? 1 : 0;
      };
    case BaseEnv::kAcrobot:
      return [](std::span<const double> obs, Rng&) {
        return obs[5] >= 0.0 ? 2 : 0;
      };
    case BaseEnv::kConstant:
      break;
  }
  return [](std::span<const double>, Rng&) { return 0; };
}

void validate(const ScenarioConfig& c) {
  if (c.horizon < 12) throw ConfigError("scenario.horizon must be >= 12");
  if (c.scenario == Scenario::kARTS && c.base_env != BaseEnv::kConstant) {
    throw ConfigError("scenario.env: ARTS requires the constant environment");
  }
  if (c.scenario != Scenario::kARTS && c.base_env == BaseEnv::kConstant) {
    throw ConfigError(
        "scenario.env: the constant environment is only valid for ARTS");
  }
  if (c.injection_low <= 5 || c.injection_low >= c.horizon - 5) {
    throw ConfigError("scenario.injection_low must lie in (5, horizon - 5)");
  }
  if (c.injection_high <= 5 || c.injection_high >= c.horizon - 5) {
    throw ConfigError("scenario.injection_high must lie in (5, horizon - 5)");
  }
  if (c.injection_low > c.injection_high) {
    throw ConfigError("scenario.injection_low exceeds scenario.injection_high");
  }
  if (c.per_dimension_scale.size() != c.dimension()) {
    throw ConfigError("scenario.per_dimension_scale has wrong length");
  }
  for (double s : c.per_dimension_scale) {
    if (!std::isfinite(s) || s < 0.0) {
      throw ConfigError("scenario.per_dimension_scale must be finite and >= 0");
    }
  }
  validate(c.noise_pre);
  validate(c.noise_post);
  if (c.noise_pre.innovation_sigma != c.noise_post.innovation_sigma ||
      c.noise_pre.magnitude_scale != c.noise_post.magnitude_scale ||
      c.noise_pre.standardize != c.noise_post.standardize) {
    throw InvalidSpliceError(
        "scenario.noise: pre and post noise must share magnitude settings");
  }
}

ScenarioConfig default_arts_config(Correlation post, double phi) {
  ScenarioConfig c;
  c.noise_post = ARProcessSpec::make(post, phi, 1.0, 1.0, true);
  return c;
}

Episode run_episode(const ScenarioConfig& config, const Policy& policy,
                    std::uint64_t seed, EpisodeMode mode) {
  validate(config);
  const std::size_t m = config.dimension();
  const std::size_t horizon = config.horizon;
  const bool injected = mode == EpisodeMode::kInjected;
  const std::span<const double> scale(config.per_dimension_scale);

  Episode ep;
  for (std::size_t attempt = 0; attempt <= kMaxEpisodeRetries; ++attempt) {
    ep = Episode{};
    ep.seed = seed;
    ep.scenario = config.scenario;
    ep.retries = attempt;
    ep.effective_seed = attempt == 0 ? seed : mix_seed(seed, {0xE9, attempt});
    Rng rng(mix_seed(ep.effective_seed, {1}));

    NoiseMatrix noise;
    if (injected) {
      std::uniform_int_distribution<std::size_t> pick(config.injection_low,
                                                      config.injection_high);
      ep.injection_time = pick(rng);
      noise = spliced_matrix(config.noise_pre, config.noise_post,
                             *ep.injection_time, m, horizon,
                             mix_seed(ep.effective_seed, {2}));
    } else {
      noise = generate_matrix(config.noise_pre, m, horizon,
                              mix_seed(ep.effective_seed, {2}));
    }

    EnvState state = env_reset(config.base_env, rng);
    std::vector<double> obs = state.vector;
    if (config.scenario == Scenario::kARTS) {
      obs = {scale[0] * arts_step(0, noise)};
    } else if (config.scenario == Scenario::kARNO) {
      for (std::size_t d = 0; d < m; ++d) obs[d] += scale[d] * noise.at(d, 0);
    }
    ep.observations.push_back(obs);
    ep.states.push_back(state.vector);

    bool done = false;
    while (!done) {
      const int action = policy(obs, rng);
      StepResult step;
      switch (config.scenario) {
        case Scenario::kARTS:
          step = constant_step(state, horizon);
          obs = {scale[0] * arts_step(step.next.step_index, noise)};
          break;
        case Scenario::kARNO: {
          NoisyStepResult r =
              arno_step(config.base_env, state, action, noise, scale, horizon);
          step = std::move(r.transition);
          obs = std::move(r.observation);
          break;
        }
        case Scenario::kARNS:
          step = arns_step(config.base_env, state, action, noise, scale,
                           horizon);
          obs = step.next.vector;
          break;
      }
      state = step.next;
      ep.actions.push_back(action);
      ep.reward_sum += step.reward;
      ep.observations.push_back(obs);
      ep.states.push_back(state.vector);
      done = step.terminated;
    }

    const std::size_t transitions = ep.observations.size() - 1;
    ep.labels.resize(transitions);
    for (std::size_t i = 0; i < transitions; ++i) {
      ep.labels[i] = injected && i + 1 >= *ep.injection_time;
    }
    if (!injected || ep.observations.size() - 1 >= *ep.injection_time) {
      return ep;
    }
  }
  ep.usable = false;
  return ep;
}

std::vector<double> estimate_dimension_scale(BaseEnv env, PolicyKind kind,
                                             std::size_t horizon,
                                             std::size_t episodes,
                                             std::uint64_t seed) {
  const std::size_t m = state_dimension(env);
  const Policy policy = builtin_policy(env, kind);
  std::vector<double> sum(m, 0.0);
  std::vector<double> sum_sq(m, 0.0);
  std::size_t count = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(mix_seed(seed, {e}));
    EnvState state = env_reset(env, rng);
    bool done = false;
    while (true) {
      for (std::size_t d = 0; d < m; ++d) {
        sum[d] += state.vector[d];
        sum_sq[d] += state.vector[d] * state.vector[d];
      }
      ++count;
      if (done) break;
      StepResult r = env_step(env, state, policy(state.vector, rng), horizon);
      state = std::move(r.next);
      done = r.terminated;
    }
  }
  std::vector<double> scale(m, 1.0);
  for (std::size_t d = 0; d < m; ++d) {
    const double mean = sum[d] / static_cast<double>(count);
    const double var =
        std::max(0.0, sum_sq[d] / static_cast<double>(count) - mean * mean);
    const double sd = std::sqrt(var);
    scale[d] = sd > 1e-12 ? sd : 1.0;
  }
  return scale;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"scenario", to_string(c.scenario)},
                     {"env", to_string(c.base_env)},
                     {"policy", to_string(c.policy)},
                     {"noise_pre", c.noise_pre},
                     {"noise_post", c.noise_post},
                     {"injection_low", c.injection_low},
                     {"injection_high", c.injection_high},
                     {"horizon", c.horizon},
                     {"per_dimension_scale", c.per_dimension_scale}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  c.base_env = base_env_from_string(j.at("env").get<std::string>());
  c.policy = policy_from_string(j.at("policy").get<std::string>());
  c.noise_pre = j.at("noise_pre").get<ARProcessSpec>();
  c.noise_post = j.at("noise_post").get<ARProcessSpec>();
  c.injection_low = j.at("injection_low").get<std::size_t>();
  c.injection_high = j.at("injection_high").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.per_dimension_scale = j.at("per_dimension_scale").get<std::vector<double>>();
}

void to_json(nlohmann::json& j, const Episode& e) {
  std::vector<int> labels(e.labels.begin(), e.labels.end());
  j = nlohmann::json{{"seed", e.seed},
                     {"effective_seed", e.effective_seed},
                     {"scenario", to_string(e.scenario)},
                     {"injection_time", nullptr},
                     {"observations", e.observations},
                     {"actions", e.actions},
                     {"labels", labels},
                     {"reward_sum", e.reward_sum},
                     {"usable", e.usable},
                     {"retries", e.retries}};
  if (e.injection_time) j["injection_time"] = *e.injection_time;
  if (e.states != e.observations) j["states"] = e.states;
}

void from_json(const nlohmann::json& j, Episode& e) {
  e.seed = j.at("seed").get<std::uint64_t>();
  e.effective_seed = j.value("effective_seed", e.seed);
  e.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  e.injection_time.reset();
  if (!j.at("injection_time").is_null()) {
    e.injection_time = j.at("injection_time").get<std::size_t>();
  }
  e.observations = j.at("observations").get<std::vector<std::vector<double>>>();
  e.actions = j.at("actions").get<std::vector<int>>();
  const auto labels = j.at("labels").get<std::vector<int>>();
  e.labels.assign(labels.begin(), labels.end());
  e.reward_sum = j.value("reward_sum", 0.0);
  e.usable = j.value("usable", true);
  e.retries = j.value("retries", std::size_t{0});
  e.states = j.contains("states")
                 ? j.at("states").get<std::vector<std::vector<double>>>()
                 : e.observations;
  if (e.observations.empty() ||
      e.labels.size() + 1 != e.observations.size()) {
    throw ValidationError("episode has inconsistent labels/observations");
  }
}

}  // namespace dexter
