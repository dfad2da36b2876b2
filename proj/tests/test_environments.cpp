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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include "dexter/environments.hpp"
#include "dexter/errors.hpp"
#include "dexter/random.hpp"
#include "oracles.hpp"

using namespace dexter;

namespace {

// Textbook cartpole Euler update, transcribed from the classic-control
// equations (Barto, Sutton & Anderson 1983 as packaged by gym).
std::array<double, 4> cartpole_reference(std::array<double, 4> s, int action) {
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, f = 10.0, dt = 0.02;
  const double F = action == 1 ? f : -f;
  const double ct = std::cos(s[2]), st = std::sin(s[2]);
  const double tmp = (F + mp * l * s[3] * s[3] * st) / (mc + mp);
  const double th_acc =
      (g * st - ct * tmp) / (l * (4.0 / 3.0 - mp * ct * ct / (mc + mp)));
  const double x_acc = tmp - mp * l * th_acc * ct / (mc + mp);
  return {s[0] + dt * s[1], s[1] + dt * x_acc, s[2] + dt * s[3],
          s[3] + dt * th_acc};
}

// Acrobot ODE in gym's "book" form, written with cos(a - pi/2).
std::array<double, 4> acrobot_rhs(const std::array<double, 4>& s, double a) {
  const double m1 = 1, m2 = 1, l1 = 1, lc1 = 0.5, lc2 = 0.5, I1 = 1, I2 = 1;
  const double g = 9.8;
  const double t1 = s[0], t2 = s[1], dt1 = s[2], dt2 = s[3];
  const double d1 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(t2)) +
      I1 + I2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + I2;
  const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - M_PI / 2);
  const double phi1 = -m2 * l1 * lc2 * dt2 * dt2 * std::sin(t2) -
                      2 * m2 * l1 * lc2 * dt2 * dt1 * std::sin(t2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(t1 - M_PI / 2) + phi2;
  const double ddt2 =
      (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * std::sin(t2) - phi2) /
      (m2 * lc2 * lc2 + I2 - d2 * d2 / d1);
  const double ddt1 = -(d2 * ddt2 + phi1) / d1;
  return {dt1, dt2, ddt1, ddt2};
}

std::array<double, 4> acrobot_rk4(std::array<double, 4> s, double a) {
  const double h = 0.2;
  auto add = [](std::array<double, 4> x, const std::array<double, 4>& k, double c) {
    for (int i = 0; i < 4; ++i) x[i] += c * k[i];
    return x;
  };
  const auto k1 = acrobot_rhs(s, a);
  const auto k2 = acrobot_rhs(add(s, k1, h / 2), a);
  const auto k3 = acrobot_rhs(add(s, k2, h / 2), a);
  const auto k4 = acrobot_rhs(add(s, k3, h), a);
  for (int i = 0; i < 4; ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return s;
}

EnvState acrobot_state(const std::array<double, 4>& a, std::size_t step = 0) {
  return {{std::cos(a[0]), std::sin(a[0]), std::cos(a[1]), std::sin(a[1]), a[2], a[3]},
          step};
}

ScenarioConfig arno_config(Correlation c, double magnitude) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::kARNO;
  cfg.base_env = BaseEnv::kCartpole;
  cfg.policy = PolicyKind::kHeuristic;
  cfg.per_dimension_scale = {1.0, 1.0, 1.0, 1.0};
  cfg.noise_pre = ARProcessSpec::white(1.0, magnitude, true);
  cfg.noise_post = ARProcessSpec::make(c, 0.95, 1.0, magnitude, true);
  return cfg;
}

}  // namespace

TEST(Cartpole, MatchesReferenceEuler) {
  for (int action : {0, 1}) {
    const EnvState s{{0.0, 0.0, 0.05, 0.0}, 0};
    const StepResult r = cartpole_step(s, action, 200);
    const auto ref = cartpole_reference({0.0, 0.0, 0.05, 0.0}, action);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.next.vector[i], ref[i], 1e-12);
    EXPECT_EQ(r.next.step_index, 1u);
    EXPECT_EQ(r.reward, 1.0);
    EXPECT_FALSE(r.terminated);
  }
  Rng rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int k = 0; k < 200; ++k) {
    std::array<double, 4> a{u(rng), u(rng), u(rng), u(rng)};
    const auto r = cartpole_step({{a[0], a[1], a[2], a[3]}, 0}, k % 2, 200);
    const auto ref = cartpole_reference(a, k % 2);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.next.vector[i], ref[i], 1e-12);
  }
}

TEST(Cartpole, AlternatingForcesStayUpright) {
  EnvState s{{0.0, 0.0, 0.0, 0.0}, 0};
  for (int t = 0; t < 20; ++t) {
    const auto r = cartpole_step(s, t % 2, 200);
    EXPECT_LT(std::abs(r.next.vector[2]), 12.0 * M_PI / 180.0);
    EXPECT_FALSE(r.terminated);
    s = r.next;
  }
}

TEST(Cartpole, TerminationRules) {
  EXPECT_TRUE(cartpole_step({{0, 0, 0, 0}, 199}, 0, 200).terminated);
  EXPECT_FALSE(cartpole_step({{0, 0, 0, 0}, 197}, 0, 200).terminated);
  EXPECT_TRUE(cartpole_step({{2.4, 1.0, 0, 0}, 0}, 1, 200).terminated);
  EXPECT_TRUE(cartpole_step({{0, 0, 0.3, 1.0}, 0}, 1, 200).terminated);
  EXPECT_THROW(cartpole_step({{0, 0, NAN, 0}, 0}, 1, 200), SimulationDivergedError);
  EXPECT_THROW(cartpole_step({{0, 0, 0}, 0}, 1, 200), ConfigError);
}

TEST(Acrobot, HangingRestIsFixedPoint) {
  const EnvState rest = acrobot_state({0, 0, 0, 0});
  const StepResult r = acrobot_step(rest, 1, 200);
  EXPECT_EQ(r.next.vector, rest.vector);
  EXPECT_EQ(r.reward, -1.0);
}

TEST(Acrobot, MatchesIndependentRk4) {
  Rng rng(5);
  std::uniform_real_distribution<double> ang(-1.0, 1.0), vel(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const std::array<double, 4> s{ang(rng), ang(rng), vel(rng), vel(rng)};
    const int action = k % 3;
    const auto ref = acrobot_rk4(s, action - 1.0);
    const auto r = acrobot_step(acrobot_state(s), action, 200);
    EXPECT_NEAR(r.next.vector[0], std::cos(ref[0]), 1e-9);
    EXPECT_NEAR(r.next.vector[1], std::sin(ref[0]), 1e-9);
    EXPECT_NEAR(r.next.vector[2], std::cos(ref[1]), 1e-9);
    EXPECT_NEAR(r.next.vector[3], std::sin(ref[1]), 1e-9);
    EXPECT_NEAR(r.next.vector[4], ref[2], 1e-9);
    EXPECT_NEAR(r.next.vector[5], ref[3], 1e-9);
  }
}

TEST(Acrobot, TrigPairsStayOnCircle) {
  Rng rng(6);
  std::uniform_real_distribution<double> ang(-3.0, 3.0), vel(-10.0, 10.0);
  for (int k = 0; k < 500; ++k) {
    const auto r = acrobot_step(
        acrobot_state({ang(rng), ang(rng), vel(rng), vel(rng)}), k % 3, 200);
    const auto& v = r.next.vector;
    EXPECT_NEAR(v[0] * v[0] + v[1] * v[1], 1.0, 1e-9);
    EXPECT_NEAR(v[2] * v[2] + v[3] * v[3], 1.0, 1e-9);
    EXPECT_LE(std::abs(v[4]), 4 * M_PI);
    EXPECT_LE(std::abs(v[5]), 9 * M_PI);
  }
}

TEST(Acrobot, PositiveTorqueSpinsSecondJoint) {
  EnvState s = acrobot_state({0, 0, 0, 0});
  std::array<double, 4> ref{0, 0, 0, 0};
  for (int t = 0; t < 5; ++t) {
    s = acrobot_step(s, 2, 200).next;
    ref = acrobot_rk4(ref, 1.0);
  }
  EXPECT_GT(s.vector[5], 0.0);
  EXPECT_GT(ref[3], 0.0);
}

TEST(Arts, LooksUpNoise) {
  NoiseMatrix n;
  n.values = {{0.1, 0.2, 0.3}};
  EXPECT_EQ(arts_step(1, n), 0.2);
  n.values.push_back({0, 0, 0});
  EXPECT_THROW(arts_step(1, n), ConfigError);
}

TEST(Arts, EpisodeObservationsCarryTheProcess) {
  ScenarioConfig cfg = default_arts_config(Correlation::kOneStep);
  cfg.noise_pre = ARProcessSpec::one_step(0.95, 1.0, 1.0, true);
  const Policy p = builtin_policy(BaseEnv::kConstant, PolicyKind::kRandom);
  const Episode a = run_episode(cfg, p, 77, EpisodeMode::kClean);
  const Episode b = run_episode(cfg, p, 77, EpisodeMode::kClean);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_EQ(a.length(), 200u);

  double acf = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Episode e = run_episode(cfg, p, s, EpisodeMode::kClean);
    std::vector<double> x;
    for (const auto& o : e.observations) x.push_back(o[0]);
    acf += oracle::autocorrelation(x, 1);
  }
  // Short-sample bias pulls the 200-step estimate slightly below 0.95.
  EXPECT_NEAR(acf / 50.0, 0.95, 0.06);
}

TEST(Arno, ZeroNoiseIsClean) {
  const EnvState s{{0.01, 0.0, 0.02, 0.0}, 3};
  const NoiseMatrix z = zero_matrix(4, 200);
  const std::vector<double> scale{1, 1, 1, 1};
  const auto r = arno_step(BaseEnv::kCartpole, s, 1, z, scale, 200);
  EXPECT_EQ(r.observation, cartpole_step(s, 1, 200).next.vector);
}

TEST(Arno, ObservationMinusStateIsScaledNoise) {
  const NoiseMatrix n = generate_matrix(ARProcessSpec::white(), 4, 200, 1);
  const std::vector<double> scale{0.5, 2.0, 0.1, 1.0};
  const EnvState s{{0.01, 0.0, 0.02, 0.0}, 7};
  const auto r = arno_step(BaseEnv::kCartpole, s, 0, n, scale, 200);
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_EQ(r.observation[d],
              r.transition.next.vector[d] + scale[d] * n.at(d, 8));
  }
  EXPECT_THROW(arno_step(BaseEnv::kCartpole, s, 0, n, std::vector<double>{1.0},
                         200),
               ConfigError);
}

TEST(Arno, HiddenDynamicsUntouched) {
  // Replaying the recorded actions on the clean simulator reproduces the
  // hidden states bit for bit.
  const ScenarioConfig cfg = arno_config(Correlation::kTwoStep, 0.5);
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode e = run_episode(cfg, p, seed, EpisodeMode::kInjected);
    EnvState s{e.states[0], 0};
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      s = cartpole_step(s, e.actions[t], cfg.horizon).next;
      ASSERT_EQ(s.vector, e.states[t + 1]) << "seed " << seed << " t " << t;
    }
  }
}

TEST(Arno, NoiseStdTracksMagnitudeTimesScale) {
  ScenarioConfig cfg = arno_config(Correlation::kOneStep, 0.3);
  cfg.per_dimension_scale =
      estimate_dimension_scale(BaseEnv::kCartpole, PolicyKind::kHeuristic, 200, 50, 4);
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  std::vector<std::vector<double>> diff(4);
  std::uint64_t seed = 0;
  while (diff[0].size() < 10000) {
    const Episode e = run_episode(cfg, p, seed++, EpisodeMode::kClean);
    for (std::size_t t = 0; t < e.length(); ++t) {
      for (std::size_t d = 0; d < 4; ++d) {
        diff[d].push_back(e.observations[t][d] - e.states[t][d]);
      }
    }
  }
  for (std::size_t d = 0; d < 4; ++d) {
    const double expected = 0.3 * cfg.per_dimension_scale[d];
    EXPECT_NEAR(std::sqrt(oracle::variance(diff[d])), expected, 0.05 * expected);
  }
}

TEST(Arns, ZeroNoiseIsBitExact) {
  ScenarioConfig cfg = arno_config(Correlation::kOneStep, 1.0);
  cfg.scenario = Scenario::kARNS;
  cfg.per_dimension_scale = {0.0, 0.0, 0.0, 0.0};
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Episode e = run_episode(cfg, p, seed, EpisodeMode::kClean);
    EnvState s{e.states[0], 0};
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      s = cartpole_step(s, e.actions[t], cfg.horizon).next;
      ASSERT_EQ(s.vector, e.observations[t + 1]);
    }
  }
}

TEST(Arns, CausalAndDestabilizing) {
  const std::vector<double> scale{1, 1, 1, 1};
  // Positive angle noise from t = 10 on.
  NoiseMatrix kick = zero_matrix(4, 200);
  for (std::size_t t = 10; t < 200; ++t) kick.values[2][t] = 0.05;
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);

  double clean_len = 0.0, kicked_len = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r1(seed), r2(seed);
    EnvState a = env_reset(BaseEnv::kCartpole, r1);
    EnvState b = env_reset(BaseEnv::kCartpole, r2);
    std::size_t la = 1, lb = 1;
    bool da = false, db = false;
    for (std::size_t t = 0; t < 199 && !(da && db); ++t) {
      if (!da) {
        const auto s = cartpole_step(a, p(a.vector, r1), 200);
        a = s.next;
        da = s.terminated;
        ++la;
      }
      if (!db) {
        const auto s =
            arns_step(BaseEnv::kCartpole, b, p(b.vector, r2), kick, scale, 200);
        b = s.next;
        db = s.terminated;
        ++lb;
      }
      if (t < 10) {
        ASSERT_EQ(a.vector, b.vector);
      }
    }
    clean_len += static_cast<double>(la);
    kicked_len += static_cast<double>(lb);
  }
  EXPECT_LT(kicked_len, clean_len);
}

TEST(Episode, CleanHasNoAnomalies) {
  const ScenarioConfig cfg = default_arts_config(Correlation::kOneStep);
  const Episode e = run_episode(cfg, builtin_policy(BaseEnv::kConstant, PolicyKind::kRandom),
                                1, EpisodeMode::kClean);
  EXPECT_FALSE(e.injection_time.has_value());
  EXPECT_EQ(e.labels.size(), e.length() - 1);
  for (bool l : e.labels) EXPECT_FALSE(l);
}

TEST(Episode, LabelArithmetic) {
  ScenarioConfig cfg = default_arts_config(Correlation::kOneStep);
  cfg.injection_low = cfg.injection_high = 100;
  const Episode e = run_episode(cfg, builtin_policy(BaseEnv::kConstant, PolicyKind::kRandom),
                                3, EpisodeMode::kInjected);
  ASSERT_EQ(e.length(), 200u);
  ASSERT_EQ(e.injection_time, 100u);
  std::size_t anomalous = 0;
  for (bool l : e.labels) anomalous += l ? 1 : 0;
  EXPECT_EQ(anomalous, 100u);
  EXPECT_EQ(e.labels.size() - anomalous, 99u);
  for (std::size_t i = 0; i < e.labels.size(); ++i) {
    EXPECT_EQ(e.labels[i], i + 1 >= 100);
  }
}

TEST(Episode, BalancedInExpectation) {
  const ScenarioConfig cfg = default_arts_config(Correlation::kTwoStep);
  const Policy p = builtin_policy(BaseEnv::kConstant, PolicyKind::kRandom);
  double anomalous = 0.0, total = 0.0;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const Episode e = run_episode(cfg, p, s, EpisodeMode::kInjected);
    for (bool l : e.labels) anomalous += l ? 1.0 : 0.0;
    total += static_cast<double>(e.labels.size());
  }
  EXPECT_NEAR(anomalous / total, 0.5, 0.03);
}

TEST(Episode, EarlyTerminationIsRerolledOrFlagged) {
  ScenarioConfig cfg = arno_config(Correlation::kOneStep, 0.1);
  cfg.policy = PolicyKind::kRandom;
  cfg.injection_low = cfg.injection_high = 150;
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kRandom);
  // A random cartpole policy almost never survives to step 150.
  const Episode e = run_episode(cfg, p, 5, EpisodeMode::kInjected);
  EXPECT_FALSE(e.usable);
  EXPECT_EQ(e.retries, kMaxEpisodeRetries);

  cfg.policy = PolicyKind::kHeuristic;
  const Policy h = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Episode ok = run_episode(cfg, h, s, EpisodeMode::kInjected);
    if (ok.usable) {
      EXPECT_GE(ok.length() - 1, *ok.injection_time);
    }
  }
}

TEST(Episode, DeterministicAndCapped) {
  const ScenarioConfig cfg = arno_config(Correlation::kOneStep, 0.5);
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  const Episode a = run_episode(cfg, p, 9, EpisodeMode::kInjected);
  const Episode b = run_episode(cfg, p, 9, EpisodeMode::kInjected);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  EXPECT_LE(a.length(), cfg.horizon);
  const Episode back = nlohmann::json(a).get<Episode>();
  EXPECT_EQ(back.observations, a.observations);
  EXPECT_EQ(back.states, a.states);
  EXPECT_EQ(back.labels, a.labels);
  EXPECT_EQ(back.injection_time, a.injection_time);
}

TEST(Policy, RandomIsUniform) {
  for (BaseEnv env : {BaseEnv::kCartpole, BaseEnv::kAcrobot}) {
    const Policy p = builtin_policy(env, PolicyKind::kRandom);
    Rng rng(1);
    std::map<int, int> hist;
    const std::vector<double> obs(state_dimension(env), 0.0);
    for (int i = 0; i < 10000; ++i) ++hist[p(obs, rng)];
    const double expected = 10000.0 / action_count(env);
    ASSERT_EQ(hist.size(), static_cast<std::size_t>(action_count(env)));
    for (auto [a, n] : hist) EXPECT_NEAR(n, expected, 0.05 * expected);
  }
}

TEST(Policy, CartpoleHeuristicBalances) {
  ScenarioConfig cfg = arno_config(Correlation::kOneStep, 1.0);
  cfg.per_dimension_scale = {0, 0, 0, 0};
  const Policy p = builtin_policy(BaseEnv::kCartpole, PolicyKind::kHeuristic);
  double len = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    len += static_cast<double>(run_episode(cfg, p, s, EpisodeMode::kClean).length());
  }
  EXPECT_GE(len / 100.0, 150.0);
}

TEST(Policy, AcrobotHeuristicBeatsRandom) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::kARNO;
  cfg.base_env = BaseEnv::kAcrobot;
  cfg.per_dimension_scale.assign(6, 0.0);
  cfg.horizon = 500;
  cfg.injection_high = 400;
  int heuristic_goals = 0, random_goals = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Episode h = run_episode(cfg, builtin_policy(BaseEnv::kAcrobot, PolicyKind::kHeuristic),
                                  s, EpisodeMode::kClean);
    const Episode r = run_episode(cfg, builtin_policy(BaseEnv::kAcrobot, PolicyKind::kRandom),
                                  s, EpisodeMode::kClean);
    heuristic_goals += h.length() < cfg.horizon ? 1 : 0;
    random_goals += r.length() < cfg.horizon ? 1 : 0;
  }
  EXPECT_GT(heuristic_goals, random_goals);
}

TEST(ScenarioConfig, ValidationNamesFields) {
  ScenarioConfig cfg = default_arts_config(Correlation::kOneStep);
  cfg.injection_low = 5;
  try {
    validate(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("injection_low"), std::string::npos);
  }
  cfg = default_arts_config(Correlation::kOneStep);
  cfg.injection_high = 195;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_arts_config(Correlation::kOneStep);
  cfg.base_env = BaseEnv::kCartpole;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_arts_config(Correlation::kOneStep);
  cfg.noise_post.magnitude_scale = 2.0;
  EXPECT_THROW(validate(cfg), InvalidSpliceError);
  EXPECT_NO_THROW(validate(default_arts_config(Correlation::kTwoStep)));
}
