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

#include <cmath>
#include <random>

#include "dexter/ar_noise.hpp"
#include "dexter/errors.hpp"
#include "dexter/random.hpp"
#include "oracles.hpp"

using namespace dexter;

namespace {

std::vector<double> tail(const std::vector<double>& x, std::size_t from) {
  return {x.begin() + static_cast<std::ptrdiff_t>(from), x.end()};
}
std::vector<double> head(const std::vector<double>& x, std::size_t to) {
  return {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(to)};
}

}  // namespace

TEST(ArNoise, ModeShapesCoefficients) {
  EXPECT_EQ(ARProcessSpec::white().order(), 0u);
  EXPECT_EQ(ARProcessSpec::one_step(0.5).coefficients, std::vector<double>{0.5});
  EXPECT_EQ(ARProcessSpec::two_step(0.5).coefficients,
            (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(ARProcessSpec::make(Correlation::kNone, 0.9).order(), 0u);
}

TEST(ArNoise, RejectsNonStationaryAndBadScales) {
  EXPECT_THROW(validate(ARProcessSpec::one_step(1.0)), StationarityError);
  EXPECT_THROW(validate(ARProcessSpec::two_step(-1.2)), StationarityError);
  EXPECT_THROW(generate_series(ARProcessSpec::one_step(1.01), 10, 1),
               StationarityError);
  EXPECT_THROW(validate(ARProcessSpec::white(0.0)), ValidationError);
  EXPECT_THROW(validate(ARProcessSpec::white(1.0, -1.0)), ValidationError);
  ARProcessSpec wrong = ARProcessSpec::one_step(0.5);
  wrong.coefficients = {0.1, 0.2};
  EXPECT_THROW(validate(wrong), ValidationError);
}

TEST(ArNoise, BurnIn) {
  EXPECT_EQ(burn_in_length(ARProcessSpec::white()), 50u);
  EXPECT_EQ(burn_in_length(ARProcessSpec::two_step(0.3)), 50u);
  ARProcessSpec s;
  s.correlation = Correlation::kOneStep;
  s.coefficients.assign(7, 0.01);
  EXPECT_EQ(burn_in_length(s), 70u);
}

TEST(ArNoise, StationaryStdClosedForm) {
  EXPECT_NEAR(stationary_std(ARProcessSpec::one_step(0.95, 2.0)),
              2.0 / std::sqrt(1.0 - 0.95 * 0.95), 1e-9);
  EXPECT_NEAR(stationary_std(ARProcessSpec::two_step(0.8)),
              1.0 / std::sqrt(1.0 - 0.64), 1e-9);
  EXPECT_DOUBLE_EQ(stationary_std(ARProcessSpec::white(3.0)), 3.0);
}

TEST(ArNoise, WhiteNoiseStatistics) {
  const auto x = generate_series(ARProcessSpec::white(), 100000, 11);
  EXPECT_NEAR(oracle::mean(x), 0.0, 0.02);
  EXPECT_NEAR(oracle::autocorrelation(x, 1), 0.0, 0.02);
}

TEST(ArNoise, OneStepStatistics) {
  const double phi = 0.95;
  const auto x = generate_series(ARProcessSpec::one_step(phi), 100000, 12);
  EXPECT_NEAR(oracle::autocorrelation(x, 1), phi, 0.02);
  const double expected = 1.0 / (1.0 - phi * phi);
  EXPECT_NEAR(oracle::variance(x) / expected, 1.0, 0.05);
}

TEST(ArNoise, TwoStepStatisticsMatchIndependentRecursion) {
  const double phi = 0.95;
  const auto x = generate_series(ARProcessSpec::two_step(phi), 100000, 13);

  // Hand-rolled AR(2) with phi_1 = 0 as the reference.
  std::mt19937_64 rng(99);
  std::normal_distribution<double> eps;
  std::vector<double> y(100000 + 500, 0.0);
  for (std::size_t t = 2; t < y.size(); ++t) y[t] = phi * y[t - 2] + eps(rng);
  y.erase(y.begin(), y.begin() + 500);

  EXPECT_NEAR(oracle::autocorrelation(x, 2), phi, 0.02);
  EXPECT_NEAR(oracle::autocorrelation(x, 1), 0.0, 0.05);
  EXPECT_NEAR(oracle::autocorrelation(x, 2), oracle::autocorrelation(y, 2), 0.03);
  // Partial autocorrelation: lag 1 equals rho_1, lag 2 by Yule-Walker.
  const double r1 = oracle::autocorrelation(x, 1);
  const double r2 = oracle::autocorrelation(x, 2);
  EXPECT_NEAR(r1, 0.0, 0.05);
  EXPECT_NEAR((r2 - r1 * r1) / (1.0 - r1 * r1), phi, 0.05);
}

TEST(ArNoise, StandardizedMarginalIsScale) {
  const auto x = generate_series(ARProcessSpec::one_step(0.95, 3.0, 0.5, true),
                                 100000, 14);
  EXPECT_NEAR(std::sqrt(oracle::variance(x)), 0.5, 0.5 * 0.05);
}

TEST(ArNoise, Deterministic) {
  const auto spec = ARProcessSpec::two_step(0.7);
  EXPECT_EQ(generate_series(spec, 300, 5), generate_series(spec, 300, 5));
  EXPECT_NE(generate_series(spec, 300, 5), generate_series(spec, 300, 6));
}

TEST(ArNoise, MatrixShapeRowsAndDeterminism) {
  const auto spec = ARProcessSpec::one_step(0.9);
  const NoiseMatrix m = generate_matrix(spec, 4, 200, 7);
  ASSERT_EQ(m.rows(), 4u);
  ASSERT_EQ(m.cols(), 200u);
  EXPECT_EQ(m.values, generate_matrix(spec, 4, 200, 7).values);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m.values[i], generate_series(spec, 200, mix_seed(7, i)));
  }
  // Adding rows leaves existing rows untouched.
  EXPECT_EQ(generate_matrix(spec, 6, 200, 7).values[3], m.values[3]);

  const NoiseMatrix big = generate_matrix(ARProcessSpec::white(), 2, 100000, 8);
  EXPECT_NEAR(oracle::pearson(big.values[0], big.values[1]), 0.0, 0.02);
}

TEST(ArNoise, SpliceSwitchesCorrelation) {
  const auto pre = ARProcessSpec::white();
  const auto post = ARProcessSpec::one_step(0.95);
  const std::size_t inj = 50000;
  const auto x = spliced_series(pre, post, inj, 100000, 21);
  EXPECT_NEAR(oracle::autocorrelation(head(x, inj), 1), 0.0, 0.02);
  EXPECT_NEAR(oracle::autocorrelation(tail(x, inj + 500), 1), 0.95, 0.02);

  // Short-episode version of the same picture (t_a = 48).
  double pre_acf = 0.0, post_acf = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto y = spliced_series(pre, post, 48, 200, s);
    pre_acf += oracle::autocorrelation(head(y, 48), 1);
    post_acf += oracle::autocorrelation(tail(y, 48), 1);
  }
  EXPECT_NEAR(pre_acf / 200.0, 0.0, 0.05);
  EXPECT_GT(post_acf / 200.0, 0.7);
}

TEST(ArNoise, SpliceBoundariesAndErrors) {
  const auto pre = ARProcessSpec::white();
  const auto post = ARProcessSpec::one_step(0.95);
  const auto a = spliced_series(pre, post, 99, 100, 3);
  const auto clean = generate_series(pre, 100, 3);
  // Only the last sample follows `post`.
  EXPECT_EQ(head(a, 99), head(clean, 99));
  EXPECT_NE(a[99], clean[99]);

  EXPECT_THROW(spliced_series(pre, post, 0, 100, 3), InvalidSpliceError);
  EXPECT_THROW(spliced_series(pre, post, 100, 100, 3), InvalidSpliceError);
  EXPECT_THROW(spliced_series(pre, ARProcessSpec::one_step(0.95, 2.0), 50, 100, 3),
               InvalidSpliceError);
}

TEST(ArNoise, SpliceWithSameSpecEqualsGenerate) {
  const auto spec = ARProcessSpec::one_step(0.6);
  EXPECT_EQ(spliced_series(spec, spec, 40, 120, 9), generate_series(spec, 120, 9));
  // Distribution-level version of the same statement.
  double a = 0.0, b = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    a += oracle::autocorrelation(spliced_series(spec, spec, 40, 120, s), 1);
    b += oracle::autocorrelation(generate_series(spec, 120, s + 1000), 1);
  }
  EXPECT_NEAR(a / 100.0, b / 100.0, 0.05);
}

// Ensemble std of the 20 steps on either side of the splice, pooled over
// 100 seeds: the level must not jump at injection.
TEST(ArNoise, SpliceKeepsMagnitude) {
  for (auto post : {ARProcessSpec::one_step(0.95, 1.0, 1.0, true),
                    ARProcessSpec::two_step(0.95, 1.0, 1.0, true)}) {
    const auto pre = ARProcessSpec::white(1.0, 1.0, true);
    std::vector<double> before, after;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto x = spliced_series(pre, post, 100, 200, s);
      before.insert(before.end(), x.begin() + 80, x.begin() + 100);
      after.insert(after.end(), x.begin() + 100, x.begin() + 120);
    }
    const double ratio = std::sqrt(oracle::variance(after) / oracle::variance(before));
    EXPECT_LT(ratio, 1.5);
    EXPECT_GT(ratio, 1.0 / 1.5);
  }
}

TEST(ArNoise, JsonRoundTrip) {
  const NoiseMatrix m = spliced_matrix(ARProcessSpec::white(),
                                       ARProcessSpec::two_step(0.5), 5, 2, 12, 4);
  const NoiseMatrix back = nlohmann::json(m).get<NoiseMatrix>();
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(zero_matrix(3, 5).values,
            (std::vector<std::vector<double>>(3, std::vector<double>(5, 0.0))));
}
