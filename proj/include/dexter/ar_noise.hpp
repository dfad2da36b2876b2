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
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dexter {

enum class Correlation { kNone, kOneStep, kTwoStep };

std::string_view to_string(Correlation c);
Correlation correlation_from_string(std::string_view s);

// Parameters of Y_t = mu + sum_i phi_i * Y_{t-i} + sigma * eps_t.
//
// With `standardize` set the recursion is rescaled so that the stationary
// marginal standard deviation of Y is exactly 1 before `magnitude_scale` is
// applied. Splicing two standardized processes therefore keeps the noise
// level constant while only the correlation structure changes.
struct ARProcessSpec {
  Correlation correlation = Correlation::kNone;
  std::vector<double> coefficients;  // phi_1..phi_p
  double mean = 0.0;
  double innovation_sigma = 1.0;
  double magnitude_scale = 1.0;
  bool standardize = false;

  std::size_t order() const { return coefficients.size(); }

  static ARProcessSpec white(double sigma = 1.0, double scale = 1.0,
                             bool standardize = false);
  static ARProcessSpec one_step(double phi, double sigma = 1.0,
                                double scale = 1.0, bool standardize = false);
  static ARProcessSpec two_step(double phi, double sigma = 1.0,
                                double scale = 1.0, bool standardize = false);
  // Builds the spec for a correlation mode; phi is ignored for kNone.
  static ARProcessSpec make(Correlation c, double phi, double sigma = 1.0,
                            double scale = 1.0, bool standardize = false);

  friend bool operator==(const ARProcessSpec&, const ARProcessSpec&) = default;
};

// Throws StationarityError / ValidationError.
void validate(const ARProcessSpec& spec);

// Number of discarded warm-up samples: max(50, 10 p).
std::size_t burn_in_length(const ARProcessSpec& spec);

// Stationary standard deviation of the unscaled, unstandardized recursion,
// sigma * sqrt(sum_j psi_j^2) over the MA(infinity) weights.
double stationary_std(const ARProcessSpec& spec);

std::vector<double> generate_series(const ARProcessSpec& spec,
                                    std::size_t length, std::uint64_t seed);

// Steps [0, injection_step) follow `pre`, steps >= injection_step follow
// `post`, whose recursion takes its initial lags from the realized pre
// values. With pre == post the output equals generate_series bit for bit.
std::vector<double> spliced_series(const ARProcessSpec& pre,
                                   const ARProcessSpec& post,
                                   std::size_t injection_step,
                                   std::size_t length, std::uint64_t seed);

struct NoiseMatrix {
  std::vector<std::vector<double>> values;  // [dimension][step]
  ARProcessSpec spec;
  std::uint64_t seed = 0;

  std::size_t rows() const { return values.size(); }
  std::size_t cols() const { return values.empty() ? 0 : values[0].size(); }
  double at(std::size_t row, std::size_t col) const;
};

// Row i is generate_series(spec, max_steps, mix_seed(seed, i)).
NoiseMatrix generate_matrix(const ARProcessSpec& spec,
                            std::size_t num_dimensions, std::size_t max_steps,
                            std::uint64_t seed);

// Row i is spliced_series(pre, post, injection_step, max_steps,
// mix_seed(seed, i)). The stored spec is `post`.
NoiseMatrix spliced_matrix(const ARProcessSpec& pre, const ARProcessSpec& post,
                           std::size_t injection_step,
                           std::size_t num_dimensions, std::size_t max_steps,
                           std::uint64_t seed);

NoiseMatrix zero_matrix(std::size_t num_dimensions, std::size_t max_steps);

void to_json(nlohmann::json& j, const ARProcessSpec& spec);
void from_json(const nlohmann::json& j, ARProcessSpec& spec);
void to_json(nlohmann::json& j, const NoiseMatrix& m);
void from_json(const nlohmann::json& j, NoiseMatrix& m);

}  // namespace dexter
