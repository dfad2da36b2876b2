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

#include "dexter/ar_noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dexter/errors.hpp"
#include "dexter/random.hpp"

namespace dexter {
namespace {

// Effective innovation sigma of the recursion in output units (before
// magnitude_scale).
double effective_sigma(const ARProcessSpec& spec) {
  if (!spec.standardize) return spec.innovation_sigma;
  return spec.innovation_sigma / stationary_std(spec);
}

// Appends `count` values of the recursion to `history`, reading lags from
// the tail of `history` (missing lags count as zero).
void extend_recursion(const ARProcessSpec& spec, std::size_t count, Rng& rng,
                      std::vector<double>& history) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = effective_sigma(spec);
  const std::size_t p = spec.order();
  for (std::size_t k = 0; k < count; ++k) {
    double y = spec.mean;
    const std::size_t n = history.size();
    for (std::size_t i = 1; i <= p && i <= n; ++i) {
      y += spec.coefficients[i - 1] * history[n - i];
    }
    y += sigma * normal(rng);
    history.push_back(y);
  }
}

}  // namespace

std::string_view to_string(Correlation c) {
  switch (c) {
    case Correlation::kNone:
      return "none";
    case Correlation::kOneStep:
      return "one_step";
    case Correlation::kTwoStep:
      return "two_step";
  }
  return "none";
}

Correlation correlation_from_string(std::string_view s) {
  if (s == "none" || s == "no_correlation") return Correlation::kNone;
  if (s == "one_step" || s == "1-step") return Correlation::kOneStep;
  if (s == "two_step" || s == "2-step") return Correlation::kTwoStep;
  throw ConfigError("unknown correlation mode '" + std::string(s) + "'");
}

ARProcessSpec ARProcessSpec::white(double sigma, double scale,
                                   bool standardize) {
  return make(Correlation::kNone, 0.0, sigma, scale, standardize);
}

ARProcessSpec ARProcessSpec::one_step(double phi, double sigma, double scale,
                                      bool standardize) {
  return make(Correlation::kOneStep, phi, sigma, scale, standardize);
}

ARProcessSpec ARProcessSpec::two_step(double phi, double sigma, double scale,
                                      bool standardize) {
  return make(Correlation::kTwoStep, phi, sigma, scale, standardize);
}

ARProcessSpec ARProcessSpec::make(Correlation c, double phi, double sigma,
                                  double scale, bool standardize) {
  ARProcessSpec spec;
  spec.correlation = c;
  switch (c) {
    case Correlation::kNone:
      break;
    case Correlation::kOneStep:
      spec.coefficients = {phi};
      break;
    case Correlation::kTwoStep:
      spec.coefficients = {0.0, phi};
      break;
  }
  spec.innovation_sigma = sigma;
  spec.magnitude_scale = scale;
  spec.standardize = standardize;
  return spec;
}

void validate(const ARProcessSpec& spec) {
  switch (spec.correlation) {
    case Correlation::kNone:
      if (spec.order() != 0) {
        throw ValidationError("no-correlation process must have order 0");
      }
      break;
    case Correlation::kOneStep:
      if (spec.order() != 1) {
        throw ValidationError("1-step process must have exactly [phi_1]");
      }
      break;
    case Correlation::kTwoStep:
      if (spec.order() != 2 || spec.coefficients[0] != 0.0) {
        throw ValidationError("2-step process must have coefficients [0, phi_2]");
      }
      break;
  }
  for (double phi : spec.coefficients) {
    if (!std::isfinite(phi) || std::abs(phi) >= 1.0) {
      std::ostringstream msg;
      msg << "non-stationary AR coefficient " << phi << " (|phi| must be < 1)";
      throw StationarityError(msg.str());
    }
  }
  if (!(spec.innovation_sigma > 0.0) || !std::isfinite(spec.innovation_sigma)) {
    throw ValidationError("innovation_sigma must be positive and finite");
  }
  if (!(spec.magnitude_scale > 0.0) || !std::isfinite(spec.magnitude_scale)) {
    throw ValidationError("magnitude_scale must be positive and finite");
  }
  if (!std::isfinite(spec.mean)) throw ValidationError("mean must be finite");
}

std::size_t burn_in_length(const ARProcessSpec& spec) {
  return std::max<std::size_t>(50, 10 * spec.order());
}

double stationary_std(const ARProcessSpec& spec) {
  const std::size_t p = spec.order();
  if (p == 0) return spec.innovation_sigma;
  // psi_j = sum_i phi_i psi_{j-i}; the weights decay geometrically, stop once
  // the last p of them are negligible.
  std::vector<double> psi{1.0};
  double sum_sq = 1.0;
  for (std::size_t j = 1; j < 1'000'000; ++j) {
    double next = 0.0;
    for (std::size_t i = 1; i <= p && i <= j; ++i) {
      next += spec.coefficients[i - 1] * psi[j - i];
    }
    psi.push_back(next);
    sum_sq += next * next;
    if (j >= p &&
        std::all_of(psi.end() - static_cast<std::ptrdiff_t>(p), psi.end(),
                    [](double w) { return std::abs(w) < 1e-12; })) {
      break;
    }
  }
  return spec.innovation_sigma * std::sqrt(sum_sq);
}

namespace {

std::vector<double> run_splice(const ARProcessSpec& pre,
                               const ARProcessSpec& post,
                               std::size_t injection_step, std::size_t length,
                               std::uint64_t seed) {
  validate(pre);
  validate(post);
  if (length < 1) throw ValidationError("series length must be >= 1");
  if (injection_step > length) {
    throw InvalidSpliceError("injection step beyond series length");
  }
  if (pre.innovation_sigma != post.innovation_sigma ||
      pre.magnitude_scale != post.magnitude_scale ||
      pre.standardize != post.standardize) {
    throw InvalidSpliceError(
        "pre and post processes must share innovation_sigma, magnitude_scale "
        "and standardize");
  }

  Rng rng(seed);
  const std::size_t burn = burn_in_length(pre);
  std::vector<double> history;
  history.reserve(burn + length);
  extend_recursion(pre, burn + injection_step, rng, history);
  extend_recursion(post, length - injection_step, rng, history);

  std::vector<double> out(history.begin() + static_cast<std::ptrdiff_t>(burn),
                          history.end());
  for (double& v : out) v *= pre.magnitude_scale;
  return out;
}

void check_injection(std::size_t injection_step, std::size_t length) {
  if (injection_step == 0 || injection_step >= length) {
    throw InvalidSpliceError("injection step must satisfy 0 < step < length");
  }
}

}  // namespace

std::vector<double> generate_series(const ARProcessSpec& spec,
                                    std::size_t length, std::uint64_t seed) {
  return run_splice(spec, spec, length, length, seed);
}

std::vector<double> spliced_series(const ARProcessSpec& pre,
                                   const ARProcessSpec& post,
                                   std::size_t injection_step,
                                   std::size_t length, std::uint64_t seed) {
  check_injection(injection_step, length);
  return run_splice(pre, post, injection_step, length, seed);
}

double NoiseMatrix::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= values[row].size()) {
    throw std::out_of_range("noise matrix index out of range");
  }
  return values[row][col];
}

NoiseMatrix generate_matrix(const ARProcessSpec& spec,
                            std::size_t num_dimensions, std::size_t max_steps,
                            std::uint64_t seed) {
  if (num_dimensions < 1 || max_steps < 1) {
    throw ValidationError("noise matrix needs >= 1 dimension and >= 1 step");
  }
  NoiseMatrix m;
  m.spec = spec;
  m.seed = seed;
  for (std::size_t row = 0; row < num_dimensions; ++row) {
    m.values.push_back(generate_series(spec, max_steps, mix_seed(seed, row)));
  }
  return m;
}

NoiseMatrix spliced_matrix(const ARProcessSpec& pre, const ARProcessSpec& post,
                           std::size_t injection_step,
                           std::size_t num_dimensions, std::size_t max_steps,
                           std::uint64_t seed) {
  if (num_dimensions < 1 || max_steps < 1) {
    throw ValidationError("noise matrix needs >= 1 dimension and >= 1 step");
  }
  check_injection(injection_step, max_steps);
  NoiseMatrix m;
  m.spec = post;
  m.seed = seed;
  m.values.reserve(num_dimensions);
  for (std::size_t row = 0; row < num_dimensions; ++row) {
    m.values.push_back(spliced_series(pre, post, injection_step, max_steps,
                                      mix_seed(seed, row)));
  }
  return m;
}

NoiseMatrix zero_matrix(std::size_t num_dimensions, std::size_t max_steps) {
  NoiseMatrix m;
  m.values.assign(num_dimensions, std::vector<double>(max_steps, 0.0));
  return m;
}

void to_json(nlohmann::json& j, const ARProcessSpec& spec) {
  j = nlohmann::json{{"correlation", to_string(spec.correlation)},
                     {"coefficients", spec.coefficients},
                     {"mean", spec.mean},
                     {"innovation_sigma", spec.innovation_sigma},
                     {"magnitude_scale", spec.magnitude_scale},
                     {"standardize", spec.standardize}};
}

void from_json(const nlohmann::json& j, ARProcessSpec& spec) {
  spec.correlation =
      correlation_from_string(j.at("correlation").get<std::string>());
  spec.coefficients = j.at("coefficients").get<std::vector<double>>();
  spec.mean = j.at("mean").get<double>();
  spec.innovation_sigma = j.at("innovation_sigma").get<double>();
  spec.magnitude_scale = j.at("magnitude_scale").get<double>();
  spec.standardize = j.value("standardize", false);
  validate(spec);
}

void to_json(nlohmann::json& j, const NoiseMatrix& m) {
  j = nlohmann::json{{"spec", m.spec}, {"seed", m.seed}, {"values", m.values}};
}

void from_json(const nlohmann::json& j, NoiseMatrix& m) {
  m.spec = j.at("spec").get<ARProcessSpec>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.values = j.at("values").get<std::vector<std::vector<double>>>();
}

}  // namespace dexter
