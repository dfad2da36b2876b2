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

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dexter/cusum.hpp"
#include "dexter/detector.hpp"
#include "json.hpp"

namespace dexter {

inline constexpr std::size_t kDefaultEnsembleSize = 5;
inline constexpr std::size_t kMinTransitions = 100;
inline constexpr double kDefaultAllowance = 0.5;

struct Transition {
  std::vector<double> state;
  int action = 0;
  std::vector<double> next_state;
};

// (o_t, a_t, o_{t+1}) for every step of every trajectory.
std::vector<Transition> collect_transitions(
    std::span<const Trajectory> observations,
    std::span<const std::vector<int>> actions);

// [1, z_i, z_i z_j for i <= j]: the degree-2 polynomial basis.
Eigen::VectorXd polynomial_basis(std::span<const double> z);

struct Gaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Ensemble of per-dimension linear regressors on a degree-2 polynomial
// basis of the standardized (state, action), each fitted on a bootstrap
// resample with its own residual variance. Stands in for a deep
// probabilistic dynamics ensemble.
class DynamicsEnsemble {
 public:
  struct Member {
    Eigen::MatrixXd coefficients;    // basis x state_dim, standardized units
    Eigen::VectorXd residual_var;    // standardized units, > 0
    friend bool operator==(const Member& a, const Member& b);
  };

  DynamicsEnsemble() = default;

  // Throws DataError for fewer than kMinTransitions transitions or an input
  // coordinate with zero variance; ConfigError for ensemble_size < 2.
  static DynamicsEnsemble fit(std::span<const Transition> transitions,
                              std::size_t ensemble_size, std::uint64_t seed);

  Gaussian predict(std::size_t member, std::span<const double> state,
                   int action) const;
  // Mean over members of -log N(next | mean, variance), summed over
  // dimensions. Higher is more anomalous.
  double score(std::span<const double> state, int action,
               std::span<const double> next_state) const;

  std::size_t size() const { return members_.size(); }
  std::size_t state_dim() const { return output_mean_.size(); }
  const std::vector<Member>& members() const { return members_; }

  friend bool operator==(const DynamicsEnsemble&,
                         const DynamicsEnsemble&) = default;
  friend void to_json(nlohmann::json& j, const DynamicsEnsemble& e);
  friend void from_json(const nlohmann::json& j, DynamicsEnsemble& e);

 private:
  std::vector<double> standardize_input(std::span<const double> state,
                                        int action) const;

  std::vector<Member> members_;
  std::vector<double> input_mean_;  // state dims then action
  std::vector<double> input_std_;
  std::vector<double> output_mean_;
  std::vector<double> output_std_;
};

// Per-step transition scores: entry t scores the transition producing
// observation t; entry 0 is undefined.
std::vector<std::optional<double>> pedm_step_scores(
    const DynamicsEnsemble& ensemble, const Trajectory& observations,
    std::span<const int> actions);

// Same calibration path as DEXTER+C, fed with transition scores.
CusumDetector calibrate_pedm(const DynamicsEnsemble& ensemble,
                             std::span<const Trajectory> validation,
                             std::span<const std::vector<int>> actions,
                             double target_fpr, std::uint64_t seed = 0,
                             CalibrationRecursion recursion =
                                 CalibrationRecursion::kUnclamped);

Verdict pedm_detect_online(const CusumDetector& detector,
                           const DynamicsEnsemble& ensemble,
                           const Trajectory& observations,
                           std::span<const int> actions);

// Reference statistics and alert threshold of the per-coordinate two-sided
// mean-shift CUSUM.
struct MeanShiftModel {
  std::vector<double> reference_mean;
  std::vector<double> reference_std;
  double allowance = kDefaultAllowance;
  double threshold = 0.0;
  bool calibrated = false;

  friend bool operator==(const MeanShiftModel&, const MeanShiftModel&) = default;
};

struct MeanShiftCusumState {
  std::vector<double> upper;
  std::vector<double> lower;

  // max over coordinates of max(upper, lower).
  double statistic() const;
};

// Reference mean/std per coordinate over every observation of the clean set.
MeanShiftModel fit_meanshift(std::span<const Trajectory> clean,
                             double allowance = kDefaultAllowance);

// U <- max(0, U + z - k), L <- max(0, L - z - k). Returns true when the
// statistic exceeds the threshold. Throws DataError when uncalibrated.
bool meanshift_cusum_step(const MeanShiftModel& model,
                          MeanShiftCusumState& state,
                          std::span<const double> observation);

// Statistic after each observation of the trajectory (no halting).
std::vector<double> meanshift_statistics(const MeanShiftModel& model,
                                         const Trajectory& observations);

// threshold = (1 - target_fpr) quantile of per-episode maxima.
void calibrate_meanshift(MeanShiftModel& model,
                         std::span<const Trajectory> validation,
                         double target_fpr);

Verdict meanshift_detect_online(const MeanShiftModel& model,
                                const Trajectory& observations);

void to_json(nlohmann::json& j, const MeanShiftModel& m);
void from_json(const nlohmann::json& j, MeanShiftModel& m);

}  // namespace dexter
