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
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace dexter {

// Empirical quantile with linear interpolation between order statistics
// (position q * (n - 1) in the sorted sample).
double empirical_quantile(std::vector<double> values, double q);

// Largest value of the unclamped running sum S <- S + a_t - mean, starting
// from S = 0 and S_max = 0.
double unclamped_cusum_max(std::span<const double> scores, double mean_score);
// Largest value of the clamped recursion S <- max(0, S + a_t - mean).
double clamped_cusum_max(std::span<const double> scores, double mean_score);

enum class CalibrationRecursion { kUnclamped, kClamped };

struct CusumCalibration {
  double mean_score = 0.0;
  double threshold = 0.0;
  std::vector<double> s_max;  // per second-half episode
};

// The single calibration routine shared by every CUSUM-based detector:
// mean_score is the mean over all scores of the first half, threshold is the
// (1 - target_fpr) empirical quantile of the per-episode S_max over the
// second half. Throws ValidationError for target_fpr outside (0, 1) and
// DataError when either half has no scores.
CusumCalibration calibrate_cusum(
    std::span<const std::vector<double>> first_half,
    std::span<const std::vector<double>> second_half, double target_fpr,
    CalibrationRecursion recursion);

// Online page CUSUM with a calibrated reference mean and threshold.
class CusumDetector {
 public:
  CusumDetector() = default;
  CusumDetector(double mean_score, double threshold, double target_fpr);

  bool calibrated() const { return calibrated_; }
  double mean_score() const { return mean_score_; }
  double threshold() const { return threshold_; }
  double target_fpr() const { return target_fpr_; }
  double statistic() const { return running_; }

  // S <- max(0, S + score - mean); returns true when S > threshold.
  // Throws DataError on an uncalibrated detector.
  bool update(double score);
  void reset() { running_ = 0.0; }

  friend bool operator==(const CusumDetector&, const CusumDetector&) = default;

 private:
  double mean_score_ = 0.0;
  double threshold_ = 0.0;
  double target_fpr_ = 0.0;
  double running_ = 0.0;
  bool calibrated_ = false;
};

void to_json(nlohmann::json& j, const CusumDetector& d);
void from_json(const nlohmann::json& j, CusumDetector& d);

}  // namespace dexter
