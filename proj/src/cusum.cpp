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

#include "dexter/cusum.hpp"

#include <algorithm>
#include <cmath>

#include "dexter/errors.hpp"

namespace dexter {

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) *
                     static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double unclamped_cusum_max(std::span<const double> scores, double mean_score) {
  double s = 0.0;
  double s_max = 0.0;
  for (double a : scores) {
    s += a - mean_score;
    s_max = std::max(s, s_max);
  }
  return s_max;
}

double clamped_cusum_max(std::span<const double> scores, double mean_score) {
  double s = 0.0;
  double s_max = 0.0;
  for (double a : scores) {
    s = std::max(0.0, s + a - mean_score);
    s_max = std::max(s, s_max);
  }
  return s_max;
}

CusumCalibration calibrate_cusum(
    std::span<const std::vector<double>> first_half,
    std::span<const std::vector<double>> second_half, double target_fpr,
    CalibrationRecursion recursion) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw ValidationError("target_fpr must lie in (0, 1)");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ep : first_half) {
    for (double a : ep) {
      total += a;
      ++count;
    }
  }
  if (count == 0) throw DataError("no scores in the first calibration half");
  if (second_half.empty()) {
    throw DataError("no episodes in the second calibration half");
  }

  CusumCalibration cal;
  cal.mean_score = total / static_cast<double>(count);
  cal.s_max.reserve(second_half.size());
  for (const auto& ep : second_half) {
    cal.s_max.push_back(recursion == CalibrationRecursion::kClamped
                            ? clamped_cusum_max(ep, cal.mean_score)
                            : unclamped_cusum_max(ep, cal.mean_score));
  }
  cal.threshold = std::max(0.0, empirical_quantile(cal.s_max, 1.0 - target_fpr));
  return cal;
}

CusumDetector::CusumDetector(double mean_score, double threshold,
                             double target_fpr)
    : mean_score_(mean_score),
      threshold_(threshold),
      target_fpr_(target_fpr),
      calibrated_(true) {
  if (!(threshold >= 0.0)) throw ValidationError("CUSUM threshold must be >= 0");
}

bool CusumDetector::update(double score) {
  if (!calibrated_) throw DataError("CUSUM detector is not calibrated");
  running_ = std::max(0.0, running_ + score - mean_score_);
  return running_ > threshold_;
}

void to_json(nlohmann::json& j, const CusumDetector& d) {
  j = nlohmann::json{{"mean_score", d.mean_score()},
                     {"threshold", d.threshold()},
                     {"target_fpr", d.target_fpr()}};
}

void from_json(const nlohmann::json& j, CusumDetector& d) {
  d = CusumDetector(j.at("mean_score").get<double>(),
                    j.at("threshold").get<double>(),
                    j.at("target_fpr").get<double>());
}

}  // namespace dexter
