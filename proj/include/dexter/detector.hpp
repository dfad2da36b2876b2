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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dexter/cusum.hpp"
#include "dexter/isolation_forest.hpp"
#include "json.hpp"

namespace dexter {

inline constexpr std::size_t kDefaultWindow = 10;
inline constexpr double kDefaultTargetFpr = 0.01;

// One observation vector per time step.
using Trajectory = std::vector<std::vector<double>>;

// One isolation forest per state dimension over windowed time-series
// features of that dimension.
struct DexterModel {
  std::vector<IsolationForest> forests;
  std::size_t window_size = kDefaultWindow;
  std::string catalogue_hash;

  std::size_t dimension() const { return forests.size(); }
  friend bool operator==(const DexterModel&, const DexterModel&) = default;
};

// Partitions every trajectory into consecutive non-overlapping windows of
// `window` steps (the remainder is dropped) and fits forest d on the
// features of dimension d. All dimensions share one forest seed.
//
// Throws DataError on an empty dataset or when any trajectory is shorter
// than the window (the message lists the offending indices).
DexterModel train_dexter(std::span<const Trajectory> dataset,
                         std::size_t window, const ForestParams& params,
                         std::uint64_t seed);

// A_t for t in [first_step, first_step + scores.size()).
struct ScoreSeries {
  std::size_t first_step = 0;
  std::vector<double> scores;

  bool defined(std::size_t t) const {
    return t >= first_step && t - first_step < scores.size();
  }
  double at(std::size_t t) const { return scores.at(t - first_step); }
};

// Sliding window of the last W observations. push() returns A_t once the
// window is full, nullopt during warm-up.
class StreamScorer {
 public:
  explicit StreamScorer(const DexterModel& model);

  std::optional<double> push(std::span<const double> observation);
  std::size_t steps_seen() const { return steps_; }

 private:
  const DexterModel& model_;
  std::vector<std::deque<double>> windows_;
  std::vector<double> scratch_;
  std::size_t steps_ = 0;
};

// Throws IncompatibilityError when the observation dimension or catalogue
// hash does not match the model.
ScoreSeries score_stream(const DexterModel& model,
                         const Trajectory& observations);

// Seeded shuffle of the validation episodes, split into halves by episode.
// Ā is the mean score over the first half; tau the (1 - target_fpr) quantile
// of per-episode S_max over the second half.
CusumDetector calibrate_dexter(
    const DexterModel& model, std::span<const Trajectory> validation,
    double target_fpr, std::uint64_t seed = 0,
    CalibrationRecursion recursion = CalibrationRecursion::kUnclamped);

struct Verdict {
  std::optional<std::size_t> alert_step;
  std::size_t steps_processed = 0;

  bool alerted() const { return alert_step.has_value(); }
};

// Runs the CUSUM rule over the stream and halts at the first alert. Steps
// without a defined score leave the statistic unchanged.
Verdict detect_online(const CusumDetector& detector, const DexterModel& model,
                      const Trajectory& observations);

// Generic form over precomputed per-step scores (nullopt = undefined).
Verdict run_cusum(CusumDetector detector,
                  std::span<const std::optional<double>> scores);

// Splits `episodes` (by index) into first/second calibration halves after a
// seeded shuffle. The first half gets floor(n / 2) episodes.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_calibration_halves(std::size_t episodes, std::uint64_t seed);

void to_json(nlohmann::json& j, const DexterModel& model);
// Throws IncompatibilityError when the stored catalogue hash differs from
// the compiled-in catalogue.
void from_json(const nlohmann::json& j, DexterModel& model);

}  // namespace dexter
