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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dexter/baselines.hpp"
#include "dexter/detector.hpp"
#include "dexter/environments.hpp"
#include "json.hpp"

namespace dexter {

struct LabeledScore {
  double score = 0.0;
  bool anomalous = false;
};

// P(anomalous score > in-distribution score) with ties counted 1/2, via
// average ranks. Throws UndefinedMetricError unless both labels occur.
double auroc_one_sided(std::span<const LabeledScore> scores);
// max(AUROC, 1 - AUROC).
double auroc(std::span<const LabeledScore> scores);

struct DetectionTimeSummary {
  // Mean over episodes without a pre-injection alert; H for undetected.
  double mean = 0.0;
  std::size_t counted = 0;
  std::size_t detected = 0;           // alerted at or after t_a
  std::size_t pre_injection_alerts = 0;
  // Per episode; nullopt for pre-injection alerts.
  std::vector<std::optional<double>> per_episode;
};

DetectionTimeSummary detection_time(
    std::span<const std::optional<std::size_t>> alert_steps,
    std::span<const std::size_t> injection_times, std::size_t horizon);

enum class DetectorKind { kDexter, kDexterCusum, kPedm, kPedmCusum, kMeanShift };

std::string_view to_string(DetectorKind k);
DetectorKind detector_from_string(std::string_view s);
bool is_sequential(DetectorKind k);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::kDexter;
  std::size_t window = kDefaultWindow;
  ForestParams forest;
  std::size_t ensemble_size = kDefaultEnsembleSize;
  double allowance = kDefaultAllowance;
  double target_fpr = kDefaultTargetFpr;
  CalibrationRecursion recursion = CalibrationRecursion::kUnclamped;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

struct EpisodeCounts {
  std::size_t train = 100;
  std::size_t validation = 100;
  std::size_t test = 50;
  std::size_t clean_test = 200;
};

struct Dataset {
  std::vector<Episode> train;       // clean
  std::vector<Episode> validation;  // clean
  std::vector<Episode> test;        // injected
  std::vector<Episode> clean_test;  // clean
};

// Every episode seed is derived from the master seed and its split/index.
Dataset generate_dataset(const ScenarioConfig& config,
                         const EpisodeCounts& counts,
                         std::uint64_t master_seed);

struct TrainedDetector {
  DetectorSpec spec;
  std::optional<DexterModel> dexter;
  std::optional<DynamicsEnsemble> pedm;
  std::optional<MeanShiftModel> meanshift;
  std::optional<CusumDetector> cusum;

  friend bool operator==(const TrainedDetector&, const TrainedDetector&) = default;
};

// Fits on `train` and calibrates CUSUM thresholds on `validation`.
TrainedDetector train_detector(const DetectorSpec& spec,
                               std::span<const Episode> train,
                               std::span<const Episode> validation,
                               std::uint64_t seed);

// Entry t scores the transition producing observation t (nullopt when
// undefined: warm-up or t = 0).
std::vector<std::optional<double>> step_scores(const TrainedDetector& detector,
                                               const Episode& episode);

// Online decision for sequential detectors; throws ValidationError for
// score-only detectors.
Verdict run_online(const TrainedDetector& detector, const Episode& episode);

struct EpisodeDetail {
  std::uint64_t seed = 0;
  std::optional<std::size_t> injection_time;
  std::size_t length = 0;
  bool usable = true;
  std::optional<std::size_t> alert_step;
  std::optional<double> detection_time;
  std::optional<double> auroc;
};

struct ExperimentResult {
  std::string scenario_id;
  std::string detector_id;
  double auroc = 0.5;
  std::optional<double> auroc_per_episode;
  std::optional<double> mean_detection_time;
  // Share of counted episodes alerted before the horizon cap.
  std::optional<double> fraction_detected;
  std::size_t pre_injection_alerts = 0;
  std::optional<double> fpr_measured;
  std::size_t num_episodes = 0;
  std::size_t unusable_episodes = 0;
  std::size_t labeled_transitions = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeDetail> episodes;
};

// Pools per-transition scores of all usable test episodes (first window-1
// transitions of each excluded) and labels into one AUROC, runs the online
// rule on test and clean-test episodes for sequential detectors.
ExperimentResult evaluate_detector(const TrainedDetector& detector,
                                   const Dataset& data, std::size_t horizon,
                                   std::string scenario_id);

// Builds the labeled pool used by evaluate_detector for one episode.
std::vector<LabeledScore> labeled_scores(
    const Episode& episode, std::span<const std::optional<double>> scores,
    std::size_t window);

ExperimentResult run_experiment(const ScenarioConfig& config,
                                const DetectorSpec& detector,
                                const EpisodeCounts& counts,
                                std::uint64_t master_seed);

std::string scenario_id(const ScenarioConfig& config);

void to_json(nlohmann::json& j, const DetectorSpec& s);
void from_json(const nlohmann::json& j, DetectorSpec& s);
void to_json(nlohmann::json& j, const TrainedDetector& d);
void from_json(const nlohmann::json& j, TrainedDetector& d);
void to_json(nlohmann::json& j, const ExperimentResult& r);
void from_json(const nlohmann::json& j, ExperimentResult& r);

}  // namespace dexter
