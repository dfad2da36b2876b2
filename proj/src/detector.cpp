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

#include "dexter/detector.hpp"

#include <algorithm>
#include <numeric>

#include "dexter/errors.hpp"
#include "dexter/random.hpp"
#include "dexter/ts_features.hpp"

namespace dexter {
namespace {

void check_compatible(const DexterModel& model, std::size_t dim) {
  if (model.catalogue_hash != feature_catalogue_hash()) {
    throw IncompatibilityError("model feature catalogue " +
                               model.catalogue_hash +
                               " does not match this build (" +
                               feature_catalogue_hash() + ")");
  }
  if (dim != model.dimension()) {
    throw IncompatibilityError(
        "observation dimension " + std::to_string(dim) +
        " does not match model dimension " + std::to_string(model.dimension()));
  }
}

}  // namespace

DexterModel train_dexter(std::span<const Trajectory> dataset,
                         std::size_t window, const ForestParams& params,
                         std::uint64_t seed) {
  if (dataset.empty()) throw DataError("DEXTER training set is empty");
  if (window < kMinWindow) {
    throw ConfigError("window size must be >= " + std::to_string(kMinWindow));
  }
  std::string short_ids;
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    if (dataset[e].size() < window) {
      short_ids += (short_ids.empty() ? "" : ", ") + std::to_string(e);
    }
  }
  if (!short_ids.empty()) {
    throw DataError("episodes shorter than window " + std::to_string(window) +
                    ": " + short_ids);
  }
  const std::size_t m = dataset[0].front().size();
  if (m == 0) throw DataError("observations have zero dimension");

  std::vector<std::vector<std::vector<double>>> features(m);
  std::vector<double> column(window);
  for (const Trajectory& ep : dataset) {
    for (std::size_t start = 0; start + window <= ep.size(); start += window) {
      for (std::size_t d = 0; d < m; ++d) {
        for (std::size_t k = 0; k < window; ++k) {
          const auto& obs = ep[start + k];
          if (obs.size() != m) {
            throw DataError("inconsistent observation dimension in dataset");
          }
          column[k] = obs[d];
        }
        const FeatureVector fv = extract_features(column, d);
        features[d].emplace_back(fv.values.begin(), fv.values.end());
      }
    }
  }

  DexterModel model;
  model.window_size = window;
  model.catalogue_hash = feature_catalogue_hash();
  model.forests.reserve(m);
  for (std::size_t d = 0; d < m; ++d) {
    model.forests.push_back(IsolationForest::fit(features[d], params, seed));
  }
  return model;
}

StreamScorer::StreamScorer(const DexterModel& model)
    : model_(model), windows_(model.dimension()), scratch_(model.window_size) {
  check_compatible(model, model.dimension());
}

std::optional<double> StreamScorer::push(std::span<const double> observation) {
  check_compatible(model_, observation.size());
  ++steps_;
  const std::size_t w = model_.window_size;
  for (std::size_t d = 0; d < windows_.size(); ++d) {
    windows_[d].push_back(observation[d]);
    if (windows_[d].size() > w) windows_[d].pop_front();
  }
  if (windows_.empty() || windows_[0].size() < w) return std::nullopt;

  double total = 0.0;
  for (std::size_t d = 0; d < windows_.size(); ++d) {
    std::copy(windows_[d].begin(), windows_[d].end(), scratch_.begin());
    const FeatureVector fv = extract_features(scratch_, d);
    total += model_.forests[d].score(fv.values);
  }
  return total / static_cast<double>(windows_.size());
}

ScoreSeries score_stream(const DexterModel& model,
                         const Trajectory& observations) {
  ScoreSeries series;
  series.first_step = model.window_size - 1;
  StreamScorer scorer(model);
  for (const auto& obs : observations) {
    if (auto a = scorer.push(obs)) series.scores.push_back(*a);
  }
  return series;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_calibration_halves(std::size_t episodes, std::uint64_t seed) {
  std::vector<std::size_t> order(episodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, {0xCA11}));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = episodes / 2;
  return {std::vector<std::size_t>(order.begin(), order.begin() + half),
          std::vector<std::size_t>(order.begin() + half, order.end())};
}

CusumDetector calibrate_dexter(const DexterModel& model,
                               std::span<const Trajectory> validation,
                               double target_fpr, std::uint64_t seed,
                               CalibrationRecursion recursion) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw ValidationError("target_fpr must lie in (0, 1)");
  }
  if (validation.size() < 2) {
    throw DataError("calibration needs at least 2 validation episodes");
  }
  const auto [first, second] = split_calibration_halves(validation.size(), seed);
  std::vector<std::vector<double>> first_scores;
  std::vector<std::vector<double>> second_scores;
  for (std::size_t i : first) {
    first_scores.push_back(score_stream(model, validation[i]).scores);
  }
  for (std::size_t i : second) {
    second_scores.push_back(score_stream(model, validation[i]).scores);
  }
  const CusumCalibration cal =
      calibrate_cusum(first_scores, second_scores, target_fpr, recursion);
  return CusumDetector(cal.mean_score, cal.threshold, target_fpr);
}

Verdict run_cusum(CusumDetector detector,
                  std::span<const std::optional<double>> scores) {
  detector.reset();
  Verdict v;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    v.steps_processed = t + 1;
    if (scores[t] && detector.update(*scores[t])) {
      v.alert_step = t;
      break;
    }
  }
  return v;
}

Verdict detect_online(const CusumDetector& detector, const DexterModel& model,
                      const Trajectory& observations) {
  CusumDetector cusum = detector;
  if (!cusum.calibrated()) throw DataError("CUSUM detector is not calibrated");
  cusum.reset();
  StreamScorer scorer(model);
  Verdict v;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    v.steps_processed = t + 1;
    const std::optional<double> a = scorer.push(observations[t]);
    if (a && cusum.update(*a)) {
      v.alert_step = t;
      break;
    }
  }
  return v;
}

void to_json(nlohmann::json& j, const DexterModel& model) {
  j = nlohmann::json{{"window_size", model.window_size},
                     {"catalogue_hash", model.catalogue_hash},
                     {"forests", model.forests}};
}

void from_json(const nlohmann::json& j, DexterModel& model) {
  model.window_size = j.at("window_size").get<std::size_t>();
  model.catalogue_hash = j.at("catalogue_hash").get<std::string>();
  if (model.catalogue_hash != feature_catalogue_hash()) {
    throw IncompatibilityError("model feature catalogue " +
                               model.catalogue_hash +
                               " does not match this build (" +
                               feature_catalogue_hash() + ")");
  }
  model.forests = j.at("forests").get<std::vector<IsolationForest>>();
}

}  // namespace dexter
