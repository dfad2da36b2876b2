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

#include "dexter/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <type_traits>

#include "dexter/errors.hpp"
#include "dexter/random.hpp"

namespace dexter {
namespace {

std::vector<Trajectory> observations_of(std::span<const Episode> episodes) {
  std::vector<Trajectory> out;
  out.reserve(episodes.size());
  for (const Episode& e : episodes) out.push_back(e.observations);
  return out;
}

std::vector<std::vector<int>> actions_of(std::span<const Episode> episodes) {
  std::vector<std::vector<int>> out;
  out.reserve(episodes.size());
  for (const Episode& e : episodes) out.push_back(e.actions);
  return out;
}

std::string_view recursion_name(CalibrationRecursion r) {
  return r == CalibrationRecursion::kClamped ? "clamped" : "unclamped";
}

}  // namespace

double auroc_one_sided(std::span<const LabeledScore> scores) {
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const auto& s : scores) n_pos += s.anomalous ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("AUROC needs both anomalous and "
                               "in-distribution scores");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].score < scores[b].score;
  });
  // Sum of 1-based average ranks of the anomalous scores.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]].score == scores[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (scores[order[k]].anomalous) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

double auroc(std::span<const LabeledScore> scores) {
  const double a = auroc_one_sided(scores);
  return std::max(a, 1.0 - a);
}

DetectionTimeSummary detection_time(
    std::span<const std::optional<std::size_t>> alert_steps,
    std::span<const std::size_t> injection_times, std::size_t horizon) {
  if (alert_steps.size() != injection_times.size()) {
    throw DataError("alert and injection lists differ in length");
  }
  DetectionTimeSummary s;
  double total = 0.0;
  for (std::size_t e = 0; e < alert_steps.size(); ++e) {
    const auto& alert = alert_steps[e];
    if (alert && *alert < injection_times[e]) {
      ++s.pre_injection_alerts;
      s.per_episode.emplace_back(std::nullopt);
      continue;
    }
    const double dt = alert ? static_cast<double>(*alert - injection_times[e])
                            : static_cast<double>(horizon);
    if (alert) ++s.detected;
    s.per_episode.emplace_back(dt);
    total += dt;
    ++s.counted;
  }
  s.mean = s.counted > 0 ? total / static_cast<double>(s.counted)
                         : static_cast<double>(horizon);
  return s;
}

std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::kDexter:
      return "dexter";
    case DetectorKind::kDexterCusum:
      return "dexter_c";
    case DetectorKind::kPedm:
      return "pedm_lite";
    case DetectorKind::kPedmCusum:
      return "pedm_c_lite";
    case DetectorKind::kMeanShift:
      return "meanshift_cusum";
  }
  return "dexter";
}

DetectorKind detector_from_string(std::string_view s) {
  if (s == "dexter") return DetectorKind::kDexter;
  if (s == "dexter_c" || s == "dexter+c") return DetectorKind::kDexterCusum;
  if (s == "pedm_lite" || s == "pedm") return DetectorKind::kPedm;
  if (s == "pedm_c_lite" || s == "pedm_c") return DetectorKind::kPedmCusum;
  if (s == "meanshift_cusum" || s == "meanshift") return DetectorKind::kMeanShift;
  throw ConfigError("unknown detector '" + std::string(s) + "'");
}

bool is_sequential(DetectorKind k) {
  return k == DetectorKind::kDexterCusum || k == DetectorKind::kPedmCusum ||
         k == DetectorKind::kMeanShift;
}

Dataset generate_dataset(const ScenarioConfig& config,
                         const EpisodeCounts& counts,
                         std::uint64_t master_seed) {
  validate(config);
  const Policy policy = builtin_policy(config.base_env, config.policy);
  auto make = [&](std::size_t split, std::size_t count, EpisodeMode mode) {
    std::vector<Episode> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(
          run_episode(config, policy, mix_seed(master_seed, {split, i}), mode));
    }
    return out;
  };
  Dataset d;
  d.train = make(1, counts.train, EpisodeMode::kClean);
  d.validation = make(2, counts.validation, EpisodeMode::kClean);
  d.test = make(3, counts.test, EpisodeMode::kInjected);
  d.clean_test = make(4, counts.clean_test, EpisodeMode::kClean);
  return d;
}

TrainedDetector train_detector(const DetectorSpec& spec,
                               std::span<const Episode> train,
                               std::span<const Episode> validation,
                               std::uint64_t seed) {
  TrainedDetector out;
  out.spec = spec;
  const std::vector<Trajectory> train_obs = observations_of(train);
  const std::vector<Trajectory> val_obs = observations_of(validation);
  switch (spec.kind) {
    case DetectorKind::kDexter:
    case DetectorKind::kDexterCusum:
      out.dexter = train_dexter(train_obs, spec.window, spec.forest,
                                mix_seed(seed, {1}));
      if (spec.kind == DetectorKind::kDexterCusum) {
        out.cusum = calibrate_dexter(*out.dexter, val_obs, spec.target_fpr,
                                     mix_seed(seed, {2}), spec.recursion);
      }
      break;
    case DetectorKind::kPedm:
    case DetectorKind::kPedmCusum: {
      const auto train_actions = actions_of(train);
      out.pedm = DynamicsEnsemble::fit(
          collect_transitions(train_obs, train_actions), spec.ensemble_size,
          mix_seed(seed, {3}));
      if (spec.kind == DetectorKind::kPedmCusum) {
        out.cusum = calibrate_pedm(*out.pedm, val_obs, actions_of(validation),
                                   spec.target_fpr, mix_seed(seed, {2}),
                                   spec.recursion);
      }
      break;
    }
    case DetectorKind::kMeanShift:
      out.meanshift = fit_meanshift(train_obs, spec.allowance);
      calibrate_meanshift(*out.meanshift, val_obs, spec.target_fpr);
      break;
  }
  return out;
}

std::vector<std::optional<double>> step_scores(const TrainedDetector& detector,
                                               const Episode& episode) {
  std::vector<std::optional<double>> out(episode.observations.size());
  switch (detector.spec.kind) {
    case DetectorKind::kDexter:
    case DetectorKind::kDexterCusum: {
      const ScoreSeries s = score_stream(*detector.dexter, episode.observations);
      for (std::size_t k = 0; k < s.scores.size(); ++k) {
        out[s.first_step + k] = s.scores[k];
      }
      break;
    }
    case DetectorKind::kPedm:
    case DetectorKind::kPedmCusum:
      out = pedm_step_scores(*detector.pedm, episode.observations,
                             episode.actions);
      break;
    case DetectorKind::kMeanShift: {
      const auto stats =
          meanshift_statistics(*detector.meanshift, episode.observations);
      for (std::size_t t = 0; t < stats.size(); ++t) out[t] = stats[t];
      break;
    }
  }
  return out;
}

Verdict run_online(const TrainedDetector& detector, const Episode& episode) {
  switch (detector.spec.kind) {
    case DetectorKind::kDexterCusum:
      return detect_online(*detector.cusum, *detector.dexter,
                           episode.observations);
    case DetectorKind::kPedmCusum:
      return pedm_detect_online(*detector.cusum, *detector.pedm,
                                episode.observations, episode.actions);
    case DetectorKind::kMeanShift:
      return meanshift_detect_online(*detector.meanshift, episode.observations);
    default:
      throw ValidationError(std::string(to_string(detector.spec.kind)) +
                            " has no online decision rule");
  }
}

std::vector<LabeledScore> labeled_scores(
    const Episode& episode, std::span<const std::optional<double>> scores,
    std::size_t window) {
  std::vector<LabeledScore> out;
  const std::size_t skip = window > 0 ? window - 1 : 0;
  for (std::size_t i = skip; i < episode.labels.size(); ++i) {
    const auto& s = scores[i + 1];
    if (!s) {
      throw DataError("missing score for transition " + std::to_string(i));
    }
    out.push_back({*s, episode.labels[i]});
  }
  return out;
}

ExperimentResult evaluate_detector(const TrainedDetector& detector,
                                   const Dataset& data, std::size_t horizon,
                                   std::string scenario) {
  ExperimentResult r;
  r.scenario_id = std::move(scenario);
  r.detector_id = std::string(to_string(detector.spec.kind));
  const bool sequential = is_sequential(detector.spec.kind);

  std::vector<LabeledScore> pool;
  std::vector<std::optional<std::size_t>> alerts;
  std::vector<std::size_t> injections;
  double per_episode_total = 0.0;
  std::size_t per_episode_count = 0;

  for (const Episode& ep : data.test) {
    EpisodeDetail detail;
    detail.seed = ep.seed;
    detail.injection_time = ep.injection_time;
    detail.length = ep.length();
    detail.usable = ep.usable && ep.injection_time.has_value();
    r.seeds.push_back(ep.seed);
    if (!detail.usable) {
      ++r.unusable_episodes;
      r.episodes.push_back(detail);
      continue;
    }
    ++r.num_episodes;
    const auto scores = step_scores(detector, ep);
    const std::vector<LabeledScore> labeled =
        labeled_scores(ep, scores, detector.spec.window);
    r.labeled_transitions += labeled.size();
    pool.insert(pool.end(), labeled.begin(), labeled.end());
    const bool both = std::any_of(labeled.begin(), labeled.end(),
                                  [](const auto& s) { return s.anomalous; }) &&
                      std::any_of(labeled.begin(), labeled.end(),
                                  [](const auto& s) { return !s.anomalous; });
    if (both) {
      detail.auroc = auroc(labeled);
      per_episode_total += *detail.auroc;
      ++per_episode_count;
    }
    if (sequential) {
      detail.alert_step = run_online(detector, ep).alert_step;
      alerts.push_back(detail.alert_step);
      injections.push_back(*ep.injection_time);
    }
    r.episodes.push_back(detail);
  }

  r.auroc = auroc(pool);
  if (per_episode_count > 0) {
    r.auroc_per_episode = per_episode_total / static_cast<double>(per_episode_count);
  }

  if (sequential) {
    const DetectionTimeSummary dt = detection_time(alerts, injections, horizon);
    r.mean_detection_time = dt.mean;
    r.pre_injection_alerts = dt.pre_injection_alerts;
    r.fraction_detected =
        dt.counted > 0 ? static_cast<double>(dt.detected) /
                             static_cast<double>(dt.counted)
                       : 0.0;
    std::size_t k = 0;
    for (EpisodeDetail& detail : r.episodes) {
      if (detail.usable) detail.detection_time = dt.per_episode[k++];
    }
    if (!data.clean_test.empty()) {
      std::size_t false_alarms = 0;
      for (const Episode& ep : data.clean_test) {
        false_alarms += run_online(detector, ep).alerted() ? 1 : 0;
      }
      r.fpr_measured = static_cast<double>(false_alarms) /
                       static_cast<double>(data.clean_test.size());
    }
  }
  return r;
}

std::string scenario_id(const ScenarioConfig& config) {
  std::ostringstream os;
  os << to_string(config.scenario) << '/' << to_string(config.base_env) << '/'
     << to_string(config.noise_post.correlation) << '/'
     << config.noise_post.magnitude_scale;
  return os.str();
}

ExperimentResult run_experiment(const ScenarioConfig& config,
                                const DetectorSpec& detector,
                                const EpisodeCounts& counts,
                                std::uint64_t master_seed) {
  const Dataset data = generate_dataset(config, counts, master_seed);
  const TrainedDetector trained = train_detector(
      detector, data.train, data.validation, mix_seed(master_seed, {5}));
  return evaluate_detector(trained, data, config.horizon, scenario_id(config));
}

void to_json(nlohmann::json& j, const DetectorSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"window", s.window},
                     {"trees", s.forest.trees},
                     {"subsample", s.forest.subsample},
                     {"ensemble_size", s.ensemble_size},
                     {"allowance", s.allowance},
                     {"target_fpr", s.target_fpr},
                     {"calibration_recursion", recursion_name(s.recursion)}};
}

void from_json(const nlohmann::json& j, DetectorSpec& s) {
  s.kind = detector_from_string(j.at("kind").get<std::string>());
  s.window = j.at("window").get<std::size_t>();
  s.forest.trees = j.at("trees").get<std::size_t>();
  s.forest.subsample = j.at("subsample").get<std::size_t>();
  s.ensemble_size = j.at("ensemble_size").get<std::size_t>();
  s.allowance = j.at("allowance").get<double>();
  s.target_fpr = j.at("target_fpr").get<double>();
  s.recursion = j.at("calibration_recursion").get<std::string>() == "clamped"
                    ? CalibrationRecursion::kClamped
                    : CalibrationRecursion::kUnclamped;
}

void to_json(nlohmann::json& j, const TrainedDetector& d) {
  j = nlohmann::json{{"detector", d.spec}};
  if (d.dexter) j["dexter"] = *d.dexter;
  if (d.pedm) j["pedm"] = *d.pedm;
  if (d.meanshift) j["meanshift"] = *d.meanshift;
  if (d.cusum) j["cusum"] = *d.cusum;
}

void from_json(const nlohmann::json& j, TrainedDetector& d) {
  d = TrainedDetector{};
  d.spec = j.at("detector").get<DetectorSpec>();
  if (j.contains("dexter")) d.dexter = j.at("dexter").get<DexterModel>();
  if (j.contains("pedm")) d.pedm = j.at("pedm").get<DynamicsEnsemble>();
  if (j.contains("meanshift")) {
    d.meanshift = j.at("meanshift").get<MeanShiftModel>();
  }
  if (j.contains("cusum")) d.cusum = j.at("cusum").get<CusumDetector>();
  const DetectorKind k = d.spec.kind;
  const bool ok =
      ((k == DetectorKind::kDexter || k == DetectorKind::kDexterCusum) ==
       d.dexter.has_value()) &&
      ((k == DetectorKind::kPedm || k == DetectorKind::kPedmCusum) ==
       d.pedm.has_value()) &&
      ((k == DetectorKind::kMeanShift) == d.meanshift.has_value()) &&
      ((k == DetectorKind::kDexterCusum || k == DetectorKind::kPedmCusum) ==
       d.cusum.has_value());
  if (!ok) {
    throw ValidationError("model file sections do not match detector kind");
  }
}

void to_json(nlohmann::json& j, const ExperimentResult& r) {
  auto opt = [](const auto& v) -> nlohmann::json {
    if (v) return *v;
    return nullptr;
  };
  nlohmann::json episodes = nlohmann::json::array();
  for (const EpisodeDetail& e : r.episodes) {
    episodes.push_back({{"seed", e.seed},
                        {"injection_time", opt(e.injection_time)},
                        {"length", e.length},
                        {"usable", e.usable},
                        {"alert_step", opt(e.alert_step)},
                        {"detection_time", opt(e.detection_time)},
                        {"auroc", opt(e.auroc)}});
  }
  j = nlohmann::json{{"scenario", r.scenario_id},
                     {"detector", r.detector_id},
                     {"auroc", r.auroc},
                     {"auroc_per_episode", opt(r.auroc_per_episode)},
                     {"mean_detection_time", opt(r.mean_detection_time)},
                     {"fraction_detected", opt(r.fraction_detected)},
                     {"pre_injection_alerts", r.pre_injection_alerts},
                     {"fpr_measured", opt(r.fpr_measured)},
                     {"num_episodes", r.num_episodes},
                     {"unusable_episodes", r.unusable_episodes},
                     {"labeled_transitions", r.labeled_transitions},
                     {"seeds", r.seeds},
                     {"episodes", episodes}};
}

void from_json(const nlohmann::json& j, ExperimentResult& r) {
  auto opt = [&](const char* key, auto& out) {
    using T = typename std::decay_t<decltype(out)>::value_type;
    if (j.contains(key) && !j.at(key).is_null()) {
      out = j.at(key).get<T>();
    } else {
      out.reset();
    }
  };
  r = ExperimentResult{};
  r.scenario_id = j.at("scenario").get<std::string>();
  r.detector_id = j.at("detector").get<std::string>();
  r.auroc = j.at("auroc").get<double>();
  opt("auroc_per_episode", r.auroc_per_episode);
  opt("mean_detection_time", r.mean_detection_time);
  opt("fraction_detected", r.fraction_detected);
  r.pre_injection_alerts = j.at("pre_injection_alerts").get<std::size_t>();
  opt("fpr_measured", r.fpr_measured);
  r.num_episodes = j.at("num_episodes").get<std::size_t>();
  r.unusable_episodes = j.at("unusable_episodes").get<std::size_t>();
  r.labeled_transitions = j.at("labeled_transitions").get<std::size_t>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& e : j.at("episodes")) {
    EpisodeDetail d;
    d.seed = e.at("seed").get<std::uint64_t>();
    if (!e.at("injection_time").is_null()) {
      d.injection_time = e.at("injection_time").get<std::size_t>();
    }
    d.length = e.at("length").get<std::size_t>();
    d.usable = e.at("usable").get<bool>();
    if (!e.at("alert_step").is_null()) d.alert_step = e.at("alert_step").get<std::size_t>();
    if (!e.at("detection_time").is_null()) {
      d.detection_time = e.at("detection_time").get<double>();
    }
    if (!e.at("auroc").is_null()) d.auroc = e.at("auroc").get<double>();
    r.episodes.push_back(d);
  }
}

}  // namespace dexter
