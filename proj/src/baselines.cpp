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

#include "dexter/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dexter/errors.hpp"
#include "dexter/random.hpp"

namespace dexter {
namespace {

constexpr double kVarianceFloor = 1e-12;

template <typename Matrix>
bool same_values(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = m(r, c);
    }
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n_cols =
      rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) !=
        n_cols) {
      throw ValidationError("ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

void check_state_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw IncompatibilityError("state dimension " + std::to_string(got) +
                               " does not match model dimension " +
                               std::to_string(expected));
  }
}

}  // namespace

bool operator==(const DynamicsEnsemble::Member& a,
                const DynamicsEnsemble::Member& b) {
  return same_values(a.coefficients, b.coefficients) &&
         same_values(a.residual_var, b.residual_var);
}

std::vector<Transition> collect_transitions(
    std::span<const Trajectory> observations,
    std::span<const std::vector<int>> actions) {
  if (observations.size() != actions.size()) {
    throw DataError("observation and action sets differ in episode count");
  }
  std::vector<Transition> out;
  for (std::size_t e = 0; e < observations.size(); ++e) {
    const Trajectory& obs = observations[e];
    if (obs.empty()) continue;
    if (actions[e].size() + 1 != obs.size()) {
      throw DataError("episode " + std::to_string(e) +
                      " has mismatched action count");
    }
    for (std::size_t t = 0; t + 1 < obs.size(); ++t) {
      out.push_back({obs[t], actions[e][t], obs[t + 1]});
    }
  }
  return out;
}

Eigen::VectorXd polynomial_basis(std::span<const double> z) {
  const std::size_t n = z.size();
  Eigen::VectorXd phi(static_cast<Eigen::Index>(1 + n + n * (n + 1) / 2));
  Eigen::Index k = 0;
  phi(k++) = 1.0;
  for (double v : z) phi(k++) = v;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) phi(k++) = z[i] * z[j];
  }
  return phi;
}

DynamicsEnsemble DynamicsEnsemble::fit(std::span<const Transition> transitions,
                                       std::size_t ensemble_size,
                                       std::uint64_t seed) {
  if (ensemble_size < 2) throw ConfigError("ensemble size must be >= 2");
  if (transitions.size() < kMinTransitions) {
    throw DataError("dynamics model needs at least " +
                    std::to_string(kMinTransitions) + " transitions, got " +
                    std::to_string(transitions.size()));
  }
  const std::size_t m = transitions[0].state.size();
  const std::size_t n = transitions.size();
  for (const Transition& tr : transitions) {
    if (tr.state.size() != m || tr.next_state.size() != m) {
      throw DataError("transitions have inconsistent state dimension");
    }
  }

  DynamicsEnsemble ens;
  ens.input_mean_.assign(m + 1, 0.0);
  ens.input_std_.assign(m + 1, 0.0);
  ens.output_mean_.assign(m, 0.0);
  ens.output_std_.assign(m, 0.0);
  for (const Transition& tr : transitions) {
    for (std::size_t d = 0; d < m; ++d) {
      ens.input_mean_[d] += tr.state[d];
      ens.output_mean_[d] += tr.next_state[d];
    }
    ens.input_mean_[m] += tr.action;
  }
  const double nd = static_cast<double>(n);
  for (double& v : ens.input_mean_) v /= nd;
  for (double& v : ens.output_mean_) v /= nd;
  for (const Transition& tr : transitions) {
    for (std::size_t d = 0; d < m; ++d) {
      ens.input_std_[d] += std::pow(tr.state[d] - ens.input_mean_[d], 2);
      ens.output_std_[d] += std::pow(tr.next_state[d] - ens.output_mean_[d], 2);
    }
    ens.input_std_[m] += std::pow(tr.action - ens.input_mean_[m], 2);
  }
  for (std::size_t d = 0; d <= m; ++d) {
    ens.input_std_[d] = std::sqrt(ens.input_std_[d] / nd);
    if (!(ens.input_std_[d] > 1e-12)) {
      throw DataError("input coordinate " + std::to_string(d) +
                      " has zero variance");
    }
  }
  for (double& s : ens.output_std_) {
    s = std::sqrt(s / nd);
    if (!(s > 1e-12)) s = 1.0;
  }

  // Design and target matrices in standardized units.
  const Eigen::Index basis_size =
      static_cast<Eigen::Index>(1 + (m + 1) + (m + 1) * (m + 2) / 2);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), basis_size);
  Eigen::MatrixXd target(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = transitions[i];
    design.row(static_cast<Eigen::Index>(i)) =
        polynomial_basis(ens.standardize_input(tr.state, tr.action));
    for (std::size_t d = 0; d < m; ++d) {
      target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          (tr.next_state[d] - ens.output_mean_[d]) / ens.output_std_[d];
    }
  }

  for (std::size_t e = 0; e < ensemble_size; ++e) {
    Rng rng(mix_seed(seed, e));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), basis_size);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      const auto src = static_cast<Eigen::Index>(pick(rng));
      x.row(i) = design.row(src);
      y.row(i) = target.row(src);
    }
    Member member;
    member.coefficients = x.colPivHouseholderQr().solve(y);
    const Eigen::MatrixXd residual = y - x * member.coefficients;
    member.residual_var =
        (residual.array().square().colwise().sum() / nd).transpose();
    member.residual_var = member.residual_var.cwiseMax(kVarianceFloor);
    ens.members_.push_back(std::move(member));
  }
  return ens;
}

std::vector<double> DynamicsEnsemble::standardize_input(
    std::span<const double> state, int action) const {
  const std::size_t m = output_mean_.size();
  check_state_dim(m, state.size());
  std::vector<double> z(m + 1);
  for (std::size_t d = 0; d < m; ++d) {
    z[d] = (state[d] - input_mean_[d]) / input_std_[d];
  }
  z[m] = (action - input_mean_[m]) / input_std_[m];
  return z;
}

Gaussian DynamicsEnsemble::predict(std::size_t member,
                                   std::span<const double> state,
                                   int action) const {
  const Member& mem = members_.at(member);
  const Eigen::VectorXd phi = polynomial_basis(standardize_input(state, action));
  const Eigen::VectorXd mu = mem.coefficients.transpose() * phi;
  const std::size_t m = output_mean_.size();
  Gaussian g;
  g.mean.resize(m);
  g.variance.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    const auto k = static_cast<Eigen::Index>(d);
    g.mean[d] = output_mean_[d] + output_std_[d] * mu(k);
    g.variance[d] = mem.residual_var(k) * output_std_[d] * output_std_[d];
  }
  return g;
}

double DynamicsEnsemble::score(std::span<const double> state, int action,
                               std::span<const double> next_state) const {
  check_state_dim(output_mean_.size(), next_state.size());
  double total = 0.0;
  for (std::size_t e = 0; e < members_.size(); ++e) {
    const Gaussian g = predict(e, state, action);
    for (std::size_t d = 0; d < g.mean.size(); ++d) {
      const double r = next_state[d] - g.mean[d];
      total += 0.5 * std::log(2.0 * std::numbers::pi * g.variance[d]) +
               0.5 * r * r / g.variance[d];
    }
  }
  return total / static_cast<double>(members_.size());
}

void to_json(nlohmann::json& j, const DynamicsEnsemble& e) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : e.members_) {
    std::vector<double> var(m.residual_var.data(),
                            m.residual_var.data() + m.residual_var.size());
    members.push_back({{"coefficients", matrix_to_json(m.coefficients)},
                       {"residual_var", var}});
  }
  j = nlohmann::json{{"input_mean", e.input_mean_},
                     {"input_std", e.input_std_},
                     {"output_mean", e.output_mean_},
                     {"output_std", e.output_std_},
                     {"members", members}};
}

void from_json(const nlohmann::json& j, DynamicsEnsemble& e) {
  e.input_mean_ = j.at("input_mean").get<std::vector<double>>();
  e.input_std_ = j.at("input_std").get<std::vector<double>>();
  e.output_mean_ = j.at("output_mean").get<std::vector<double>>();
  e.output_std_ = j.at("output_std").get<std::vector<double>>();
  e.members_.clear();
  for (const auto& jm : j.at("members")) {
    DynamicsEnsemble::Member m;
    m.coefficients = matrix_from_json(jm.at("coefficients"));
    const auto var = jm.at("residual_var").get<std::vector<double>>();
    m.residual_var = Eigen::Map<const Eigen::VectorXd>(
        var.data(), static_cast<Eigen::Index>(var.size()));
    e.members_.push_back(std::move(m));
  }
}

std::vector<std::optional<double>> pedm_step_scores(
    const DynamicsEnsemble& ensemble, const Trajectory& observations,
    std::span<const int> actions) {
  std::vector<std::optional<double>> scores(observations.size());
  if (!observations.empty() && actions.size() + 1 != observations.size()) {
    throw DataError("action count must be observation count - 1");
  }
  for (std::size_t t = 1; t < observations.size(); ++t) {
    scores[t] =
        ensemble.score(observations[t - 1], actions[t - 1], observations[t]);
  }
  return scores;
}

CusumDetector calibrate_pedm(const DynamicsEnsemble& ensemble,
                             std::span<const Trajectory> validation,
                             std::span<const std::vector<int>> actions,
                             double target_fpr, std::uint64_t seed,
                             CalibrationRecursion recursion) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw ValidationError("target_fpr must lie in (0, 1)");
  }
  if (validation.size() < 2) {
    throw DataError("calibration needs at least 2 validation episodes");
  }
  if (validation.size() != actions.size()) {
    throw DataError("validation observations and actions differ in size");
  }
  auto defined_scores = [&](std::size_t i) {
    std::vector<double> out;
    for (const auto& s : pedm_step_scores(ensemble, validation[i], actions[i])) {
      if (s) out.push_back(*s);
    }
    return out;
  };
  const auto [first, second] = split_calibration_halves(validation.size(), seed);
  std::vector<std::vector<double>> first_scores;
  std::vector<std::vector<double>> second_scores;
  for (std::size_t i : first) first_scores.push_back(defined_scores(i));
  for (std::size_t i : second) second_scores.push_back(defined_scores(i));
  const CusumCalibration cal =
      calibrate_cusum(first_scores, second_scores, target_fpr, recursion);
  return CusumDetector(cal.mean_score, cal.threshold, target_fpr);
}

Verdict pedm_detect_online(const CusumDetector& detector,
                           const DynamicsEnsemble& ensemble,
                           const Trajectory& observations,
                           std::span<const int> actions) {
  if (!detector.calibrated()) throw DataError("CUSUM detector is not calibrated");
  const auto scores = pedm_step_scores(ensemble, observations, actions);
  return run_cusum(detector, scores);
}

double MeanShiftCusumState::statistic() const {
  double s = 0.0;
  for (std::size_t d = 0; d < upper.size(); ++d) {
    s = std::max({s, upper[d], lower[d]});
  }
  return s;
}

MeanShiftModel fit_meanshift(std::span<const Trajectory> clean,
                             double allowance) {
  MeanShiftModel model;
  model.allowance = allowance;
  std::size_t count = 0;
  for (const Trajectory& ep : clean) {
    for (const auto& obs : ep) {
      if (model.reference_mean.empty()) {
        model.reference_mean.assign(obs.size(), 0.0);
        model.reference_std.assign(obs.size(), 0.0);
      }
      check_state_dim(model.reference_mean.size(), obs.size());
      for (std::size_t d = 0; d < obs.size(); ++d) {
        model.reference_mean[d] += obs[d];
        model.reference_std[d] += obs[d] * obs[d];
      }
      ++count;
    }
  }
  if (count == 0) throw DataError("mean-shift reference needs clean data");
  for (std::size_t d = 0; d < model.reference_mean.size(); ++d) {
    const double mean = model.reference_mean[d] / static_cast<double>(count);
    const double var = std::max(
        0.0, model.reference_std[d] / static_cast<double>(count) - mean * mean);
    model.reference_mean[d] = mean;
    model.reference_std[d] = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return model;
}

bool meanshift_cusum_step(const MeanShiftModel& model,
                          MeanShiftCusumState& state,
                          std::span<const double> observation) {
  if (!model.calibrated) throw DataError("mean-shift CUSUM is not calibrated");
  const std::size_t m = model.reference_mean.size();
  check_state_dim(m, observation.size());
  if (state.upper.size() != m) {
    state.upper.assign(m, 0.0);
    state.lower.assign(m, 0.0);
  }
  for (std::size_t d = 0; d < m; ++d) {
    const double z =
        (observation[d] - model.reference_mean[d]) / model.reference_std[d];
    state.upper[d] = std::max(0.0, state.upper[d] + z - model.allowance);
    state.lower[d] = std::max(0.0, state.lower[d] - z - model.allowance);
  }
  return state.statistic() > model.threshold;
}

std::vector<double> meanshift_statistics(const MeanShiftModel& model,
                                         const Trajectory& observations) {
  MeanShiftModel open = model;
  open.calibrated = true;
  MeanShiftCusumState state;
  std::vector<double> out;
  out.reserve(observations.size());
  for (const auto& obs : observations) {
    meanshift_cusum_step(open, state, obs);
    out.push_back(state.statistic());
  }
  return out;
}

void calibrate_meanshift(MeanShiftModel& model,
                         std::span<const Trajectory> validation,
                         double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw ValidationError("target_fpr must lie in (0, 1)");
  }
  if (validation.empty()) throw DataError("no validation episodes");
  std::vector<double> maxima;
  for (const Trajectory& ep : validation) {
    const auto stats = meanshift_statistics(model, ep);
    maxima.push_back(stats.empty() ? 0.0
                                   : *std::max_element(stats.begin(), stats.end()));
  }
  model.threshold = std::max(0.0, empirical_quantile(maxima, 1.0 - target_fpr));
  model.calibrated = true;
}

Verdict meanshift_detect_online(const MeanShiftModel& model,
                                const Trajectory& observations) {
  MeanShiftCusumState state;
  Verdict v;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    v.steps_processed = t + 1;
    if (meanshift_cusum_step(model, state, observations[t])) {
      v.alert_step = t;
      break;
    }
  }
  return v;
}

void to_json(nlohmann::json& j, const MeanShiftModel& m) {
  j = nlohmann::json{{"reference_mean", m.reference_mean},
                     {"reference_std", m.reference_std},
                     {"allowance", m.allowance},
                     {"threshold", m.threshold},
                     {"calibrated", m.calibrated}};
}

void from_json(const nlohmann::json& j, MeanShiftModel& m) {
  m.reference_mean = j.at("reference_mean").get<std::vector<double>>();
  m.reference_std = j.at("reference_std").get<std::vector<double>>();
  m.allowance = j.at("allowance").get<double>();
  m.threshold = j.at("threshold").get<double>();
  m.calibrated = j.at("calibrated").get<bool>();
}

}  // namespace dexter
