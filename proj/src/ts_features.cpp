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

#include "dexter/ts_features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numeric>

#include "dexter/errors.hpp"
#include "dexter/hashing.hpp"

namespace dexter {
namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  bool degenerate = false;
};

Moments moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / n);
  m.degenerate = m.std <= 1e-12 * std::max(1.0, std::abs(m.mean));
  return m;
}

double autocorrelation_given_mean(std::span<const double> x, double mean,
                                  std::size_t lag) {
  const std::size_t n = x.size();
  if (lag >= n) return 0.0;
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  double ck = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) {
    ck += (x[t] - mean) * (x[t + lag] - mean);
  }
  return c0 > 0.0 ? ck / c0 : 0.0;
}

double pacf_from_acf(std::span<const double> r, std::size_t lag) {
  // r[k] = autocorrelation at lag k, r[0] = 1.
  std::vector<double> phi(lag + 1, 0.0);
  std::vector<double> prev(lag + 1, 0.0);
  for (std::size_t k = 1; k <= lag; ++k) {
    double num = r[k];
    double den = 1.0;
    for (std::size_t j = 1; j < k; ++j) {
      num -= prev[j] * r[k - j];
      den -= prev[j] * r[j];
    }
    if (std::abs(den) < 1e-12) return 0.0;
    phi[k] = num / den;
    for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - phi[k] * prev[k - j];
    prev = phi;
  }
  return std::isfinite(phi[lag]) ? phi[lag] : 0.0;
}

// FFTW plans are created once per length under a lock; executing a plan on
// new arrays is thread safe.
fftw_plan plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> in(n, 0.0);
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(
      static_cast<int>(n), in.data(),
      reinterpret_cast<fftw_complex*>(out.data()),
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, p);
  return p;
}

}  // namespace

double sample_autocorrelation(std::span<const double> x, std::size_t lag) {
  if (x.empty()) return 0.0;
  const Moments m = moments(x);
  if (m.degenerate) return 0.0;
  return autocorrelation_given_mean(x, m.mean, lag);
}

double partial_autocorrelation(std::span<const double> x, std::size_t lag) {
  if (lag == 0 || x.empty()) return lag == 0 ? 1.0 : 0.0;
  const Moments m = moments(x);
  if (m.degenerate) return 0.0;
  std::vector<double> r(lag + 1);
  r[0] = 1.0;
  for (std::size_t k = 1; k <= lag; ++k) {
    r[k] = autocorrelation_given_mean(x, m.mean, k);
  }
  return pacf_from_acf(r, lag);
}

double approximate_entropy(std::span<const double> x, std::size_t m, double r) {
  const std::size_t n = x.size();
  auto phi = [&](std::size_t len) {
    if (len > n) return 0.0;
    const std::size_t count = n - len + 1;
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t matches = 0;
      for (std::size_t j = 0; j < count; ++j) {
        double dist = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          dist = std::max(dist, std::abs(x[i + k] - x[j + k]));
        }
        if (dist <= r) ++matches;
      }
      total += std::log(static_cast<double>(matches) /
                        static_cast<double>(count));
    }
    return total / static_cast<double>(count);
  };
  return phi(m) - phi(m + 1);
}

std::vector<double> fft_magnitudes(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_execute_dft_r2c(plan_for(n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  std::vector<double> mag(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::abs(out[k]);
  return mag;
}

FeatureVector extract_features(std::span<const double> x,
                               std::size_t dimension_index) {
  const std::size_t n = x.size();
  if (n < kMinWindow) {
    throw DataError("window of length " + std::to_string(n) +
                    " is shorter than the minimum of 4");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in window");
  }

  FeatureVector fv;
  fv.window_size = n;
  fv.dimension_index = dimension_index;
  auto& f = fv.values;
  const Moments mom = moments(x);

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());

  f[feature::kMean] = mom.mean;
  f[feature::kStd] = mom.degenerate ? 0.0 : mom.std;
  f[feature::kMin] = sorted.front();
  f[feature::kMax] = sorted.back();
  f[feature::kMedian] = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::size_t peaks = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) ++peaks;
  }
  f[feature::kPeaks] = static_cast<double>(peaks);

  double abs_change = 0.0;
  for (std::size_t i = 1; i < n; ++i) abs_change += std::abs(x[i] - x[i - 1]);
  f[feature::kMeanAbsChange] = abs_change / static_cast<double>(n - 1);

  double energy = 0.0;
  for (double v : x) energy += v * v;
  f[feature::kAbsEnergy] = energy;

  std::array<double, 5> acf{1.0, 0.0, 0.0, 0.0, 0.0};
  if (!mom.degenerate) {
    for (std::size_t k = 1; k <= 4; ++k) {
      acf[k] = autocorrelation_given_mean(x, mom.mean, k);
    }
  }
  for (std::size_t k = 1; k <= 4; ++k) f[feature::kAutocorr1 + k - 1] = acf[k];
  f[feature::kPacf2] = mom.degenerate ? 0.0 : pacf_from_acf(acf, 2);

  std::size_t above = 0;
  if (!mom.degenerate) {
    above = static_cast<std::size_t>(
        std::count_if(x.begin(), x.end(), [&](double v) { return v > mom.mean; }));
  }
  f[feature::kCountAboveMean] = static_cast<double>(above);

  std::size_t run = 1;
  std::size_t longest = 1;
  for (std::size_t i = 1; i < n; ++i) {
    run = x[i] > x[i - 1] ? run + 1 : 1;
    longest = std::max(longest, run);
  }
  f[feature::kLongestIncreasing] = static_cast<double>(longest);

  const std::vector<double> mag = fft_magnitudes(x);
  for (std::size_t k = 1; k <= 4; ++k) {
    std::size_t idx = k % n;
    if (idx > n / 2) idx = n - idx;
    f[feature::kFft1 + k - 1] = mag[idx];
  }
  double mass = 0.0;
  double first = 0.0;
  double second = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    const double kk = static_cast<double>(k);
    mass += mag[k];
    first += kk * mag[k];
    second += kk * kk * mag[k];
  }
  if (mass > 1e-300) {
    const double centroid = first / mass;
    f[feature::kSpectralCentroid] = centroid;
    f[feature::kSpectralVariance] =
        std::max(0.0, second / mass - centroid * centroid);
  }

  f[feature::kApproxEntropy] =
      mom.degenerate
          ? 0.0
          : approximate_entropy(x, 2, std::max(0.2 * mom.std, 1e-12));
  return fv;
}

std::vector<std::vector<FeatureVector>> extract_all(
    const std::vector<std::vector<std::vector<double>>>& windows) {
  std::vector<std::vector<FeatureVector>> out;
  out.reserve(windows.size());
  for (std::size_t d = 0; d < windows.size(); ++d) {
    std::vector<FeatureVector>& list = out.emplace_back();
    list.reserve(windows[d].size());
    for (const auto& w : windows[d]) list.push_back(extract_features(w, d));
  }
  return out;
}

nlohmann::json feature_catalogue_manifest() {
  nlohmann::json names = nlohmann::json::array();
  for (std::string_view name : kFeatureNames) names.push_back(name);
  return {{"catalogue_version", kFeatureCatalogueVersion},
          {"feature_count", kFeatureCount},
          {"names", names},
          {"approximate_entropy", {{"m", 2}, {"r_factor", 0.2}}},
          {"autocorrelation", "biased c_k/c_0, degenerate windows -> 0"}};
}

std::string feature_catalogue_hash() {
  static const std::string hash = content_hash(feature_catalogue_manifest().dump());
  return hash;
}

}  // namespace dexter
