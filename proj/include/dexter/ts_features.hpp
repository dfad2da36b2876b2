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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dexter {

// Catalogue version 1. Changing the list or its order is a breaking change
// for every persisted model.
inline constexpr int kFeatureCatalogueVersion = 1;
inline constexpr std::size_t kFeatureCount = 22;
inline constexpr std::size_t kMinWindow = 4;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "mean",
    "std",
    "minimum",
    "maximum",
    "median",
    "number_peaks",
    "mean_abs_change",
    "abs_energy",
    "autocorrelation_lag1",
    "autocorrelation_lag2",
    "autocorrelation_lag3",
    "autocorrelation_lag4",
    "partial_autocorrelation_lag2",
    "count_above_mean",
    "longest_increasing_run",
    "fft_abs_coefficient_1",
    "fft_abs_coefficient_2",
    "fft_abs_coefficient_3",
    "fft_abs_coefficient_4",
    "fft_spectral_centroid",
    "fft_spectral_variance",
    "approximate_entropy",
};

namespace feature {
inline constexpr std::size_t kMean = 0;
inline constexpr std::size_t kStd = 1;
inline constexpr std::size_t kMin = 2;
inline constexpr std::size_t kMax = 3;
inline constexpr std::size_t kMedian = 4;
inline constexpr std::size_t kPeaks = 5;
inline constexpr std::size_t kMeanAbsChange = 6;
inline constexpr std::size_t kAbsEnergy = 7;
inline constexpr std::size_t kAutocorr1 = 8;  // lags 1..4 are contiguous
inline constexpr std::size_t kPacf2 = 12;
inline constexpr std::size_t kCountAboveMean = 13;
inline constexpr std::size_t kLongestIncreasing = 14;
inline constexpr std::size_t kFft1 = 15;  // coefficients 1..4 are contiguous
inline constexpr std::size_t kSpectralCentroid = 19;
inline constexpr std::size_t kSpectralVariance = 20;
inline constexpr std::size_t kApproxEntropy = 21;
}  // namespace feature

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::size_t window_size = 0;
  std::size_t dimension_index = 0;

  double operator[](std::size_t i) const { return values[i]; }
};

// Throws DataError for windows shorter than kMinWindow and ValidationError
// for non-finite input.
FeatureVector extract_features(std::span<const double> window,
                               std::size_t dimension_index = 0);

// windows[d][i] is the i-th window of dimension d. Returns one list of
// feature vectors per dimension, order preserved.
std::vector<std::vector<FeatureVector>> extract_all(
    const std::vector<std::vector<std::vector<double>>>& windows);

// Biased sample autocorrelation c_k / c_0 with degenerate windows mapped to 0.
double sample_autocorrelation(std::span<const double> x, std::size_t lag);

// Durbin-Levinson partial autocorrelation at `lag` from sample
// autocorrelations.
double partial_autocorrelation(std::span<const double> x, std::size_t lag);

// Pincus approximate entropy with embedding m and tolerance r.
double approximate_entropy(std::span<const double> x, std::size_t m, double r);

// |X_k| for k = 0..floor(n/2) of the discrete Fourier transform.
std::vector<double> fft_magnitudes(std::span<const double> x);

nlohmann::json feature_catalogue_manifest();
// Stable hex digest of the manifest.
std::string feature_catalogue_hash();

}  // namespace dexter
