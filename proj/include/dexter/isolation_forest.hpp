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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace dexter {

// Average path length of an unsuccessful BST search over n points:
// c(n) = 2 H(n-1) - 2 (n-1) / n, with c(n) = 0 for n <= 1.
double average_path_length(std::size_t n);
double harmonic_number(std::size_t n);

struct IsolationNode {
  // -1 marks a leaf.
  int split_attribute = -1;
  double split_value = 0.0;
  int left = -1;
  int right = -1;
  // Training points that reached a leaf.
  std::size_t sample_count = 0;

  bool is_leaf() const { return split_attribute < 0; }
  friend bool operator==(const IsolationNode&, const IsolationNode&) = default;
};

// Flat tree, root at index 0. Points with x[attr] < split go left.
struct IsolationTree {
  std::vector<IsolationNode> nodes;
  std::size_t max_depth = 0;

  // Depth of the leaf reached plus c(leaf sample count).
  double path_length(std::span<const double> point) const;
  std::size_t depth() const;

  friend bool operator==(const IsolationTree&, const IsolationTree&) = default;
};

struct ForestParams {
  std::size_t trees = 100;
  // Capped at the number of training points.
  std::size_t subsample = 256;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

class IsolationForest {
 public:
  IsolationForest() = default;
  // Assembles a forest from prebuilt trees.
  IsolationForest(std::vector<IsolationTree> trees, std::size_t subsample_size,
                  std::size_t feature_count, std::uint64_t seed = 0);

  // Each row of `data` is one point. Throws DataError for empty data and
  // ConfigError when subsample > |data| or trees == 0.
  static IsolationForest fit(const std::vector<std::vector<double>>& data,
                             std::size_t trees, std::size_t subsample,
                             std::uint64_t seed);
  static IsolationForest fit(const std::vector<std::vector<double>>& data,
                             const ForestParams& params, std::uint64_t seed);

  // 2^(-E[h(x)] / c(psi)); higher means more anomalous.
  double score(std::span<const double> point) const;
  double mean_path_length(std::span<const double> point) const;

  const std::vector<IsolationTree>& trees() const { return trees_; }
  std::size_t subsample_size() const { return subsample_size_; }
  std::size_t feature_count() const { return feature_count_; }
  double normalizer() const { return normalizer_; }
  std::uint64_t seed() const { return seed_; }

  friend bool operator==(const IsolationForest&,
                         const IsolationForest&) = default;

 private:
  std::vector<IsolationTree> trees_;
  std::size_t subsample_size_ = 0;
  std::size_t feature_count_ = 0;
  double normalizer_ = 0.0;
  std::uint64_t seed_ = 0;
};

void to_json(nlohmann::json& j, const IsolationForest& forest);
void from_json(const nlohmann::json& j, IsolationForest& forest);

}  // namespace dexter
