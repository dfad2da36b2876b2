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

#include "dexter/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dexter/errors.hpp"
#include "dexter/random.hpp"

namespace dexter {
namespace {

std::size_t depth_limit(std::size_t subsample) {
  return subsample <= 1
             ? 0
             : static_cast<std::size_t>(
                   std::ceil(std::log2(static_cast<double>(subsample))));
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& data,
              std::size_t feature_count, std::size_t max_depth, Rng& rng)
      : data_(data), feature_count_(feature_count), max_depth_(max_depth),
        rng_(rng) {}

  IsolationTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    tree_.max_depth = max_depth_;
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::span<std::size_t> rows, std::size_t depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[index].sample_count = rows.size();
    if (depth >= max_depth_ || rows.size() <= 1) return index;

    // Attributes with zero range cannot be split.
    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges(feature_count_);
    for (std::size_t a = 0; a < feature_count_; ++a) {
      double lo = data_[rows[0]][a];
      double hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, data_[r][a]);
        hi = std::max(hi, data_[r][a]);
      }
      ranges[a] = {lo, hi};
      if (hi > lo) candidates.push_back(a);
    }
    if (candidates.empty()) return index;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t attr = candidates[pick(rng_)];
    const auto [lo, hi] = ranges[attr];
    std::uniform_real_distribution<double> uniform(lo, hi);
    double split = uniform(rng_);
    while (!(split > lo && split < hi)) split = uniform(rng_);

    auto mid = std::partition(rows.begin(), rows.end(), [&](std::size_t r) {
      return data_[r][attr] < split;
    });
    const std::size_t n_left = static_cast<std::size_t>(mid - rows.begin());

    tree_.nodes[index].split_attribute = static_cast<int>(attr);
    tree_.nodes[index].split_value = split;
    tree_.nodes[index].sample_count = 0;
    const int left = grow(rows.first(n_left), depth + 1);
    const int right = grow(rows.subspan(n_left), depth + 1);
    tree_.nodes[index].left = left;
    tree_.nodes[index].right = right;
    return index;
  }

  const std::vector<std::vector<double>>& data_;
  std::size_t feature_count_;
  std::size_t max_depth_;
  Rng& rng_;
  IsolationTree tree_;
};

}  // namespace

double harmonic_number(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = n; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  const double nd = static_cast<double>(n);
  return 2.0 * harmonic_number(n - 1) - 2.0 * (nd - 1.0) / nd;
}

double IsolationTree::path_length(std::span<const double> point) const {
  std::size_t node = 0;
  double depth = 0.0;
  while (!nodes[node].is_leaf()) {
    const IsolationNode& n = nodes[node];
    node = static_cast<std::size_t>(
        point[static_cast<std::size_t>(n.split_attribute)] < n.split_value
            ? n.left
            : n.right);
    depth += 1.0;
  }
  return depth + average_path_length(nodes[node].sample_count);
}

std::size_t IsolationTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

IsolationForest::IsolationForest(std::vector<IsolationTree> trees,
                                 std::size_t subsample_size,
                                 std::size_t feature_count, std::uint64_t seed)
    : trees_(std::move(trees)),
      subsample_size_(subsample_size),
      feature_count_(feature_count),
      normalizer_(average_path_length(subsample_size)),
      seed_(seed) {}

IsolationForest IsolationForest::fit(
    const std::vector<std::vector<double>>& data, const ForestParams& params,
    std::uint64_t seed) {
  return fit(data, params.trees, std::min(params.subsample, data.size()), seed);
}

IsolationForest IsolationForest::fit(
    const std::vector<std::vector<double>>& data, std::size_t trees,
    std::size_t subsample, std::uint64_t seed) {
  if (data.empty()) throw DataError("isolation forest needs training data");
  if (trees == 0) throw ConfigError("isolation forest needs >= 1 tree");
  if (subsample == 0 || subsample > data.size()) {
    throw ConfigError("subsample size must be in [1, number of points]");
  }
  const std::size_t feature_count = data[0].size();
  for (const auto& row : data) {
    if (row.size() != feature_count) {
      throw DataError("training points have inconsistent dimension");
    }
  }

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<IsolationTree> built;
  built.reserve(trees);
  const std::size_t max_depth = depth_limit(subsample);
  for (std::size_t t = 0; t < trees; ++t) {
    Rng rng(mix_seed(seed, t));
    std::vector<std::size_t> rows;
    rows.reserve(subsample);
    std::sample(all.begin(), all.end(), std::back_inserter(rows), subsample,
                rng);
    TreeBuilder builder(data, feature_count, max_depth, rng);
    built.push_back(builder.build(std::move(rows)));
  }
  return IsolationForest(std::move(built), subsample, feature_count, seed);
}

double IsolationForest::mean_path_length(std::span<const double> point) const {
  if (point.size() != feature_count_) {
    throw IncompatibilityError("query has " + std::to_string(point.size()) +
                               " features, forest expects " +
                               std::to_string(feature_count_));
  }
  double total = 0.0;
  for (const IsolationTree& tree : trees_) total += tree.path_length(point);
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> point) const {
  const double h = mean_path_length(point);
  if (normalizer_ <= 0.0) return 0.5;
  return std::exp2(-h / normalizer_);
}

void to_json(nlohmann::json& j, const IsolationForest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const IsolationTree& tree : forest.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const IsolationNode& n : tree.nodes) {
      nodes.push_back({n.split_attribute, n.split_value, n.left, n.right,
                       n.sample_count});
    }
    trees.push_back({{"max_depth", tree.max_depth}, {"nodes", nodes}});
  }
  j = nlohmann::json{{"subsample_size", forest.subsample_size()},
                     {"feature_count", forest.feature_count()},
                     {"normalizer_c", forest.normalizer()},
                     {"seed", forest.seed()},
                     {"trees", trees}};
}

void from_json(const nlohmann::json& j, IsolationForest& forest) {
  std::vector<IsolationTree> trees;
  const std::size_t feature_count = j.at("feature_count").get<std::size_t>();
  for (const auto& jt : j.at("trees")) {
    IsolationTree tree;
    tree.max_depth = jt.at("max_depth").get<std::size_t>();
    for (const auto& jn : jt.at("nodes")) {
      IsolationNode n;
      n.split_attribute = jn.at(0).get<int>();
      n.split_value = jn.at(1).get<double>();
      n.left = jn.at(2).get<int>();
      n.right = jn.at(3).get<int>();
      n.sample_count = jn.at(4).get<std::size_t>();
      if (!n.is_leaf() &&
          (n.split_attribute >= static_cast<int>(feature_count) || n.left < 0 ||
           n.right < 0)) {
        throw ValidationError("malformed isolation tree node");
      }
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) throw ValidationError("empty isolation tree");
    trees.push_back(std::move(tree));
  }
  forest = IsolationForest(std::move(trees),
                           j.at("subsample_size").get<std::size_t>(),
                           feature_count, j.at("seed").get<std::uint64_t>());
}

}  // namespace dexter
