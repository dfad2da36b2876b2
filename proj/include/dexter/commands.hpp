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
#include <filesystem>
#include <optional>
#include <vector>

#include "dexter/config.hpp"
#include "dexter/evaluation.hpp"

namespace dexter {

inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kManifestFile = "dataset.manifest.json";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kScoresFile = "scores.jsonl";
inline constexpr const char* kBenchCsv = "bench.csv";
inline constexpr const char* kBenchTable = "bench.md";
inline constexpr const char* kBenchReport = "bench.json";

struct LoadedDataset {
  nlohmann::json manifest;
  Dataset data;
};

// `path` is the dataset directory or its manifest file.
LoadedDataset load_dataset(const std::filesystem::path& path);
TrainedDetector load_model(const std::filesystem::path& path);

// Each returns the path of its main artifact.
std::filesystem::path cmd_generate(const RunConfig& config);
std::filesystem::path cmd_train(const RunConfig& config,
                                const std::filesystem::path& dataset);
std::filesystem::path cmd_evaluate(const RunConfig& config,
                                   const std::filesystem::path& model,
                                   const std::filesystem::path& dataset,
                                   bool emit_scores);

struct BenchCell {
  std::string scenario_id;
  std::string detector_id;
  std::string key;  // content hash of everything the cell depends on
  std::optional<ExperimentResult> result;
  std::string error;
  bool cached = false;
};

std::vector<BenchCell> cmd_bench(const RunConfig& config, bool resume,
                                 std::size_t jobs);

}  // namespace dexter
