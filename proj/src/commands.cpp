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

#include "dexter/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dexter/errors.hpp"
#include "dexter/hashing.hpp"
#include "dexter/persistence.hpp"
#include "dexter/random.hpp"
#include "dexter/ts_features.hpp"

namespace dexter {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSplitNames[] = {"train", "validation", "test",
                                       "clean_test"};

std::vector<Episode>* split_slot(Dataset& d, std::string_view name) {
  if (name == "train") return &d.train;
  if (name == "validation") return &d.validation;
  if (name == "test") return &d.test;
  if (name == "clean_test") return &d.clean_test;
  return nullptr;
}

const std::vector<Episode>& split_of(const Dataset& d, int i) {
  switch (i) {
    case 0: return d.train;
    case 1: return d.validation;
    case 2: return d.test;
    default: return d.clean_test;
  }
}

std::size_t dataset_dimension(const Dataset& d) {
  for (int s = 0; s < 4; ++s) {
    for (const Episode& ep : split_of(d, s)) {
      if (!ep.observations.empty()) return ep.observations.front().size();
    }
  }
  throw DataError("dataset contains no observations");
}

// Fixed six-decimal text so CSV cells are stable across platforms.
std::string fmt(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << *v;
  return os.str();
}

const char* kCsvHeader =
    "scenario,detector,auroc,auroc_per_episode,det_time,fraction_detected,"
    "pre_injection_alerts,fpr,num_episodes,unusable_episodes,config_hash,"
    "tool_version";

std::string csv_row(const ExperimentResult& r, std::string_view hash) {
  std::ostringstream os;
  os << r.scenario_id << ',' << r.detector_id << ',' << fmt(r.auroc) << ','
     << fmt(r.auroc_per_episode) << ',' << fmt(r.mean_detection_time) << ','
     << fmt(r.fraction_detected) << ',' << r.pre_injection_alerts << ','
     << fmt(r.fpr_measured) << ',' << r.num_episodes << ','
     << r.unusable_episodes << ',' << hash << ',' << kToolVersion;
  return os.str();
}

fs::path manifest_path(const fs::path& p) {
  return fs::is_directory(p) ? p / kManifestFile : p;
}

}  // namespace

LoadedDataset load_dataset(const fs::path& path) {
  const fs::path mpath = manifest_path(path);
  LoadedDataset out;
  out.manifest = nlohmann::json::parse(read_file(mpath));
  check_schema(out.manifest, mpath.string());

  const fs::path dpath =
      mpath.parent_path() / out.manifest.at("dataset_file").get<std::string>();
  const std::string text = read_file(dpath);
  if (content_hash(text) != out.manifest.at("dataset_hash").get<std::string>()) {
    throw IncompatibilityError(dpath.string() +
                               ": content hash differs from its manifest");
  }
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(dpath.string() + ":" + std::to_string(lineno) + ": " +
                      e.what());
    }
    if (header) {
      check_schema(j, dpath.string());
      header = false;
      continue;
    }
    const std::string split = j.at("split").get<std::string>();
    auto* slot = split_slot(out.data, split);
    if (!slot) throw DataError("unknown split '" + split + "'");
    slot->push_back(j.get<Episode>());
  }
  if (header) throw DataError(dpath.string() + ": empty dataset file");
  return out;
}

TrainedDetector load_model(const fs::path& path) {
  const fs::path p = fs::is_directory(path) ? path / kModelFile : path;
  const nlohmann::json doc = nlohmann::json::parse(read_file(p));
  check_schema(doc, p.string());
  return doc.at("model").get<TrainedDetector>();
}

fs::path cmd_generate(const RunConfig& config) {
  const std::uint64_t seed = config.seed();
  const ScenarioConfig scenario = scenario_config(config);
  const std::string hash = config_hash(config);
  const Dataset data = generate_dataset(scenario, config.counts, seed);

  std::string text =
      dump(stamped({{"record", "header"}, {"scenario", scenario_id(scenario)}},
                   hash)) +
      "\n";
  for (int s = 0; s < 4; ++s) {
    for (const Episode& ep : split_of(data, s)) {
      nlohmann::json j = ep;
      j["split"] = kSplitNames[s];
      text += dump(j);
      text += '\n';
    }
  }

  const fs::path dir = config.output_dir;
  atomic_write(dir / kDatasetFile, text);
  const nlohmann::json manifest = stamped(
      {{"dataset_file", kDatasetFile},
       {"dataset_hash", content_hash(text)},
       {"feature_catalogue_hash", feature_catalogue_hash()},
       {"scenario", scenario},
       {"scenario_id", scenario_id(scenario)},
       {"dimension", scenario.dimension()},
       {"master_seed", seed},
       {"splits",
        {{"train", data.train.size()},
         {"validation", data.validation.size()},
         {"test", data.test.size()},
         {"clean_test", data.clean_test.size()}}}},
      hash);
  atomic_write(dir / kManifestFile, dump(manifest) + "\n");
  return dir / kManifestFile;
}

fs::path cmd_train(const RunConfig& config, const fs::path& dataset) {
  const std::uint64_t seed = config.seed();
  const LoadedDataset loaded = load_dataset(dataset);
  const std::string catalogue =
      loaded.manifest.at("feature_catalogue_hash").get<std::string>();
  if (catalogue != feature_catalogue_hash()) {
    throw IncompatibilityError("dataset feature catalogue " + catalogue +
                               " differs from this build's " +
                               feature_catalogue_hash());
  }
  const std::size_t dim = dataset_dimension(loaded.data);
  if (dim != state_dimension(config.base_env)) {
    throw IncompatibilityError(
        "dataset observations are " + std::to_string(dim) +
        "-d but scenario.env '" + std::string(to_string(config.base_env)) +
        "' is " + std::to_string(state_dimension(config.base_env)) + "-d");
  }
  // Same derivation as run_experiment, so the three-command pipeline and the
  // one-shot experiment agree.
  const TrainedDetector model =
      train_detector(config.detector, loaded.data.train,
                     loaded.data.validation, mix_seed(seed, {5}));
  const nlohmann::json doc = stamped(
      {{"model", model},
       {"dimension", dim},
       {"feature_catalogue_hash", catalogue},
       {"dataset_hash", loaded.manifest.at("dataset_hash")},
       {"scenario_id", loaded.manifest.at("scenario_id")}},
      config_hash(config));
  const fs::path out = config.output_dir / kModelFile;
  atomic_write(out, dump(doc) + "\n");
  return out;
}

fs::path cmd_evaluate(const RunConfig& config, const fs::path& model_path,
                      const fs::path& dataset, bool emit_scores) {
  const fs::path mp = fs::is_directory(model_path) ? model_path / kModelFile
                                                   : model_path;
  const nlohmann::json model_doc = nlohmann::json::parse(read_file(mp));
  check_schema(model_doc, mp.string());
  const LoadedDataset loaded = load_dataset(dataset);

  const std::string model_cat =
      model_doc.at("feature_catalogue_hash").get<std::string>();
  const std::string data_cat =
      loaded.manifest.at("feature_catalogue_hash").get<std::string>();
  if (model_cat != data_cat) {
    throw IncompatibilityError("model feature catalogue " + model_cat +
                               " does not match dataset catalogue " + data_cat);
  }
  const std::size_t dim = dataset_dimension(loaded.data);
  if (model_doc.at("dimension").get<std::size_t>() != dim) {
    throw IncompatibilityError(
        "model expects " +
        std::to_string(model_doc.at("dimension").get<std::size_t>()) +
        "-d observations, dataset has " + std::to_string(dim));
  }
  const TrainedDetector model = model_doc.at("model").get<TrainedDetector>();
  const ScenarioConfig scenario =
      loaded.manifest.at("scenario").get<ScenarioConfig>();
  const ExperimentResult result = evaluate_detector(
      model, loaded.data, scenario.horizon, scenario_id(scenario));

  const std::string hash = config_hash(config);
  const fs::path dir = config.output_dir;
  atomic_write(dir / kResultsFile, std::string(kCsvHeader) + "\n" +
                                       csv_row(result, hash) + "\n");
  atomic_write(dir / kReportFile,
               dump(stamped({{"result", result},
                             {"dataset_hash", loaded.manifest.at("dataset_hash")},
                             {"model_config_hash", model_doc.at("config_hash")}},
                            hash)) +
                   "\n");

  if (emit_scores) {
    std::string text =
        dump(stamped({{"record", "header"}, {"detector", result.detector_id}},
                     hash)) +
        "\n";
    for (std::size_t e = 0; e < loaded.data.test.size(); ++e) {
      const Episode& ep = loaded.data.test[e];
      if (!ep.usable) continue;
      const auto scores = step_scores(model, ep);
      for (std::size_t t = 0; t < scores.size(); ++t) {
        if (!scores[t]) continue;
        text += dump({{"episode", e},
                      {"seed", ep.seed},
                      {"t", t},
                      {"A_t", *scores[t]},
                      {"anomalous", ep.labels[t - 1]}});
        text += '\n';
      }
    }
    atomic_write(dir / kScoresFile, text);
  }
  return dir / kResultsFile;
}

std::vector<BenchCell> cmd_bench(const RunConfig& config, bool resume,
                                 std::size_t jobs) {
  const std::uint64_t seed = config.seed();
  const std::string hash = config_hash(config);
  const fs::path cache_dir = config.output_dir / "cache";

  std::vector<double> magnitudes = config.bench_magnitudes;
  if (magnitudes.empty()) magnitudes.push_back(config.magnitude);

  // One group per scenario: the dataset is generated once and shared by the
  // detectors of that group.
  struct Group {
    ScenarioConfig scenario;
    std::vector<std::size_t> cells;
  };
  std::vector<Group> groups;
  std::vector<BenchCell> cells;
  std::vector<DetectorSpec> specs;
  for (double magnitude : magnitudes) {
    for (Correlation corr : config.bench_correlations) {
      Group g{scenario_config(config, corr, magnitude), {}};
      const nlohmann::json scenario_doc = g.scenario;
      for (DetectorKind kind : config.bench_detectors) {
        DetectorSpec spec = config.detector;
        spec.kind = kind;
        BenchCell cell;
        cell.scenario_id = scenario_id(g.scenario);
        cell.detector_id = std::string(to_string(kind));
        const nlohmann::json key_doc{
            {"scenario", scenario_doc},
            {"detector", spec},
            {"counts",
             {config.counts.train, config.counts.validation,
              config.counts.test, config.counts.clean_test}},
            {"seed", seed},
            {"tool_version", kToolVersion},
            {"schema_version", kSchemaVersion}};
        cell.key = content_hash(dump(key_doc));
        g.cells.push_back(cells.size());
        cells.push_back(std::move(cell));
        specs.push_back(spec);
      }
      groups.push_back(std::move(g));
    }
  }

  auto run_group = [&](const Group& g) {
    std::optional<Dataset> data;
    for (std::size_t idx : g.cells) {
      BenchCell& cell = cells[idx];
      const fs::path cached = cache_dir / (cell.key + ".json");
      if (resume && fs::exists(cached)) {
        try {
          const nlohmann::json doc = nlohmann::json::parse(read_file(cached));
          check_schema(doc, cached.string());
          if (doc.at("key").get<std::string>() == cell.key) {
            cell.result = doc.at("result").get<ExperimentResult>();
            cell.cached = true;
            continue;
          }
        } catch (const std::exception&) {
          // Unreadable cache entries are recomputed.
        }
      }
      try {
        if (!data) data = generate_dataset(g.scenario, config.counts, seed);
        const TrainedDetector det = train_detector(
            specs[idx], data->train, data->validation, mix_seed(seed, {5}));
        cell.result = evaluate_detector(det, *data, g.scenario.horizon,
                                        cell.scenario_id);
        atomic_write(cached, dump(stamped({{"key", cell.key},
                                           {"result", *cell.result}},
                                          hash)) +
                                 "\n");
      } catch (const std::exception& e) {
        cell.result.reset();
        cell.error = e.what();
      }
    }
  };

  std::filesystem::create_directories(cache_dir);
  jobs = std::max<std::size_t>(1, std::min(jobs, groups.size()));
  if (jobs == 1) {
    for (const Group& g : groups) run_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < groups.size(); i = next++) {
          run_group(groups[i]);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  // Outputs are assembled in matrix order, so they do not depend on jobs.
  std::string csv = std::string(kCsvHeader) + ",error\n";
  nlohmann::json report_cells = nlohmann::json::array();
  for (const BenchCell& c : cells) {
    if (c.result) {
      csv += csv_row(*c.result, hash) + ",\n";
    } else {
      std::string err = c.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      csv += c.scenario_id + ',' + c.detector_id + ",,,,,,,,," + hash + ',' +
             std::string(kToolVersion) + ',' + err + "\n";
    }
    nlohmann::json jc{{"scenario", c.scenario_id},
                      {"detector", c.detector_id},
                      {"key", c.key}};
    if (c.result) {
      jc["result"] = *c.result;
    } else {
      jc["error"] = c.error;
    }
    report_cells.push_back(std::move(jc));
  }

  // Two stacked blocks: AUROC, then detection time (score-only detectors
  // have none).
  std::vector<std::string> columns;
  for (const BenchCell& c : cells) {
    if (std::find(columns.begin(), columns.end(), c.scenario_id) == columns.end()) {
      columns.push_back(c.scenario_id);
    }
  }
  auto find = [&](const std::string& det, const std::string& col) -> const BenchCell* {
    for (const BenchCell& c : cells) {
      if (c.detector_id == det && c.scenario_id == col) return &c;
    }
    return nullptr;
  };
  std::ostringstream md;
  auto block = [&](const char* title, auto value) {
    md << "### " << title << "\n\n| detector |";
    for (const auto& col : columns) md << ' ' << col << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << '\n';
    for (DetectorKind kind : config.bench_detectors) {
      const std::string det(to_string(kind));
      md << "| " << det << " |";
      for (const auto& col : columns) {
        const BenchCell* c = find(det, col);
        if (!c || !c->result) {
          md << " error |";
        } else {
          const auto v = value(*c->result);
          md << ' ' << (v ? fmt(v).substr(0, fmt(v).find('.') + 3) : "-") << " |";
        }
      }
      md << '\n';
    }
    md << '\n';
  };
  block("AUROC", [](const ExperimentResult& r) { return std::optional<double>(r.auroc); });
  block("Detection time",
        [](const ExperimentResult& r) { return r.mean_detection_time; });
  md << "config_hash " << hash << ", tool_version " << kToolVersion << '\n';

  atomic_write(config.output_dir / kBenchCsv, csv);
  atomic_write(config.output_dir / kBenchTable, md.str());
  atomic_write(config.output_dir / kBenchReport,
               dump(stamped({{"cells", report_cells}}, hash)) + "\n");
  return cells;
}

}  // namespace dexter
