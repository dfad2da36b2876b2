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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "dexter/commands.hpp"
#include "dexter/config.hpp"
#include "dexter/errors.hpp"
#include "dexter/hashing.hpp"
#include "dexter/persistence.hpp"

using namespace dexter;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(
[scenario]
type = ARTS
env = constant
correlation = one_step

[detector]
kind = dexter_c
trees = 20

[evaluation]
train_episodes = 20
validation_episodes = 10
test_episodes = 10
clean_test_episodes = 20
master_seed = 17
)";

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("dexter_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RunConfig small(const fs::path& out, const std::string& extra = "") {
  RunConfig c = parse_config(std::string(kSmallConfig) + extra);
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) { return read_file(p); }

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DEXTER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = parse_config("[evaluation]\nmaster_seed = 3\n");
  EXPECT_EQ(c.seed(), 3u);
  EXPECT_EQ(c.scenario, Scenario::kARTS);
  EXPECT_EQ(c.detector.window, 10u);
  EXPECT_EQ(c.detector.forest.trees, 100u);
  EXPECT_EQ(c.detector.forest.subsample, 256u);
  EXPECT_EQ(c.detector.target_fpr, 0.01);
  EXPECT_EQ(c.counts.train, 100u);
  EXPECT_EQ(c.counts.validation, 100u);
  EXPECT_EQ(c.counts.test, 50u);
  EXPECT_EQ(c.counts.clean_test, 200u);
  EXPECT_EQ(c.bench_detectors.size(), 5u);
  EXPECT_EQ(c.bench_correlations.size(), 2u);

  const RunConfig d = parse_config(
      "[scenario]\ntype = ARNO\nenv = cartpole\npolicy = heuristic\n"
      "magnitude = 0.5\ndimension_scale = 1, 2, 3, 4\n"
      "[detector]\nkind = pedm_c_lite\ncalibration = clamped\n"
      "[evaluation]\nmaster_seed = 1\nbench_detectors = dexter, meanshift_cusum\n");
  EXPECT_EQ(d.scenario, Scenario::kARNO);
  EXPECT_EQ(d.dimension_scale, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(d.detector.kind, DetectorKind::kPedmCusum);
  EXPECT_EQ(d.detector.recursion, CalibrationRecursion::kClamped);
  EXPECT_EQ(d.bench_detectors.size(), 2u);
  const ScenarioConfig s = scenario_config(d);
  EXPECT_EQ(s.per_dimension_scale, d.dimension_scale);
  EXPECT_EQ(s.noise_post.magnitude_scale, 0.5);
}

TEST(Config, RejectsUnknownAndMalformed) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_NE(message("[scenario]\nbogus = 1\n").find("scenario.bogus"), std::string::npos);
  EXPECT_NE(message("[extra]\nx = 1\n").find("extra"), std::string::npos);
  EXPECT_NE(message("[detector]\nwindow = ten\n").find("detector.window"),
            std::string::npos);
  EXPECT_NE(message("[scenario]\ntype = ARXX\n").find("scenario.type"), std::string::npos);
  EXPECT_NE(message("[evaluation]\ntarget_fpr = 1.5\n").find("target_fpr"),
            std::string::npos);
  EXPECT_THROW(parse_config("[evaluation]\n").seed(), ConfigError);
}

TEST(Config, InjectionWindowErrorNamesField) {
  const RunConfig c = parse_config("[scenario]\ninjection_high = 196\n"
                                   "[evaluation]\nmaster_seed = 1\n");
  try {
    scenario_config(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("injection_high"), std::string::npos);
  }
}

TEST(Config, HashIgnoresOutputDir) {
  RunConfig a = parse_config(kSmallConfig);
  RunConfig b = a;
  b.output_dir = "/elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.master_seed = 18;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Persistence, AtomicWriteAndStamp) {
  TempDir dir("persist");
  const fs::path p = dir.path() / "sub" / "x.json";
  atomic_write(p, "hello");
  atomic_write(p, "world");
  EXPECT_EQ(slurp(p), "world");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);

  const nlohmann::json j = stamped({{"a", 1}}, "abc");
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  EXPECT_EQ(j["tool_version"], std::string(kToolVersion));
  EXPECT_EQ(j["config_hash"], "abc");
  EXPECT_NO_THROW(check_schema(j, "x"));
  nlohmann::json old = j;
  old["schema_version"] = 0;
  EXPECT_THROW(check_schema(old, "x"), IncompatibilityError);
}

TEST(Commands, GenerateIsByteDeterministic) {
  TempDir a("gen_a"), b("gen_b");
  const fs::path ma = cmd_generate(small(a.path()));
  const fs::path mb = cmd_generate(small(b.path()));
  EXPECT_EQ(slurp(a.path() / kDatasetFile), slurp(b.path() / kDatasetFile));
  EXPECT_EQ(slurp(ma), slurp(mb));
  const nlohmann::json manifest = nlohmann::json::parse(slurp(ma));
  EXPECT_EQ(manifest["config_hash"], config_hash(small(a.path())));
  EXPECT_EQ(manifest["tool_version"], std::string(kToolVersion));
  EXPECT_EQ(manifest["splits"]["train"], 20);

  const LoadedDataset d = load_dataset(a.path());
  EXPECT_EQ(d.data.train.size(), 20u);
  EXPECT_EQ(d.data.validation.size(), 10u);
  EXPECT_EQ(d.data.test.size(), 10u);
  EXPECT_EQ(d.data.clean_test.size(), 20u);

  // Tampering with the episode file is noticed.
  std::string text = slurp(a.path() / kDatasetFile);
  text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
  write(a.path() / kDatasetFile, text);
  EXPECT_THROW(load_dataset(a.path()), IncompatibilityError);
}

TEST(Commands, PipelineMatchesOneShotExperiment) {
  TempDir dir("pipeline");
  const RunConfig c = small(dir.path());
  cmd_generate(c);
  cmd_train(c, dir.path());
  const fs::path csv = cmd_evaluate(c, dir.path(), dir.path(), true);

  std::istringstream in(slurp(csv));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  for (const char* col : {"auroc", "det_time", "fpr", "config_hash", "tool_version"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }

  const ExperimentResult direct =
      run_experiment(scenario_config(c), c.detector, c.counts, c.seed());
  const nlohmann::json report = nlohmann::json::parse(slurp(dir.path() / kReportFile));
  EXPECT_EQ(report["result"].dump(), nlohmann::json(direct).dump());
  EXPECT_EQ(report["config_hash"], config_hash(c));

  // One score line per defined step of every test episode, after a header.
  std::istringstream scores(slurp(dir.path() / kScoresFile));
  std::string line;
  std::getline(scores, line);
  EXPECT_EQ(nlohmann::json::parse(line)["record"], "header");
  std::size_t lines = 0;
  while (std::getline(scores, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_GE(j["t"].get<std::size_t>(), 9u);
    EXPECT_GT(j["A_t"].get<double>(), 0.0);
    ++lines;
  }
  EXPECT_EQ(lines, 10u * 191u);
}

TEST(Commands, ModelShapeAndRoundTrip) {
  TempDir dir("model");
  RunConfig cart = parse_config(
      "[scenario]\ntype = ARNO\nenv = cartpole\npolicy = heuristic\nmagnitude = 0.5\n"
      "scale_episodes = 10\n"
      "[detector]\nkind = dexter_c\ntrees = 10\n"
      "[evaluation]\ntrain_episodes = 100\nvalidation_episodes = 10\ntest_episodes = 2\n"
      "clean_test_episodes = 2\nmaster_seed = 5\n");
  cart.output_dir = dir.path();
  cmd_generate(cart);
  const fs::path model_path = cmd_train(cart, dir.path());
  const nlohmann::json doc = nlohmann::json::parse(slurp(model_path));
  EXPECT_EQ(doc["model"]["dexter"]["forests"].size(), 4u);
  EXPECT_EQ(doc["model"]["dexter"]["window_size"], 10);
  EXPECT_TRUE(doc["model"]["cusum"].contains("mean_score"));
  EXPECT_TRUE(doc["model"]["cusum"].contains("threshold"));

  const TrainedDetector m = load_model(model_path);
  EXPECT_EQ(nlohmann::json(m).dump(), doc["model"].dump());
}

TEST(Commands, ShortEpisodesAreReported) {
  TempDir dir("short");
  RunConfig c = small(dir.path());
  cmd_generate(c);
  c.detector.window = 250;
  try {
    cmd_train(c, dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(Commands, CatalogueMismatchIsRefused) {
  TempDir dir("catalogue");
  const RunConfig c = small(dir.path());
  cmd_generate(c);
  cmd_train(c, dir.path());
  nlohmann::json doc = nlohmann::json::parse(slurp(dir.path() / kModelFile));
  doc["feature_catalogue_hash"] = "ffffffffffffffff";
  write(dir.path() / kModelFile, doc.dump());
  EXPECT_THROW(cmd_evaluate(c, dir.path(), dir.path(), false), IncompatibilityError);
}

TEST(Commands, DimensionMismatchIsRefused) {
  TempDir dir("dims");
  const RunConfig c = small(dir.path());
  cmd_generate(c);
  RunConfig cart = c;
  cart.scenario = Scenario::kARNO;
  cart.base_env = BaseEnv::kCartpole;
  EXPECT_THROW(cmd_train(cart, dir.path()), IncompatibilityError);
}

TEST(Commands, EndToEndDoubleRunIsByteIdentical) {
  TempDir a("e2e_a"), b("e2e_b");
  for (const TempDir* d : {&a, &b}) {
    const RunConfig c = small(d->path());
    cmd_generate(c);
    cmd_train(c, d->path());
    cmd_evaluate(c, d->path(), d->path(), true);
  }
  for (const char* f : {kDatasetFile, kManifestFile, kModelFile, kResultsFile,
                        kReportFile, kScoresFile}) {
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
}

TEST(Commands, BenchMatrixResumeAndJobs) {
  TempDir a("bench_a"), b("bench_b");
  const RunConfig ca = small(a.path());
  const auto cells = cmd_bench(ca, false, 1);
  ASSERT_EQ(cells.size(), 10u);
  for (const auto& c : cells) {
    EXPECT_TRUE(c.result.has_value()) << c.error;
    EXPECT_FALSE(c.cached);
  }
  const std::string table = slurp(a.path() / kBenchTable);
  const std::string csv = slurp(a.path() / kBenchCsv);

  const auto again = cmd_bench(ca, true, 1);
  for (const auto& c : again) EXPECT_TRUE(c.cached);
  EXPECT_EQ(slurp(a.path() / kBenchTable), table);
  EXPECT_EQ(slurp(a.path() / kBenchCsv), csv);

  // Removing one cache entry recomputes only that cell.
  fs::remove(a.path() / "cache" / (cells[3].key + ".json"));
  const auto partial = cmd_bench(ca, true, 1);
  for (std::size_t i = 0; i < partial.size(); ++i) EXPECT_EQ(partial[i].cached, i != 3);
  EXPECT_EQ(slurp(a.path() / kBenchCsv), csv);

  cmd_bench(small(b.path()), false, 2);
  EXPECT_EQ(slurp(b.path() / kBenchCsv), csv);
  EXPECT_EQ(slurp(b.path() / kBenchTable), table);
}

TEST(Commands, BenchRecordsFailedCells) {
  TempDir dir("bench_fail");
  // A window longer than every episode leaves nothing to train on.
  RunConfig c = small(dir.path());
  c.detector.window = 250;
  c.bench_detectors = {DetectorKind::kPedm, DetectorKind::kMeanShift};
  c.bench_correlations = {Correlation::kOneStep};
  const auto cells = cmd_bench(c, false, 1);
  ASSERT_EQ(cells.size(), 2u);
  for (const auto& cell : cells) {
    EXPECT_FALSE(cell.result.has_value());
    EXPECT_FALSE(cell.error.empty());
  }
  const std::string csv = slurp(dir.path() / kBenchCsv);
  EXPECT_NE(csv.find("pedm_lite"), std::string::npos);
  EXPECT_NE(csv.find("error"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const fs::path ok = dir.path() / "ok.ini";
  write(ok, std::string(kSmallConfig) + "[output]\ndir = " + (dir.path() / "run").string() + "\n");
  const fs::path bad = dir.path() / "bad.ini";
  write(bad, "[scenario]\nnope = 1\n");
  const fs::path window = dir.path() / "window.ini";
  write(window, "[scenario]\ninjection_low = 2\n[evaluation]\nmaster_seed = 1\n");

  EXPECT_EQ(run_cli("generate --config " + ok.string()), 0);
  EXPECT_EQ(run_cli("train --config " + ok.string() + " --dataset " +
                    (dir.path() / "run").string()),
            0);
  EXPECT_EQ(run_cli("evaluate --config " + ok.string() + " --dataset " +
                    (dir.path() / "run").string() + " --model " +
                    (dir.path() / "run").string()),
            0);
  EXPECT_EQ(run_cli("generate --config " + bad.string()), 1);
  EXPECT_EQ(run_cli("generate --config " + window.string()), 1);
  EXPECT_EQ(run_cli("generate"), 1);
  EXPECT_EQ(run_cli("train --config " + ok.string() + " --dataset " +
                    (dir.path() / "missing").string()),
            2);

  // --seed-override and --out take precedence over the file.
  const fs::path other = dir.path() / "other";
  EXPECT_EQ(run_cli("generate --config " + ok.string() + " --seed-override 99 --out " +
                    other.string()),
            0);
  const auto manifest = nlohmann::json::parse(slurp(other / kManifestFile));
  EXPECT_EQ(manifest["master_seed"], 99);
}
