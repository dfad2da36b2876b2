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

// Batch entry point: generate | train | evaluate | bench.
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dexter/commands.hpp"
#include "dexter/config.hpp"
#include "dexter/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  std::string dataset;
  std::string model;
  bool emit_scores = false;
  bool resume = false;
  std::size_t jobs = 1;
};

dexter::RunConfig resolve(const Options& o) {
  dexter::RunConfig c = dexter::load_config(o.config);
  if (o.seed_override) c.master_seed = *o.seed_override;
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dexter: feature-based OOD detection for RL environments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "INI run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory (overrides output.dir)");
    cmd->add_option("--seed-override", o.seed_override,
                    "replace evaluation.master_seed");
  };

  auto* gen = app.add_subcommand("generate", "write a dataset + manifest");
  common(gen);

  auto* train = app.add_subcommand("train", "fit and calibrate a detector");
  common(train);
  train->add_option("--dataset", o.dataset, "dataset dir or manifest")->required();

  auto* eval = app.add_subcommand("evaluate", "score a dataset with a model");
  common(eval);
  eval->add_option("--dataset", o.dataset, "dataset dir or manifest")->required();
  eval->add_option("--model", o.model, "model dir or model.json")->required();
  eval->add_flag("--emit-scores", o.emit_scores, "dump per-step scores");

  auto* bench = app.add_subcommand("bench", "run the detector x noise matrix");
  common(bench);
  bench->add_flag("--resume", o.resume, "reuse cached cells");
  bench->add_option("--jobs", o.jobs, "parallel scenario groups")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    const dexter::RunConfig config = resolve(o);
    if (*gen) {
      std::cout << dexter::cmd_generate(config).string() << '\n';
    } else if (*train) {
      std::cout << dexter::cmd_train(config, o.dataset).string() << '\n';
    } else if (*eval) {
      std::cout << dexter::cmd_evaluate(config, o.model, o.dataset, o.emit_scores)
                       .string()
                << '\n';
    } else if (*bench) {
      const auto cells = dexter::cmd_bench(config, o.resume, o.jobs);
      std::size_t failed = 0;
      for (const auto& c : cells) {
        if (!c.result) {
          ++failed;
          std::cerr << "cell " << c.scenario_id << " x " << c.detector_id
                    << " failed: " << c.error << '\n';
        }
      }
      std::cout << (config.output_dir / dexter::kBenchTable).string() << '\n';
      if (failed > 0) return kExitRuntime;
    }
  } catch (const dexter::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
