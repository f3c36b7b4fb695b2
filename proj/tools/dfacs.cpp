// Copyright 2026 The dfacs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dfacs command-line driver.
//
//   dfacs <generate|fit|validate|control|report|run> [--config FILE] [--seed N]
//         [--scale F] [--out DIR] [--n-traj N] [--duration S]
//
// Results go to stdout as one JSON document per stage. Warnings and errors go
// to stderr as JSON lines. Exit codes: 0 ok, 2 configuration or parameter
// error, 3 I/O, 4 integration failure, 5 solver failure, 1 anything else.

#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfacs/pipeline.hpp"

namespace {

int exit_code(const dfacs::Error& e) {
  const std::string k = e.kind();
  if (k == "config_error" || k == "parameter_error") return 2;
  if (k == "io_error") return 3;
  if (k == "integration_failure") return 4;
  if (k == "solver_failure") return 5;
  return 1;
}

void report_error(const std::string& command, const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}, {"command", command}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven attitude and test-mass capture pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::string> out;
  std::optional<int> n_traj;
  std::optional<double> duration;

  using Command = std::function<dfacs::CommandResult(const dfacs::ExperimentConfig&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"generate", {"simulate the excitation dataset", dfacs::cmd_generate}},
      {"fit", {"identify the lifted models", dfacs::cmd_fit}},
      {"validate", {"score open-loop predictions on the validation split", dfacs::cmd_validate}},
      {"control", {"run the closed-loop capture scenario", dfacs::cmd_control}},
      {"report", {"collect validation and control summaries", dfacs::cmd_report}},
      {"run", {"generate, fit, validate, control and report", nullptr}},
  };
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "JSON configuration file (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--scale", scale, "multiply the number of trajectories (minimum 2)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--n-traj", n_traj, "number of trajectories")->check(CLI::PositiveNumber);
    sub->add_option("--duration", duration, "trajectory duration in seconds")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    dfacs::ExperimentConfig cfg = config_path.empty() ? dfacs::ExperimentConfig{} : dfacs::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.output_dir = *out;
    if (n_traj) cfg.dataset.n_traj = *n_traj;
    if (duration) cfg.dataset.duration = *duration;
    if (scale) cfg.dataset.n_traj = std::max(2, static_cast<int>(std::lround(*scale * cfg.dataset.n_traj)));
    if (cfg.validation.horizon > cfg.dataset.duration) {
      std::cerr << nlohmann::json{{"warning", "validation.horizon reduced to the trajectory duration"},
                                  {"command", command}}.dump() << "\n";
      cfg.validation.horizon = cfg.dataset.duration;
    }

    std::vector<std::string> stages;
    if (command == "run") stages = {"generate", "fit", "validate", "control", "report"};
    else stages = {command};
    for (const auto& stage : stages) {
      const dfacs::CommandResult r = commands.at(stage).second(cfg);
      for (const auto& w : r.warnings)
        std::cerr << nlohmann::json{{"warning", w}, {"command", stage}}.dump() << "\n";
      std::cout << r.summary.dump(2) << "\n";
    }
  } catch (const dfacs::Error& e) {
    report_error(command, e.kind(), e.what());
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    report_error(command, "config_error", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(command, "error", e.what());
    return 1;
  }
  return 0;
}
