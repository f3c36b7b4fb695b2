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

// End-to-end tests for include/dfacs/pipeline.hpp on a small dataset.

#include "dfacs/pipeline.hpp"

#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

namespace dfacs {
namespace {

namespace fs = std::filesystem;

ExperimentConfig SmallConfig(const fs::path& out) {
  ExperimentConfig c;
  c.output_dir = out.string();
  c.dataset.n_traj = 12;
  c.dataset.duration = 10.0;
  c.validation.horizon = 10.0;
  c.closed_loop.duration = 3.0;
  return c;
}

int CountLines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("dfacs_pipeline_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    cfg_ = new ExperimentConfig(SmallConfig(root_ / "a"));
    for (auto* cmd : {cmd_generate, cmd_fit, cmd_validate, cmd_control, cmd_report}) results_.push_back(cmd(*cfg_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(root_);
    delete cfg_;
    results_.clear();
  }

  static fs::path root_;
  static ExperimentConfig* cfg_;
  static std::vector<CommandResult> results_;
};

fs::path PipelineTest::root_;
ExperimentConfig* PipelineTest::cfg_ = nullptr;
std::vector<CommandResult> PipelineTest::results_;

TEST_F(PipelineTest, ArtifactsCarryConfigEcho) {
  for (const fs::path& dir : {cfg_->dataset_dir(), cfg_->out() / "models", cfg_->validation_dir(), cfg_->control_dir(),
                             cfg_->report_dir()}) {
    const auto run = read_json(dir / "run.json");
    EXPECT_EQ(run["seed"], 42u) << dir;
    EXPECT_EQ(run["config"], cfg_->to_json()) << dir;
  }
  const LiftedModel m = load_model(cfg_->model_path("test_mass"));
  EXPECT_EQ(m.metadata["seed"], 42u);
  EXPECT_EQ(m.metadata["config"], cfg_->to_json());
  EXPECT_EQ(read_dataset(cfg_->dataset_dir()).config_echo, cfg_->to_json());
}

TEST_F(PipelineTest, FitDiagnosticsAreNeverSilent) {
  for (const auto& name : cfg_->dictionaries) {
    const LiftedModel m = load_model(cfg_->model_path(name));
    const auto ls = m.diagnostics["residual_norm_least_squares"].get<std::vector<double>>();
    const auto fit = m.diagnostics["residual_norm"].get<std::vector<double>>();
    ASSERT_EQ(ls.size(), fit.size());
    for (std::size_t k = 0; k < fit.size(); ++k) {
      EXPECT_TRUE(std::isfinite(fit[k]));
      EXPECT_LE(ls[k], fit[k] * (1.0 + 1e-9) + 1e-300) << name << " column " << k;
    }
  }
  // the small dataset leaves coefficient columns empty; the fit must say so
  const auto& w = results_[1].warnings;
  EXPECT_TRUE(std::any_of(w.begin(), w.end(), [](const std::string& s) { return s.find("empty support") != s.npos; }));
}

TEST_F(PipelineTest, ValidationSeries) {
  const int steps = 100;
  const int n_valid = cfg_->dataset.n_traj - cfg_->dataset.n_train();
  const std::string csv = read_file(cfg_->validation_dir() / "errors_test_mass.csv");
  EXPECT_EQ(CountLines(csv), 1 + n_valid * (steps + 1));
  // every trajectory starts from its exact lift
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("trajectory,time,r_MO1,", 0), 0u);
  for (int t = 0; t < n_valid; ++t) {
    std::getline(in, line);
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    EXPECT_EQ(std::stod(cell), 0.0);
    while (std::getline(row, cell, ',')) EXPECT_EQ(std::stod(cell), 0.0);
    for (int k = 0; k < steps; ++k) std::getline(in, line);
  }
  const auto summary = read_json(cfg_->validation_dir() / "summary.json");
  EXPECT_EQ(summary["trajectories"], n_valid);
  EXPECT_EQ(summary["blocks"].size(), 12u);
}

TEST_F(PipelineTest, ControlLogAndBounds) {
  const std::string csv = read_file(cfg_->control_dir() / "closed_loop.csv");
  EXPECT_EQ(CountLines(csv), 1 + 30);
  const auto s = read_json(cfg_->control_dir() / "summary.json");
  EXPECT_EQ(s["bound_violations"], 0);
  for (const char* ch : {"F_E1_x", "F_E1_y", "F_E1_z", "F_E2_x", "F_E2_y", "F_E2_z"})
    EXPECT_LE(s["max_abs_input"][ch].get<double>(), 1e-6 * (1 + 1e-12)) << ch;
  EXPECT_TRUE(fs::exists(cfg_->report_dir() / "report.md"));
}

TEST_F(PipelineTest, ZeroStartGivesZeroLog) {
  ExperimentConfig c = *cfg_;
  c.closed_loop.initial_state = PlantState{};
  const ControlRun run = run_control(c, load_models_for(c));
  for (std::size_t k = 0; k < run.log.times.size(); ++k) {
    EXPECT_EQ(run.log.states[k], StateVector::Zero());
    EXPECT_EQ(run.log.inputs[k], InputVector::Zero());
  }
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
  ExperimentConfig c = SmallConfig(root_ / "b");
  for (auto* cmd : {cmd_generate, cmd_fit, cmd_validate, cmd_control}) cmd(c);
  for (const char* f : {"validation/errors_attitude.csv", "validation/errors_test_mass.csv", "validation/summary.csv",
                        "control/closed_loop.csv"})
    EXPECT_EQ(read_file(cfg_->out() / f), read_file(c.out() / f)) << f;
  for (const auto& name : c.dictionaries) {
    const LiftedModel a = load_model(cfg_->model_path(name));
    const LiftedModel b = load_model(c.model_path(name));
    EXPECT_EQ(a.a_d, b.a_d) << name;
    EXPECT_EQ(a.b_d, b.b_d) << name;
  }
}

TEST_F(PipelineTest, ReportRerunsFromArtifacts) {
  const std::string before = read_file(cfg_->report_dir() / "report.md");
  cmd_report(*cfg_);
  EXPECT_EQ(read_file(cfg_->report_dir() / "report.md"), before);
}

TEST(PipelineErrors, MissingArtifacts) {
  const fs::path dir = fs::temp_directory_path() / ("dfacs_pipeline_missing_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const ExperimentConfig c = SmallConfig(dir);
  EXPECT_THROW(cmd_fit(c), IoError);
  EXPECT_THROW(cmd_control(c), IoError);
  const CommandResult r = cmd_report(c);
  EXPECT_EQ(r.warnings.size(), 2u);
  fs::remove_all(dir);
}

TEST(PipelineErrors, DatasetMustMatchConfig) {
  const fs::path dir = fs::temp_directory_path() / ("dfacs_pipeline_dt_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  ExperimentConfig c = SmallConfig(dir);
  c.dataset.n_traj = 4;
  c.dataset.duration = 1.0;
  c.validation.horizon = 1.0;
  cmd_generate(c);
  c.dataset.dt = 0.05;
  c.closed_loop.dt = 0.05;
  EXPECT_THROW(cmd_fit(c), ConfigError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace dfacs
