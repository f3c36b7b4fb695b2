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

#ifndef DFACS_PIPELINE_HPP_
#define DFACS_PIPELINE_HPP_

// The generate -> fit -> validate -> control -> report commands. Each stage
// reads the previous stage's artifacts from the configured output directory
// and writes its own next to a run.json holding the resolved configuration.
//
//   <out>/dataset/                manifest.json + traj_NNNN.bin
//   <out>/models/<dict>.json      fitted lifted models
//   <out>/validation/             errors_<dict>.csv, summary.csv, summary.json
//   <out>/control/                closed_loop.csv, summary.json
//   <out>/report/                 report.json, report.md

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "dfacs/config.hpp"
#include "dfacs/dataset.hpp"
#include "dfacs/dictionary.hpp"
#include "dfacs/io.hpp"
#include "dfacs/mpc.hpp"
#include "dfacs/sindy.hpp"

namespace dfacs {

struct CommandResult {
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> warnings;
};

namespace detail {

inline void write_run_record(const std::filesystem::path& dir, const std::string& command,
                             const ExperimentConfig& cfg) {
  write_json(dir / "run.json", {{"command", command}, {"seed", cfg.seed}, {"config", cfg.to_json()}});
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void csv_row(std::string& out, std::initializer_list<std::string> head, const double* data, Eigen::Index n) {
  bool first = true;
  for (const auto& h : head) {
    if (!first) out += ',';
    out += h;
    first = false;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!first) out += ',';
    out += format_double(data[i]);
    first = false;
  }
  out += '\n';
}

inline bool block_is_linear(const Dictionary& d, const Block& b) {
  for (int k = 0; k < b.size; ++k)
    if (d.state_observables()[static_cast<std::size_t>(b.offset + k)].degree != 1) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// generate

inline CommandResult cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  const SatellitePlant plant(cfg.plant);
  TrajectoryDataset ds = generate_dataset(plant, cfg.dataset, cfg.seed);
  ds.config_echo = cfg.to_json();
  ensure_directory(cfg.out());
  write_dataset(ds, cfg.dataset_dir());
  detail::write_run_record(cfg.dataset_dir(), "generate", cfg);
  CommandResult r;
  const std::string manifest = read_file(cfg.dataset_dir() / "manifest.json");
  r.summary = {{"command", "generate"},
               {"directory", cfg.dataset_dir().string()},
               {"trajectories", ds.trajectories.size()},
               {"train", ds.select(Split::kTrain).size()},
               {"validation", ds.select(Split::kValidation).size()},
               {"manifest_fnv1a64", hex64(fnv1a64(manifest))}};
  return r;
}

// ---------------------------------------------------------------------------
// fit

inline TrajectoryDataset load_dataset_for(const ExperimentConfig& cfg, std::vector<std::string>* warnings = nullptr) {
  TrajectoryDataset ds = read_dataset(cfg.dataset_dir());
  if (std::abs(ds.dt - cfg.dataset.dt) > 1e-12 * cfg.dataset.dt)
    throw ConfigError("dataset sample time does not match dataset.dt in the configuration");
  for (const auto& t : ds.trajectories)
    if (t.x.cols() != state_index::kDim || t.u.cols() != input_index::kDim)
      throw ConfigError("dataset dimensions do not match the plant");
  if (warnings && ds.master_seed != cfg.seed)
    warnings->push_back("dataset was generated with seed " + std::to_string(ds.master_seed) +
                        ", configuration seed is " + std::to_string(cfg.seed));
  return ds;
}

inline CommandResult cmd_fit(const ExperimentConfig& cfg) {
  cfg.validate();
  CommandResult r;
  const TrajectoryDataset ds = load_dataset_for(cfg, &r.warnings);
  ensure_directory(cfg.out() / "models");
  r.summary = {{"command", "fit"}, {"models", nlohmann::json::array()}};
  for (const auto& name : cfg.dictionaries) {
    const Dictionary dict = dictionary_by_name(name);
    const RegressionProblem problem = lift_dataset(ds, Split::kTrain, dict, cfg.stls);
    const StlsResult res = stls(problem);
    RegressionProblem ls = problem;
    ls.options.lambda = 0.0;
    const StlsResult ls_res = stls(ls);

    LiftedModel m = assemble_model(res.xi, dict, ds.dt, res.support);
    m.diagnostics = res.diagnostics.to_json();
    m.diagnostics["rows"] = problem.theta.rows();
    m.diagnostics["residual_norm_least_squares"] = ls_res.diagnostics.residual_norm;
    m.diagnostics["nonzeros"] = res.support.count();
    m.metadata = {{"seed", cfg.seed}, {"dictionary", name}, {"config", cfg.to_json()}};

    const auto& d = res.diagnostics;
    const auto count = [](const std::vector<bool>& v) { return std::count(v.begin(), v.end(), true); };
    if (d.underdetermined) r.warnings.push_back(name + ": fewer snapshots than library columns");
    if (!d.converged) r.warnings.push_back(name + ": support did not settle within max_iters");
    if (const auto n = count(d.rank_deficient))
      r.warnings.push_back(name + ": " + std::to_string(n) + " target columns hit a rank-deficient restricted solve");
    if (const auto n = count(d.empty_support))
      r.warnings.push_back(name + ": " + std::to_string(n) + " target columns have an empty support");
    if (!m.a_d.allFinite() || !m.b_d.allFinite()) {
      r.warnings.push_back(name + ": identified model has non-finite entries");
    } else {
      const double rho = m.a_d.eigenvalues().cwiseAbs().maxCoeff();
      m.diagnostics["spectral_radius"] = rho;
      if (rho > 1.0 + 1e-3)
        r.warnings.push_back(name + ": identified discrete dynamics are unstable, spectral radius " + format_double(rho));
    }

    save_model(m, cfg.model_path(name));
    r.summary["models"].push_back({{"dictionary", name},
                                   {"file", cfg.model_path(name).string()},
                                   {"rows", problem.theta.rows()},
                                   {"nonzeros", res.support.count()},
                                   {"iterations", d.iterations}});
  }
  detail::write_run_record(cfg.out() / "models", "fit", cfg);
  return r;
}

// ---------------------------------------------------------------------------
// validate

struct BlockValidation {
  std::string model;
  std::string block;
  bool weighted = false;
  double median_error_early = 0.0;    // median over trajectories of E(t_early)
  double median_error_end = 0.0;      // median over trajectories of E(horizon)
  double median_mean_error = 0.0;     // median over trajectories of the time-mean of E
  double median_mean_persistence = 0.0;
  double max_error = 0.0;
};

struct ValidationReport {
  double early_time = 5.0;
  double horizon = 50.0;
  int trajectories = 0;
  std::vector<BlockValidation> blocks;
};

/// Open-loop prediction of every validation trajectory from its first sample
/// under its recorded inputs, scored per linear block against the lifted truth
/// and against the persistence prediction chi_k = chi_0.
inline ValidationReport validate_models(const TrajectoryDataset& ds, const std::vector<const LiftedModel*>& models,
                                        double horizon, const ControllerSettings& weights,
                                        std::vector<std::string>* csv = nullptr, double early_time = 5.0) {
  ValidationReport rep;
  rep.horizon = horizon;
  rep.early_time = early_time;
  const auto valid = ds.select(Split::kValidation);
  if (valid.empty()) throw InsufficientDataError("validation split is empty");
  rep.trajectories = static_cast<int>(valid.size());
  const int steps = static_cast<int>(std::llround(horizon / ds.dt));
  const int early = static_cast<int>(std::llround(early_time / ds.dt));
  if (steps < 1 || early < 0 || early > steps) throw ConfigError("validation horizon is inconsistent with dt");

  for (const LiftedModel* m : models) {
    const Dictionary& d = m->dictionary;
    std::vector<Block> blocks;
    for (const auto& b : d.state_blocks())
      if (detail::block_is_linear(d, b)) blocks.push_back(b);
    const std::size_t nb = blocks.size();
    std::vector<std::vector<double>> at_early(nb), at_end(nb), mean_m(nb), mean_p(nb);
    std::vector<double> max_err(nb, 0.0);
    std::string text;
    if (csv) {
      text = "trajectory,time";
      for (const auto& b : blocks) text += "," + b.name;
      for (const auto& b : blocks) text += ",persistence_" + b.name;
      text += '\n';
    }
    for (const Trajectory* t : valid) {
      if (t->x.rows() < steps + 1) throw InsufficientDataError("validation trajectory shorter than the horizon");
      std::vector<ControlInput> inputs;
      inputs.reserve(static_cast<std::size_t>(steps));
      for (int k = 0; k < steps; ++k) inputs.push_back(ControlInput::from_vector(t->u.row(k).transpose()));
      const LiftedPrediction p = predict(*m, PlantState::from_vector(t->x.row(0).transpose()), inputs, steps);
      MatrixXd truth(steps + 1, d.n_state());
      for (int k = 0; k <= steps; ++k) truth.row(k) = d.lift(StateVector(t->x.row(k).transpose())).transpose();
      const MatrixXd persistence = truth.row(0).replicate(steps + 1, 1);
      MatrixXd table(steps + 1, 1 + 2 * static_cast<Eigen::Index>(nb));
      for (int k = 0; k <= steps; ++k) table(k, 0) = k * ds.dt;
      for (std::size_t j = 0; j < nb; ++j) {
        const VectorXd e = prediction_error(truth, p.chi, blocks[j]);
        const VectorXd ep = prediction_error(truth, persistence, blocks[j]);
        at_early[j].push_back(e[early]);
        at_end[j].push_back(e[steps]);
        mean_m[j].push_back(e.mean());
        mean_p[j].push_back(ep.mean());
        max_err[j] = std::max(max_err[j], e.maxCoeff());
        table.col(1 + static_cast<Eigen::Index>(j)) = e;
        table.col(1 + static_cast<Eigen::Index>(nb + j)) = ep;
      }
      if (csv) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = table;
        for (int k = 0; k <= steps; ++k) detail::csv_row(text, {std::to_string(t->index)}, rows.row(k).data(), rows.cols());
      }
    }
    if (csv) csv->push_back(std::move(text));
    for (std::size_t j = 0; j < nb; ++j) {
      BlockValidation bv;
      bv.model = d.name();
      bv.block = blocks[j].name;
      const auto w = weights.state_weights.find(blocks[j].name);
      bv.weighted = w != weights.state_weights.end() && w->second > 0.0;
      bv.median_error_early = detail::median(at_early[j]);
      bv.median_error_end = detail::median(at_end[j]);
      bv.median_mean_error = detail::median(mean_m[j]);
      bv.median_mean_persistence = detail::median(mean_p[j]);
      bv.max_error = max_err[j];
      rep.blocks.push_back(bv);
    }
  }
  return rep;
}

inline nlohmann::json to_json(const ValidationReport& rep) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : rep.blocks)
    blocks.push_back({{"model", b.model},
                      {"block", b.block},
                      {"weighted", b.weighted},
                      {"median_error_early", b.median_error_early},
                      {"median_error_end", b.median_error_end},
                      {"median_mean_error", b.median_mean_error},
                      {"median_mean_persistence", b.median_mean_persistence},
                      {"max_error", b.max_error}});
  return {{"early_time", rep.early_time}, {"horizon", rep.horizon}, {"trajectories", rep.trajectories}, {"blocks", blocks}};
}

inline std::vector<LiftedModel> load_models_for(const ExperimentConfig& cfg) {
  std::vector<LiftedModel> models;
  for (const auto& name : cfg.dictionaries) {
    LiftedModel m = load_model(cfg.model_path(name));
    if (!(m.dictionary == dictionary_by_name(name)))
      throw ConfigError("model file " + cfg.model_path(name).string() + " does not match dictionary '" + name + "'");
    if (std::abs(m.dt - cfg.dataset.dt) > 1e-12 * cfg.dataset.dt)
      throw ConfigError("model sample time does not match dataset.dt");
    models.push_back(std::move(m));
  }
  return models;
}

inline CommandResult cmd_validate(const ExperimentConfig& cfg) {
  cfg.validate();
  CommandResult r;
  const TrajectoryDataset ds = load_dataset_for(cfg, &r.warnings);
  const std::vector<LiftedModel> models = load_models_for(cfg);
  std::vector<const LiftedModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  std::vector<std::string> csv;
  const ValidationReport rep = validate_models(ds, ptrs, cfg.validation.horizon, cfg.controller, &csv,
                                               std::min(5.0, cfg.validation.horizon));
  ensure_directory(cfg.validation_dir());
  for (std::size_t i = 0; i < models.size(); ++i)
    write_file(cfg.validation_dir() / ("errors_" + models[i].dictionary.name() + ".csv"), csv[i]);
  std::string summary = "model,block,weighted,median_error_early,median_error_end,median_mean_error,"
                        "median_mean_persistence,max_error\n";
  for (const auto& b : rep.blocks) {
    const double v[] = {b.median_error_early, b.median_error_end, b.median_mean_error, b.median_mean_persistence,
                        b.max_error};
    detail::csv_row(summary, {b.model, b.block, b.weighted ? "1" : "0"}, v, 5);
  }
  write_file(cfg.validation_dir() / "summary.csv", summary);
  r.summary = to_json(rep);
  r.summary["command"] = "validate";
  write_json(cfg.validation_dir() / "summary.json", r.summary);
  detail::write_run_record(cfg.validation_dir(), "validate", cfg);
  return r;
}

// ---------------------------------------------------------------------------
// control

inline nlohmann::json to_json(const CaptureSummary& s, const ClosedLoopLog& log) {
  nlohmann::json capture = nlohmann::json::array(), max_u = nlohmann::json::object(), faults = nlohmann::json::array();
  for (int i = 0; i < kNumTestMasses; ++i)
    capture.push_back({{"test_mass", i + 1},
                       {"capture_time", s.capture_time[i] >= 0.0 ? nlohmann::json(s.capture_time[i]) : nlohmann::json()},
                       {"max_abs_position", s.max_position[i]},
                       {"max_abs_angle", s.max_angle[i]}});
  const auto names = input_names();
  for (int j = 0; j < input_index::kDim; ++j) max_u[names[static_cast<std::size_t>(j)]] = s.max_abs_input[j];
  for (const auto& [step, msg] : log.faults) faults.push_back({{"step", step}, {"message", msg}});
  const auto snames = state_names();
  nlohmann::json final_state = nlohmann::json::object();
  for (int j = 0; j < state_index::kDim; ++j) final_state[snames[static_cast<std::size_t>(j)]] = log.final_state[j];
  return {{"captured", s.captured()},
          {"test_masses", capture},
          {"cage_contact", s.cage_contact},
          {"bound_violations", s.bound_violations},
          {"faults", faults},
          {"max_abs_input", max_u},
          {"final_time", log.final_time},
          {"final_state", final_state}};
}

inline std::string closed_loop_csv(const ClosedLoopLog& log) {
  std::string out = "time";
  for (const auto& n : state_names()) out += "," + n;
  for (const auto& n : input_names()) out += "," + n;
  out += ",qp_cost,qp_iterations\n";
  std::vector<double> row(1 + state_index::kDim + input_index::kDim + 2);
  for (std::size_t k = 0; k < log.times.size(); ++k) {
    row[0] = log.times[k];
    std::copy(log.states[k].data(), log.states[k].data() + state_index::kDim, row.begin() + 1);
    std::copy(log.inputs[k].data(), log.inputs[k].data() + input_index::kDim, row.begin() + 1 + state_index::kDim);
    row[row.size() - 2] = log.cost[k];
    row[row.size() - 1] = log.iterations[k];
    detail::csv_row(out, {}, row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return out;
}

struct ControlRun {
  ClosedLoopLog log;
  CaptureSummary summary;
};

inline ControlRun run_control(const ExperimentConfig& cfg, const std::vector<LiftedModel>& models) {
  std::vector<const LiftedModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  MpcController controller(ptrs, cfg.controller);
  const SatellitePlant plant(cfg.plant);
  ControlRun run;
  run.log = run_closed_loop(plant, controller, cfg.closed_loop.initial_state, cfg.closed_loop.duration,
                            cfg.closed_loop.dt, cfg.dataset.integrator);
  run.summary = summarize_capture(run.log, channel_limits(controller), cfg.closed_loop.capture);
  return run;
}

inline CommandResult cmd_control(const ExperimentConfig& cfg) {
  cfg.validate();
  CommandResult r;
  const std::vector<LiftedModel> models = load_models_for(cfg);
  const ControlRun run = run_control(cfg, models);
  ensure_directory(cfg.control_dir());
  write_file(cfg.control_dir() / "closed_loop.csv", closed_loop_csv(run.log));
  r.summary = to_json(run.summary, run.log);
  r.summary["command"] = "control";
  write_json(cfg.control_dir() / "summary.json", r.summary);
  detail::write_run_record(cfg.control_dir(), "control", cfg);
  // every fault is in summary.json; stderr gets the first few
  const std::size_t shown = std::min<std::size_t>(run.log.faults.size(), 5);
  for (std::size_t i = 0; i < shown; ++i)
    r.warnings.push_back("controller fault at step " + std::to_string(run.log.faults[i].first) + ": " +
                         run.log.faults[i].second);
  if (run.log.faults.size() > shown)
    r.warnings.push_back(std::to_string(run.log.faults.size() - shown) + " further controller faults, see summary.json");
  if (!run.summary.captured()) r.warnings.push_back("test masses were not captured within the simulated horizon");
  return r;
}

// ---------------------------------------------------------------------------
// report

inline CommandResult cmd_report(const ExperimentConfig& cfg) {
  cfg.validate();
  CommandResult r;
  nlohmann::json validation = nlohmann::json(), control = nlohmann::json();
  if (std::filesystem::exists(cfg.validation_dir() / "summary.json")) validation = read_json(cfg.validation_dir() / "summary.json");
  else r.warnings.push_back("no validation summary found; run 'validate' first");
  if (std::filesystem::exists(cfg.control_dir() / "summary.json")) control = read_json(cfg.control_dir() / "summary.json");
  else r.warnings.push_back("no control summary found; run 'control' first");

  std::ostringstream md;
  md << "# dfacs run report\n\nseed: " << cfg.seed << "\n\n";
  if (!validation.is_null()) {
    md << "## Prediction error (validation split, " << validation["trajectories"].get<int>() << " trajectories)\n\n"
       << "| model | block | weighted | median E(" << format_double(validation["early_time"].get<double>())
       << " s) | median E(" << format_double(validation["horizon"].get<double>())
       << " s) | median mean E | median mean E (persistence) |\n|---|---|---|---|---|---|---|\n";
    for (const auto& b : validation["blocks"])
      md << "| " << b["model"].get<std::string>() << " | " << b["block"].get<std::string>() << " | "
         << (b["weighted"].get<bool>() ? "yes" : "no") << " | " << format_double(b["median_error_early"].get<double>())
         << " | " << format_double(b["median_error_end"].get<double>()) << " | "
         << format_double(b["median_mean_error"].get<double>()) << " | "
         << format_double(b["median_mean_persistence"].get<double>()) << " |\n";
    md << "\n";
  }
  if (!control.is_null()) {
    md << "## Closed loop\n\ncaptured: " << (control["captured"].get<bool>() ? "yes" : "no")
       << "\n\nbound violations: " << control["bound_violations"].get<int>()
       << "\n\nfaults: " << control["faults"].size() << "\n\n";
    for (const auto& tm : control["test_masses"])
      md << "- TM" << tm["test_mass"].get<int>() << ": capture time "
         << (tm["capture_time"].is_null() ? std::string("none") : format_double(tm["capture_time"].get<double>()) + " s")
         << ", max |r| " << format_double(tm["max_abs_position"].get<double>()) << " m, max |theta| "
         << format_double(tm["max_abs_angle"].get<double>()) << " rad\n";
  }
  ensure_directory(cfg.report_dir());
  write_file(cfg.report_dir() / "report.md", md.str());
  r.summary = {{"command", "report"}, {"seed", cfg.seed}, {"validation", validation}, {"control", control}};
  write_json(cfg.report_dir() / "report.json", r.summary);
  detail::write_run_record(cfg.report_dir(), "report", cfg);
  return r;
}

}  // namespace dfacs

#endif  // DFACS_PIPELINE_HPP_
