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

#ifndef DFACS_CONFIG_HPP_
#define DFACS_CONFIG_HPP_

// Experiment configuration: one JSON document (comments allowed) covering
// plant, dataset, identification, validation and control settings. Keys that
// are absent keep their defaults; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfacs/dataset.hpp"
#include "dfacs/dictionary.hpp"
#include "dfacs/dynamics.hpp"
#include "dfacs/errors.hpp"
#include "dfacs/io.hpp"
#include "dfacs/mpc.hpp"
#include "dfacs/sindy.hpp"

namespace dfacs {

struct ValidationSettings {
  double horizon = 50.0;  // s of open-loop prediction per validation trajectory
};

struct ClosedLoopSettings {
  double duration = 1000.0;  // s
  double dt = 0.1;           // s, must match the model sample time
  PlantState initial_state;
  CaptureThresholds capture;
};

/// Release state used for the capture scenario.
inline PlantState capture_initial_state() {
  PlantState x;
  x.theta_si = Vec3(1e-6, 2e-6, 5e-6);
  x.zeta = Vec2(1e-8, 1e-8);
  for (auto& tm : x.tm) {
    tm.r = Vec3::Constant(200e-6);
    tm.r_dot = Vec3::Constant(5e-6);
    tm.theta = Vec3::Constant(2e-3);
    tm.omega = Vec3::Constant(600e-6);
  }
  return x;
}

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "runs/default";
  std::string plant_profile = "table1";
  SatelliteParams plant;
  DatasetConfig dataset;
  std::vector<std::string> dictionaries{"attitude", "test_mass"};
  StlsOptions stls;
  ValidationSettings validation;
  ControllerSettings controller = default_controller_settings();
  ClosedLoopSettings closed_loop{1000.0, 0.1, capture_initial_state(), {}};

  /// Cross-module checks, run before any command does work.
  void validate() const {
    if (plant_profile != "table1") throw ConfigError("unknown plant profile '" + plant_profile + "'");
    plant.validate();
    dataset.validate();
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (dictionaries.empty()) throw ConfigError("at least one dictionary must be selected");
    std::set<std::string> seen;
    std::set<std::string> state_blocks, input_blocks;
    for (const auto& name : dictionaries) {
      if (!seen.insert(name).second) throw ConfigError("dictionary '" + name + "' selected twice");
      const Dictionary d = dictionary_by_name(name);
      for (const auto& b : d.state_blocks()) state_blocks.insert(b.name);
      for (const auto& b : d.input_blocks()) input_blocks.insert(b.name);
    }
    if (!(stls.lambda >= 0.0)) throw ConfigError("identification.lambda must be non-negative");
    if (stls.max_iters < 1) throw ConfigError("identification.max_iters must be at least 1");
    const int n_valid = dataset.n_traj - dataset.n_train();
    if (dataset.n_train() < 1) throw ConfigError("dataset has no training trajectories");
    if (n_valid < 1) throw ConfigError("dataset has no validation trajectories");
    if (!(validation.horizon > 0.0) || validation.horizon > dataset.duration + 1e-9)
      throw ConfigError("validation.horizon must lie in (0, dataset.duration]");
    if (std::abs(closed_loop.dt - dataset.dt) > 1e-12 * dataset.dt)
      throw ConfigError("closed_loop.dt must equal dataset.dt (the model sample time)");
    if (!(closed_loop.duration > 0.0)) throw ConfigError("closed_loop.duration must be positive");
    if (!closed_loop.initial_state.all_finite()) throw ConfigError("closed_loop.initial_state must be finite");
    if (controller.nc < 1 || controller.np < controller.nc)
      throw ConfigError("controller horizons must satisfy np >= nc >= 1");
    if (!(controller.qp.tol > 0.0) || controller.qp.max_iters < 1) throw ConfigError("controller QP settings are invalid");
    for (const auto& [name, w] : controller.state_weights) {
      if (!state_blocks.count(name)) throw ConfigError("controller.state_weights: unknown block '" + name + "'");
      if (!(w >= 0.0)) throw ConfigError("controller.state_weights." + name + " must be non-negative");
    }
    for (const auto* m : {&controller.input_weights, &controller.increment_weights, &controller.input_limits})
      for (const auto& [name, w] : *m) {
        if (!input_blocks.count(name)) throw ConfigError("controller: unknown input block '" + name + "'");
        if (!(w >= 0.0)) throw ConfigError("controller: setting for '" + name + "' must be non-negative");
      }
    for (const auto& name : input_blocks) {
      if (!controller.input_weights.count(name)) throw ConfigError("controller.input_weights: missing '" + name + "'");
      if (!controller.input_limits.count(name)) throw ConfigError("controller.input_limits: missing '" + name + "'");
      if (!(controller.input_limits.at(name) > 0.0))
        throw ConfigError("controller.input_limits." + name + " must be positive");
      const double s = controller.increment_weights.count(name) ? controller.increment_weights.at(name) : 0.0;
      if (!(controller.input_weights.at(name) + s > 0.0))
        throw ConfigError("controller: input block '" + name + "' needs a positive R or S weight");
    }
  }

  std::filesystem::path out() const { return output_dir; }
  std::filesystem::path dataset_dir() const { return out() / "dataset"; }
  std::filesystem::path model_path(const std::string& dict) const { return out() / "models" / (dict + ".json"); }
  std::filesystem::path validation_dir() const { return out() / "validation"; }
  std::filesystem::path control_dir() const { return out() / "control"; }
  std::filesystem::path report_dir() const { return out() / "report"; }

  nlohmann::json to_json() const;
};

namespace detail {

inline nlohmann::json vec_json(const Eigen::Ref<const VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

template <int N>
inline Eigen::Matrix<double, N, 1> vec_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N))
    throw ConfigError(what + " must be an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw ConfigError(what + " must contain numbers");
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
inline void read(const nlohmann::json& j, const char* key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "'");
  }
}

inline nlohmann::json state_json(const PlantState& x) {
  nlohmann::json tms = nlohmann::json::array();
  for (const auto& tm : x.tm)
    tms.push_back({{"r", vec_json(tm.r)}, {"r_dot", vec_json(tm.r_dot)}, {"theta", vec_json(tm.theta)},
                   {"omega", vec_json(tm.omega)}});
  return {{"theta_si", vec_json(x.theta_si)}, {"omega_si", vec_json(x.omega_si)}, {"zeta", vec_json(x.zeta)},
          {"zeta_dot", vec_json(x.zeta_dot)}, {"tm", tms}};
}

inline void state_from_json(const nlohmann::json& j, PlantState& x, const std::string& where) {
  check_keys(j, where, {"theta_si", "omega_si", "zeta", "zeta_dot", "tm"});
  if (j.contains("theta_si")) x.theta_si = vec_from<3>(j["theta_si"], where + ".theta_si");
  if (j.contains("omega_si")) x.omega_si = vec_from<3>(j["omega_si"], where + ".omega_si");
  if (j.contains("zeta")) x.zeta = vec_from<2>(j["zeta"], where + ".zeta");
  if (j.contains("zeta_dot")) x.zeta_dot = vec_from<2>(j["zeta_dot"], where + ".zeta_dot");
  if (j.contains("tm")) {
    const auto& tms = j["tm"];
    if (!tms.is_array() || tms.size() != static_cast<std::size_t>(kNumTestMasses))
      throw ConfigError(where + ".tm must list both test masses");
    for (int i = 0; i < kNumTestMasses; ++i) {
      const auto& t = tms[static_cast<std::size_t>(i)];
      const std::string w = where + ".tm[" + std::to_string(i) + "]";
      check_keys(t, w, {"r", "r_dot", "theta", "omega"});
      if (t.contains("r")) x.tm[i].r = vec_from<3>(t["r"], w + ".r");
      if (t.contains("r_dot")) x.tm[i].r_dot = vec_from<3>(t["r_dot"], w + ".r_dot");
      if (t.contains("theta")) x.tm[i].theta = vec_from<3>(t["theta"], w + ".theta");
      if (t.contains("omega")) x.tm[i].omega = vec_from<3>(t["omega"], w + ".omega");
    }
  }
}

template <int N, typename Array>
inline void pair_from(const nlohmann::json& j, const char* key, Array& target, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& a = j[key];
  if (!a.is_array() || a.size() != 2) throw ConfigError(where + "." + key + " must list two entries");
  for (std::size_t i = 0; i < 2; ++i) {
    if constexpr (N == 1) {
      if (!a[i].is_number()) throw ConfigError(where + "." + key + " must contain numbers");
      target[i] = a[i].get<double>();
    } else {
      target[i] = vec_from<3>(a[i], where + "." + key);
    }
  }
}

}  // namespace detail

/// Resolved configuration, persisted next to every artifact.
inline nlohmann::json ExperimentConfig::to_json() const {
  using detail::vec_json;
  const auto& p = plant;
  auto pair = [](const auto& a) { return nlohmann::json::array({a[0], a[1]}); };
  auto pair3 = [&](const auto& a) { return nlohmann::json::array({vec_json(a[0]), vec_json(a[1])}); };
  const auto& ig = dataset.integrator;
  const auto& ir = dataset.initial;
  return {
      {"seed", seed},
      {"output_dir", output_dir},
      {"plant",
       {{"profile", plant_profile},
        {"m_s", p.m_s},
        {"j_s", vec_json(p.j_s.diagonal())},
        {"m_m", pair(p.m_m)},
        {"j_m", nlohmann::json::array({vec_json(p.j_m[0].diagonal()), vec_json(p.j_m[1].diagonal())})},
        {"i_zz", pair(p.i_zz)},
        {"omega_n", pair(p.omega_n)},
        {"xi", pair(p.xi)},
        {"b_s", pair3(p.b_s)},
        {"b_m", pair3(p.b_m)},
        {"gamma_nominal", pair(p.gamma_nominal)}}},
      {"dataset",
       {{"n_traj", dataset.n_traj},
        {"duration", dataset.duration},
        {"dt", dataset.dt},
        {"train_fraction", dataset.train_fraction},
        {"workers", dataset.workers},
        {"integrator",
         {{"rel_tol", ig.rel_tol},
          {"abs_tol", ig.abs_tol},
          {"max_step", ig.max_step},
          {"initial_step", ig.initial_step},
          {"max_steps", ig.max_steps}}},
        {"initial_ranges",
         {{"theta_si", ir.theta_si},
          {"omega_si", ir.omega_si},
          {"r", ir.r},
          {"r_dot", ir.r_dot},
          {"theta_tm", ir.theta_tm},
          {"omega_tm", ir.omega_tm},
          {"zeta", ir.zeta},
          {"zeta_dot", ir.zeta_dot}}},
        {"excitation_amplitude", vec_json(dataset.amplitude)}}},
      {"identification",
       {{"dictionaries", dictionaries},
        {"lambda", stls.lambda},
        {"max_iters", stls.max_iters},
        {"scale_columns", stls.scale_columns}}},
      {"validation", {{"horizon", validation.horizon}}},
      {"controller", controller.to_json()},
      {"closed_loop",
       {{"duration", closed_loop.duration},
        {"dt", closed_loop.dt},
        {"initial_state", detail::state_json(closed_loop.initial_state)},
        {"capture",
         {{"position", closed_loop.capture.position},
          {"angle", closed_loop.capture.angle},
          {"cage", closed_loop.capture.cage}}}}}};
}

/// Applies the settings in `j` on top of the defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  ExperimentConfig c;
  check_keys(j, "config", {"seed", "output_dir", "plant", "dataset", "identification", "validation", "controller", "closed_loop"});
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  if (j.contains("plant")) {
    const auto& p = j["plant"];
    check_keys(p, "plant", {"profile", "m_s", "j_s", "m_m", "j_m", "i_zz", "omega_n", "xi", "b_s", "b_m", "gamma_nominal"});
    read(p, "profile", c.plant_profile, "plant");
    read(p, "m_s", c.plant.m_s, "plant");
    if (p.contains("j_s")) c.plant.j_s = vec_from<3>(p["j_s"], "plant.j_s").asDiagonal();
    pair_from<1>(p, "m_m", c.plant.m_m, "plant");
    if (p.contains("j_m")) {
      std::array<Vec3, 2> d;
      pair_from<3>(p, "j_m", d, "plant");
      for (int i = 0; i < 2; ++i) c.plant.j_m[i] = d[i].asDiagonal();
    }
    pair_from<1>(p, "i_zz", c.plant.i_zz, "plant");
    pair_from<1>(p, "omega_n", c.plant.omega_n, "plant");
    pair_from<1>(p, "xi", c.plant.xi, "plant");
    pair_from<3>(p, "b_s", c.plant.b_s, "plant");
    pair_from<3>(p, "b_m", c.plant.b_m, "plant");
    pair_from<1>(p, "gamma_nominal", c.plant.gamma_nominal, "plant");
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, "dataset", {"n_traj", "duration", "dt", "train_fraction", "workers", "integrator", "initial_ranges", "excitation_amplitude"});
    read(d, "n_traj", c.dataset.n_traj, "dataset");
    read(d, "duration", c.dataset.duration, "dataset");
    read(d, "dt", c.dataset.dt, "dataset");
    read(d, "train_fraction", c.dataset.train_fraction, "dataset");
    read(d, "workers", c.dataset.workers, "dataset");
    if (d.contains("integrator")) {
      const auto& i = d["integrator"];
      check_keys(i, "dataset.integrator", {"rel_tol", "abs_tol", "max_step", "initial_step", "max_steps"});
      read(i, "rel_tol", c.dataset.integrator.rel_tol, "dataset.integrator");
      read(i, "abs_tol", c.dataset.integrator.abs_tol, "dataset.integrator");
      read(i, "max_step", c.dataset.integrator.max_step, "dataset.integrator");
      read(i, "initial_step", c.dataset.integrator.initial_step, "dataset.integrator");
      read(i, "max_steps", c.dataset.integrator.max_steps, "dataset.integrator");
    }
    if (d.contains("initial_ranges")) {
      const auto& r = d["initial_ranges"];
      const std::string w = "dataset.initial_ranges";
      check_keys(r, w, {"theta_si", "omega_si", "r", "r_dot", "theta_tm", "omega_tm", "zeta", "zeta_dot"});
      auto& b = c.dataset.initial;
      read(r, "theta_si", b.theta_si, w);
      read(r, "omega_si", b.omega_si, w);
      read(r, "r", b.r, w);
      read(r, "r_dot", b.r_dot, w);
      read(r, "theta_tm", b.theta_tm, w);
      read(r, "omega_tm", b.omega_tm, w);
      read(r, "zeta", b.zeta, w);
      read(r, "zeta_dot", b.zeta_dot, w);
    }
    if (d.contains("excitation_amplitude"))
      c.dataset.amplitude = vec_from<input_index::kDim>(d["excitation_amplitude"], "dataset.excitation_amplitude");
  }
  if (j.contains("identification")) {
    const auto& i = j["identification"];
    check_keys(i, "identification", {"dictionaries", "lambda", "max_iters", "scale_columns"});
    read(i, "dictionaries", c.dictionaries, "identification");
    read(i, "lambda", c.stls.lambda, "identification");
    read(i, "max_iters", c.stls.max_iters, "identification");
    read(i, "scale_columns", c.stls.scale_columns, "identification");
  }
  if (j.contains("validation")) {
    check_keys(j["validation"], "validation", {"horizon"});
    read(j["validation"], "horizon", c.validation.horizon, "validation");
  }
  if (j.contains("controller")) {
    const auto& m = j["controller"];
    check_keys(m, "controller", {"np", "nc", "state_weights", "input_weights", "increment_weights", "input_limits", "qp_tol", "qp_max_iters"});
    auto& s = c.controller;
    read(m, "np", s.np, "controller");
    read(m, "nc", s.nc, "controller");
    // Weight maps replace the defaults wholesale so blocks can be dropped.
    read(m, "state_weights", s.state_weights, "controller");
    read(m, "input_weights", s.input_weights, "controller");
    read(m, "increment_weights", s.increment_weights, "controller");
    read(m, "input_limits", s.input_limits, "controller");
    read(m, "qp_tol", s.qp.tol, "controller");
    read(m, "qp_max_iters", s.qp.max_iters, "controller");
  }
  if (j.contains("closed_loop")) {
    const auto& l = j["closed_loop"];
    check_keys(l, "closed_loop", {"duration", "dt", "initial_state", "capture"});
    read(l, "duration", c.closed_loop.duration, "closed_loop");
    read(l, "dt", c.closed_loop.dt, "closed_loop");
    if (l.contains("initial_state")) {
      // An explicit initial state starts from zero, not from the capture default.
      c.closed_loop.initial_state = PlantState{};
      state_from_json(l["initial_state"], c.closed_loop.initial_state, "closed_loop.initial_state");
    }
    if (l.contains("capture")) {
      const auto& t = l["capture"];
      check_keys(t, "closed_loop.capture", {"position", "angle", "cage"});
      read(t, "position", c.closed_loop.capture.position, "closed_loop.capture");
      read(t, "angle", c.closed_loop.capture.angle, "closed_loop.capture");
      read(t, "cage", c.closed_loop.capture.cage, "closed_loop.capture");
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

}  // namespace dfacs

#endif  // DFACS_CONFIG_HPP_
