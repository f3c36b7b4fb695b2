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

#ifndef DFACS_DICTIONARY_HPP_
#define DFACS_DICTIONARY_HPP_

// Lifting dictionaries: ordered, named observables of the physical state
// (Psi), optional higher-order compensation observables (Psi_bar) and
// input-coupling observables (Psi_u). Every state observable here is a
// monomial of degree 1 or 2 in the plant state, which gives exact time
// derivatives by the product rule.

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dfacs/errors.hpp"
#include "dfacs/state.hpp"

namespace dfacs {

using Eigen::VectorXd;

/// All products v_i v_j with i <= j, in lexicographic order.
inline VectorXd phi2(const Eigen::Ref<const VectorXd>& v) {
  const Eigen::Index n = v.size();
  VectorXd out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out[k++] = v[i] * v[j];
  return out;
}

/// Kronecker product of two vectors: out[i * m + j] = a[i] * b[j].
inline VectorXd kron(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) {
  VectorXd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

/// Monomial in the plant state: degree 1 uses factors[0]; degree 2 uses both.
struct Observable {
  std::string name;
  int degree = 1;
  std::array<int, 2> factors{0, 0};

  double value(const StateVector& x) const {
    return degree == 1 ? x[factors[0]] : x[factors[0]] * x[factors[1]];
  }
  double rate(const StateVector& x, const StateVector& x_dot) const {
    if (degree == 1) return x_dot[factors[0]];
    return x_dot[factors[0]] * x[factors[1]] + x[factors[0]] * x_dot[factors[1]];
  }
};

/// Pass-through of one actuation channel.
struct InputObservable {
  std::string name;
  int channel = 0;
};

/// Contiguous named range inside a lifted vector.
struct Block {
  std::string name;
  int offset = 0;
  int size = 0;
};

class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(std::string name, std::vector<Observable> state, std::vector<Block> state_blocks,
             std::vector<InputObservable> inputs, std::vector<Block> input_blocks,
             std::vector<Observable> compensation = {})
      : name_(std::move(name)),
        state_(std::move(state)),
        compensation_(std::move(compensation)),
        inputs_(std::move(inputs)),
        state_blocks_(std::move(state_blocks)),
        input_blocks_(std::move(input_blocks)) {
    validate();
  }

  const std::string& name() const { return name_; }
  int n_state() const { return static_cast<int>(state_.size()); }
  int n_compensation() const { return static_cast<int>(compensation_.size()); }
  int n_input() const { return static_cast<int>(inputs_.size()); }
  /// Columns of the regression library [Psi Psi_bar Psi_u].
  int n_library() const { return n_state() + n_compensation() + n_input(); }

  const std::vector<Observable>& state_observables() const { return state_; }
  const std::vector<Observable>& compensation_observables() const { return compensation_; }
  const std::vector<InputObservable>& input_observables() const { return inputs_; }
  const std::vector<Block>& state_blocks() const { return state_blocks_; }
  const std::vector<Block>& input_blocks() const { return input_blocks_; }

  const Block& state_block(const std::string& name) const { return find(state_blocks_, name); }
  const Block& input_block(const std::string& name) const { return find(input_blocks_, name); }
  bool has_state_block(const std::string& name) const {
    return std::any_of(state_blocks_.begin(), state_blocks_.end(),
                       [&](const Block& b) { return b.name == name; });
  }

  /// Indices of observables that are raw plant states, and which state.
  std::vector<std::pair<int, int>> linear_observables() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n_state(); ++i)
      if (state_[i].degree == 1) out.emplace_back(i, state_[i].factors[0]);
    return out;
  }

  VectorXd lift(const StateVector& x) const { return eval(state_, x); }
  VectorXd lift(const PlantState& x) const { return lift(x.to_vector()); }
  VectorXd lift_compensation(const StateVector& x) const { return eval(compensation_, x); }

  VectorXd lift_inputs(const InputVector& u) const {
    VectorXd out(n_input());
    for (int i = 0; i < n_input(); ++i) out[i] = u[inputs_[i].channel];
    return out;
  }
  VectorXd lift_inputs(const ControlInput& u) const { return lift_inputs(u.to_vector()); }

  /// d/dt Psi(x(t)) given x and x_dot, by the product rule.
  VectorXd lift_rate(const StateVector& x, const StateVector& x_dot) const {
    VectorXd out(n_state());
    for (int i = 0; i < n_state(); ++i) out[i] = state_[i].rate(x, x_dot);
    return out;
  }

  /// One library row [Psi(x) Psi_bar(x) Psi_u(u)].
  VectorXd library_row(const StateVector& x, const InputVector& u) const {
    VectorXd row(n_library());
    row << lift(x), lift_compensation(x), lift_inputs(u);
    return row;
  }

  /// Writes the raw-state part of a lifted vector back into a state vector.
  void unlift_into(const VectorXd& chi, StateVector& x) const {
    for (const auto& [obs, state] : linear_observables()) x[state] = chi[obs];
  }

  nlohmann::json to_json() const {
    auto obs_json = [](const std::vector<Observable>& list) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& o : list)
        a.push_back({{"name", o.name}, {"degree", o.degree}, {"factors", o.factors}});
      return a;
    };
    auto blocks_json = [](const std::vector<Block>& list) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& b : list) a.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
      return a;
    };
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& i : inputs_) inputs.push_back({{"name", i.name}, {"channel", i.channel}});
    return {{"name", name_},
            {"n_state", n_state()},
            {"n_compensation", n_compensation()},
            {"n_input", n_input()},
            {"state", obs_json(state_)},
            {"compensation", obs_json(compensation_)},
            {"inputs", inputs},
            {"state_blocks", blocks_json(state_blocks_)},
            {"input_blocks", blocks_json(input_blocks_)}};
  }

  static Dictionary from_json(const nlohmann::json& j) {
    auto obs = [](const nlohmann::json& a) {
      std::vector<Observable> out;
      for (const auto& o : a)
        out.push_back({o.at("name").get<std::string>(), o.at("degree").get<int>(),
                       o.at("factors").get<std::array<int, 2>>()});
      return out;
    };
    auto blocks = [](const nlohmann::json& a) {
      std::vector<Block> out;
      for (const auto& b : a)
        out.push_back({b.at("name").get<std::string>(), b.at("offset").get<int>(), b.at("size").get<int>()});
      return out;
    };
    std::vector<InputObservable> inputs;
    for (const auto& i : j.at("inputs"))
      inputs.push_back({i.at("name").get<std::string>(), i.at("channel").get<int>()});
    return Dictionary(j.at("name").get<std::string>(), obs(j.at("state")), blocks(j.at("state_blocks")),
                      std::move(inputs), blocks(j.at("input_blocks")),
                      obs(j.value("compensation", nlohmann::json::array())));
  }

  bool operator==(const Dictionary& other) const { return to_json() == other.to_json(); }

 private:
  static VectorXd eval(const std::vector<Observable>& list, const StateVector& x) {
    VectorXd out(static_cast<Eigen::Index>(list.size()));
    for (std::size_t i = 0; i < list.size(); ++i) out[static_cast<Eigen::Index>(i)] = list[i].value(x);
    return out;
  }

  static const Block& find(const std::vector<Block>& blocks, const std::string& name) {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw ConfigError("dictionary has no block named '" + name + "'");
  }

  void validate() const {
    if (state_.empty() || inputs_.empty())
      throw ConfigError("dictionary '" + name_ + "' needs state and input observables");
    std::set<std::string> names;
    auto check_obs = [&](const Observable& o) {
      if (!names.insert(o.name).second) throw ConfigError("duplicate observable name '" + o.name + "'");
      if (o.degree != 1 && o.degree != 2) throw ConfigError("observable degree must be 1 or 2");
      for (int k = 0; k < o.degree; ++k)
        if (o.factors[k] < 0 || o.factors[k] >= state_index::kDim)
          throw ConfigError("observable '" + o.name + "' references a bad state index");
    };
    for (const auto& o : state_) check_obs(o);
    for (const auto& o : compensation_) check_obs(o);
    for (const auto& i : inputs_) {
      if (!names.insert(i.name).second) throw ConfigError("duplicate observable name '" + i.name + "'");
      if (i.channel < 0 || i.channel >= input_index::kDim)
        throw ConfigError("input observable '" + i.name + "' references a bad channel");
    }
    auto check_blocks = [&](const std::vector<Block>& blocks, int total) {
      for (const auto& b : blocks)
        if (b.offset < 0 || b.size <= 0 || b.offset + b.size > total)
          throw ConfigError("block '" + b.name + "' out of range");
    };
    check_blocks(state_blocks_, n_state());
    check_blocks(input_blocks_, n_input());
  }

  std::string name_;
  std::vector<Observable> state_;
  std::vector<Observable> compensation_;
  std::vector<InputObservable> inputs_;
  std::vector<Block> state_blocks_;
  std::vector<Block> input_blocks_;
};

namespace detail {

// Builds a dictionary block by block, keeping the observable order and the
// block table in sync.
class DictionaryBuilder {
 public:
  DictionaryBuilder& linear(const std::string& block, const std::vector<std::string>& names,
                            int first_state) {
    begin(block);
    for (std::size_t k = 0; k < names.size(); ++k)
      state_.push_back({names[k], 1, {first_state + static_cast<int>(k), first_state + static_cast<int>(k)}});
    return end();
  }
  // Kronecker product of two 3-vectors of states.
  DictionaryBuilder& kron(const std::string& block, const std::string& a, int a0, const std::string& b,
                          int b0) {
    begin(block);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        state_.push_back({a + std::to_string(i + 1) + "*" + b + std::to_string(j + 1), 2, {a0 + i, b0 + j}});
    return end();
  }
  // Degree-2 monomials of n consecutive states, i <= j.
  DictionaryBuilder& phi2(const std::string& block, const std::string& v, int v0, int n) {
    begin(block);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        state_.push_back({v + std::to_string(i + 1) + "*" + v + std::to_string(j + 1), 2, {v0 + i, v0 + j}});
    return end();
  }
  DictionaryBuilder& square(const std::string& block, const std::vector<std::string>& names, int first) {
    begin(block);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const int s = first + static_cast<int>(k);
      state_.push_back({names[k] + "^2", 2, {s, s}});
    }
    return end();
  }
  DictionaryBuilder& input(const std::string& block, const std::vector<std::string>& names, int first) {
    const int offset = static_cast<int>(inputs_.size());
    for (std::size_t k = 0; k < names.size(); ++k)
      inputs_.push_back({names[k], first + static_cast<int>(k)});
    input_blocks_.push_back({block, offset, static_cast<int>(names.size())});
    return *this;
  }
  Dictionary build(std::string name) {
    return Dictionary(std::move(name), std::move(state_), std::move(blocks_), std::move(inputs_),
                      std::move(input_blocks_));
  }

 private:
  void begin(const std::string& block) { blocks_.push_back({block, static_cast<int>(state_.size()), 0}); }
  DictionaryBuilder& end() {
    blocks_.back().size = static_cast<int>(state_.size()) - blocks_.back().offset;
    return *this;
  }
  std::vector<Observable> state_;
  std::vector<Block> blocks_;
  std::vector<InputObservable> inputs_;
  std::vector<Block> input_blocks_;
};

inline std::vector<std::string> axis_names(const std::string& base) {
  return {base + "_x", base + "_y", base + "_z"};
}

}  // namespace detail

/// Attitude subsystem (27 observables):
///   [theta_SI, zeta_1, zeta_2, omega_SI, zeta_dot_1, zeta_dot_2,
///    theta_SI (x) omega_SI, phi2(omega_SI), zeta_dot_1^2, zeta_dot_2^2]
/// with inputs [M_T, M_MOSA1, M_MOSA2].
inline Dictionary attitude_dictionary() {
  using namespace state_index;
  using detail::axis_names;
  detail::DictionaryBuilder b;
  b.linear("theta_SI", axis_names("theta_SI"), kThetaSI)
      .linear("zeta", {"zeta_1", "zeta_2"}, kZeta)
      .linear("omega_SI", axis_names("omega_SI"), kOmegaSI)
      .linear("zeta_dot", {"zeta_dot_1", "zeta_dot_2"}, kZetaDot)
      .kron("theta_SI*omega_SI", "theta_SI", kThetaSI, "omega_SI", kOmegaSI)
      .phi2("phi2(omega_SI)", "omega_SI", kOmegaSI, 3)
      .square("zeta_dot^2", {"zeta_dot_1", "zeta_dot_2"}, kZetaDot)
      .input("M_T", axis_names("M_T"), input_index::kThrusterTorque)
      .input("M_MOSA", {"M_MOSA_1", "M_MOSA_2"}, input_index::kMosaTorque);
  return b.build("attitude");
}

/// Test-mass subsystem (84 observables):
///   [r1, theta1, r2, theta2, r_dot1, omega1, r_dot2, omega2,
///    r1 (x) r_dot1, theta1 (x) omega1, r2 (x) r_dot2, theta2 (x) omega2,
///    phi2(r_dot1), phi2(omega1), phi2(r_dot2), phi2(omega2)]
/// with inputs [F_E1, M_E1, F_E2, M_E2].
inline Dictionary test_mass_dictionary() {
  using namespace state_index;
  using detail::axis_names;
  auto tm = [](int i, int off) { return test_mass(i, off); };
  auto nm = [](const std::string& base, int i) { return base + "_MO" + std::to_string(i + 1); };
  detail::DictionaryBuilder b;
  for (int i = 0; i < 2; ++i) {
    b.linear(nm("r", i), axis_names(nm("r", i)), tm(i, kR))
        .linear(nm("theta", i), axis_names(nm("theta", i)), tm(i, kTheta));
  }
  for (int i = 0; i < 2; ++i) {
    b.linear(nm("r_dot", i), axis_names(nm("r_dot", i)), tm(i, kRDot))
        .linear(nm("omega", i), axis_names(nm("omega", i)), tm(i, kOmega));
  }
  for (int i = 0; i < 2; ++i) {
    b.kron(nm("r", i) + "*" + nm("r_dot", i), nm("r", i), tm(i, kR), nm("r_dot", i), tm(i, kRDot))
        .kron(nm("theta", i) + "*" + nm("omega", i), nm("theta", i), tm(i, kTheta), nm("omega", i),
              tm(i, kOmega));
  }
  for (int i = 0; i < 2; ++i) {
    b.phi2("phi2(" + nm("r_dot", i) + ")", nm("r_dot", i), tm(i, kRDot), 3)
        .phi2("phi2(" + nm("omega", i) + ")", nm("omega", i), tm(i, kOmega), 3);
  }
  for (int i = 0; i < 2; ++i) {
    const std::string k = std::to_string(i + 1);
    b.input("F_E" + k, axis_names("F_E" + k), input_index::es_force(i))
        .input("M_E" + k, axis_names("M_E" + k), input_index::es_torque(i));
  }
  return b.build("test_mass");
}

inline VectorXd lift_attitude(const PlantState& x) { return attitude_dictionary().lift(x); }
inline VectorXd lift_tm(const PlantState& x) { return test_mass_dictionary().lift(x); }

/// (Psi_u1, Psi_u2): identity pass-through of the modelled channels.
inline std::pair<VectorXd, VectorXd> lift_inputs(const ControlInput& u) {
  return {attitude_dictionary().lift_inputs(u), test_mass_dictionary().lift_inputs(u)};
}

inline Dictionary dictionary_by_name(const std::string& name) {
  if (name == "attitude") return attitude_dictionary();
  if (name == "test_mass") return test_mass_dictionary();
  throw ConfigError("unknown dictionary '" + name + "'");
}

}  // namespace dfacs

#endif  // DFACS_DICTIONARY_HPP_
