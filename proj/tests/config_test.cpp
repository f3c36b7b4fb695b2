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

// Tests for include/dfacs/config.hpp.

#include "dfacs/config.hpp"

#include <filesystem>

#include <gtest/gtest.h>

namespace dfacs {
namespace {

using nlohmann::json;

TEST(ConfigTest, DefaultsValidate) {
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
  EXPECT_EQ(ExperimentConfig{}.seed, 42u);
}

TEST(ConfigTest, EchoRoundTrips) {
  ExperimentConfig c;
  c.seed = 7;
  c.dataset.n_traj = 13;
  c.stls.lambda = 3e-12;
  c.controller.state_weights["r_MO1"] = 0.5;
  c.closed_loop.initial_state.tm[1].omega = Vec3(1e-4, -2e-4, 3e-4);
  const json echo = c.to_json();
  const ExperimentConfig back = config_from_json(json::parse(echo.dump()));
  EXPECT_EQ(back.to_json(), echo);
  EXPECT_EQ(back.closed_loop.initial_state.to_vector(), c.closed_loop.initial_state.to_vector());
}

TEST(ConfigTest, PartialOverrideKeepsDefaults) {
  const ExperimentConfig c = config_from_json(json{{"dataset", {{"n_traj", 10}}}});
  EXPECT_EQ(c.dataset.n_traj, 10);
  EXPECT_EQ(c.dataset.dt, 0.1);
  EXPECT_EQ(c.controller.np, 50);
  EXPECT_EQ(c.closed_loop.initial_state.tm[0].r, Vec3::Constant(200e-6));
}

TEST(ConfigTest, InitialStateOverrideStartsFromZero) {
  const ExperimentConfig c =
      config_from_json(json{{"closed_loop", {{"initial_state", {{"theta_si", {1e-6, 0, 0}}}}}}});
  EXPECT_EQ(c.closed_loop.initial_state.theta_si, Vec3(1e-6, 0, 0));
  EXPECT_EQ(c.closed_loop.initial_state.tm[0].r, Vec3::Zero());
}

TEST(ConfigTest, WeightMapReplacesDefaults) {
  const ExperimentConfig c = config_from_json(json{{"controller", {{"state_weights", {{"r_MO1", 1.0}}}}}});
  ASSERT_EQ(c.controller.state_weights.size(), 1u);
  EXPECT_EQ(c.controller.state_weights.at("r_MO1"), 1.0);
}

TEST(ConfigTest, RejectsUnknownKeys) {
  EXPECT_THROW(config_from_json(json{{"sed", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"dataset", {{"ntraj", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"closed_loop", {{"initial_state", {{"tm", {json::object(), {{"x", 1}}}}}}}}}),
               ConfigError);
}

TEST(ConfigTest, RejectsBadValues) {
  EXPECT_THROW(config_from_json(json{{"seed", "abc"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"closed_loop", {{"initial_state", {{"zeta", {1, 2, 3}}}}}}}), ConfigError);
}

TEST(ConfigTest, CrossModuleChecks) {
  auto bad = [](auto edit) {
    ExperimentConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.closed_loop.dt = 0.05; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.validation.horizon = 60.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.dataset.train_fraction = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.dictionaries = {"attitude"}; }).validate(), ConfigError);  // TM weights dangle
  EXPECT_THROW(bad([](auto& c) { c.dictionaries = {"attitude", "attitude"}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.controller.input_limits.erase("F_E1"); }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.controller.nc = 60; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.stls.lambda = -1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.plant_profile = "other"; }).validate(), ConfigError);
  EXPECT_THROW(dictionary_by_name("nope"), ConfigError);
}

TEST(ConfigTest, ShippedDefaultMatchesBuiltIn) {
  const std::filesystem::path file = std::filesystem::path(DFACS_SOURCE_DIR) / "config" / "default.json";
  ExperimentConfig shipped = load_config(file);
  ExperimentConfig built;
  EXPECT_EQ(shipped.to_json(), built.to_json());
}

}  // namespace
}  // namespace dfacs
