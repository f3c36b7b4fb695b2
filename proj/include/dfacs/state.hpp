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

#ifndef DFACS_STATE_HPP_
#define DFACS_STATE_HPP_

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dfacs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumTestMasses = 2;
inline constexpr int kNumMosas = 2;

// Flat layout of the 34-dimensional plant state.
namespace state_index {
inline constexpr int kThetaSI = 0;
inline constexpr int kOmegaSI = 3;
inline constexpr int kZeta = 6;
inline constexpr int kZetaDot = 8;
inline constexpr int kTestMassBase = 10;
inline constexpr int kTestMassStride = 12;
// Offsets inside one test-mass block.
inline constexpr int kR = 0;
inline constexpr int kRDot = 3;
inline constexpr int kTheta = 6;
inline constexpr int kOmega = 9;
inline constexpr int kDim = 34;

constexpr int test_mass(int i, int offset) {
  return kTestMassBase + i * kTestMassStride + offset;
}
}  // namespace state_index

// Flat layout of the 20-dimensional actuation vector. The order matches the
// excitation amplitude blocks: M_T, F_T, F_E1, M_E1, F_E2, M_E2, M_MOSA.
namespace input_index {
inline constexpr int kThrusterTorque = 0;
inline constexpr int kThrusterForce = 3;
inline constexpr int kElectrostaticBase = 6;
inline constexpr int kElectrostaticStride = 6;
inline constexpr int kMosaTorque = 18;
inline constexpr int kDim = 20;

constexpr int es_force(int i) { return kElectrostaticBase + i * kElectrostaticStride; }
constexpr int es_torque(int i) { return es_force(i) + 3; }
}  // namespace input_index

using StateVector = Eigen::Matrix<double, state_index::kDim, 1>;
using InputVector = Eigen::Matrix<double, input_index::kDim, 1>;

/// Column names in flat-vector order, used for logs and CSV headers.
inline std::vector<std::string> state_names() {
  std::vector<std::string> out;
  const char* ax[] = {"x", "y", "z"};
  auto vec3 = [&](const std::string& base) {
    for (const char* a : ax) out.push_back(base + "_" + a);
  };
  vec3("theta_SI");
  vec3("omega_SI");
  out.insert(out.end(), {"zeta_1", "zeta_2", "zeta_dot_1", "zeta_dot_2"});
  for (int i = 1; i <= kNumTestMasses; ++i) {
    const std::string n = std::to_string(i);
    vec3("r_MO" + n);
    vec3("r_dot_MO" + n);
    vec3("theta_MO" + n);
    vec3("omega_MO" + n);
  }
  return out;
}

inline std::vector<std::string> input_names() {
  std::vector<std::string> out;
  const char* ax[] = {"x", "y", "z"};
  auto vec3 = [&](const std::string& base) {
    for (const char* a : ax) out.push_back(base + "_" + a);
  };
  vec3("M_T");
  vec3("F_T");
  for (int i = 1; i <= kNumTestMasses; ++i) {
    vec3("F_E" + std::to_string(i));
    vec3("M_E" + std::to_string(i));
  }
  out.insert(out.end(), {"M_MOSA_1", "M_MOSA_2"});
  return out;
}


struct TestMassState {
  Vec3 r = Vec3::Zero();        // position of the TM in its optical frame, m
  Vec3 r_dot = Vec3::Zero();    // m/s
  Vec3 theta = Vec3::Zero();    // small-angle attitude w.r.t. the optical frame, rad
  Vec3 omega = Vec3::Zero();    // rad/s
};

// Physical state of the satellite: attitude, MOSA deviation angles and the
// relative pose of both test masses.
struct PlantState {
  Vec3 theta_si = Vec3::Zero();
  Vec3 omega_si = Vec3::Zero();
  Vec2 zeta = Vec2::Zero();
  Vec2 zeta_dot = Vec2::Zero();
  std::array<TestMassState, kNumTestMasses> tm{};

  static constexpr int kDim = state_index::kDim;

  StateVector to_vector() const {
    using namespace state_index;
    StateVector v;
    v.segment<3>(kThetaSI) = theta_si;
    v.segment<3>(kOmegaSI) = omega_si;
    v.segment<2>(kZeta) = zeta;
    v.segment<2>(kZetaDot) = zeta_dot;
    for (int i = 0; i < kNumTestMasses; ++i) {
      v.segment<3>(test_mass(i, kR)) = tm[i].r;
      v.segment<3>(test_mass(i, kRDot)) = tm[i].r_dot;
      v.segment<3>(test_mass(i, kTheta)) = tm[i].theta;
      v.segment<3>(test_mass(i, kOmega)) = tm[i].omega;
    }
    return v;
  }

  static PlantState from_vector(const StateVector& v) {
    using namespace state_index;
    PlantState s;
    s.theta_si = v.segment<3>(kThetaSI);
    s.omega_si = v.segment<3>(kOmegaSI);
    s.zeta = v.segment<2>(kZeta);
    s.zeta_dot = v.segment<2>(kZetaDot);
    for (int i = 0; i < kNumTestMasses; ++i) {
      s.tm[i].r = v.segment<3>(test_mass(i, kR));
      s.tm[i].r_dot = v.segment<3>(test_mass(i, kRDot));
      s.tm[i].theta = v.segment<3>(test_mass(i, kTheta));
      s.tm[i].omega = v.segment<3>(test_mass(i, kOmega));
    }
    return s;
  }

  bool all_finite() const { return to_vector().allFinite(); }
};

struct ControlInput {
  Vec3 thruster_torque = Vec3::Zero();  // M_T, N*m
  Vec3 thruster_force = Vec3::Zero();   // F_T, N
  std::array<Vec3, kNumTestMasses> es_force{Vec3::Zero(), Vec3::Zero()};   // F_E, N
  std::array<Vec3, kNumTestMasses> es_torque{Vec3::Zero(), Vec3::Zero()};  // M_E, N*m
  Vec2 mosa_torque = Vec2::Zero();      // M_MOSA, N*m

  static constexpr int kDim = input_index::kDim;

  InputVector to_vector() const {
    using namespace input_index;
    InputVector v;
    v.segment<3>(kThrusterTorque) = thruster_torque;
    v.segment<3>(kThrusterForce) = thruster_force;
    for (int i = 0; i < kNumTestMasses; ++i) {
      v.segment<3>(input_index::es_force(i)) = es_force[i];
      v.segment<3>(input_index::es_torque(i)) = es_torque[i];
    }
    v.segment<2>(kMosaTorque) = mosa_torque;
    return v;
  }

  static ControlInput from_vector(const InputVector& v) {
    using namespace input_index;
    ControlInput u;
    u.thruster_torque = v.segment<3>(kThrusterTorque);
    u.thruster_force = v.segment<3>(kThrusterForce);
    for (int i = 0; i < kNumTestMasses; ++i) {
      u.es_force[i] = v.segment<3>(input_index::es_force(i));
      u.es_torque[i] = v.segment<3>(input_index::es_torque(i));
    }
    u.mosa_torque = v.segment<2>(kMosaTorque);
    return u;
  }

  bool all_finite() const { return to_vector().allFinite(); }
};

}  // namespace dfacs

#endif  // DFACS_STATE_HPP_
