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

#ifndef DFACS_DYNAMICS_HPP_
#define DFACS_DYNAMICS_HPP_

// Nonlinear relative dynamics of a drag-free satellite carrying two test
// masses (TMs) inside two rotating optical sub-assemblies (MOSAs).
//
// Frames: SRF (satellite body), ORF_i (optical frame of MOSA i, sharing the
// SRF z-axis), MRF_i (TM body frame). Attitudes are small, so both the
// satellite and TM attitude kinematics are integrated as theta_dot = omega.

#include <array>
#include <functional>
#include <numbers>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "dfacs/errors.hpp"
#include "dfacs/state.hpp"

namespace dfacs {

/// Cross-product matrix: skew(v) * w == v.cross(w).
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Omega(x) = skew(x_dot) + skew(x)^2. Applied to a lever arm it gives the
/// tangential plus centripetal acceleration of a point fixed in a rotating frame.
inline Mat3 omega_big(const Vec3& x, const Vec3& x_dot) {
  const Mat3 sx = skew(x);
  return skew(x_dot) + sx * sx;
}

inline Mat3 rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

struct SatelliteParams {
  double m_s = 1500.0;
  Mat3 j_s = Vec3(800.0, 800.0, 1000.0).asDiagonal();
  std::array<double, kNumTestMasses> m_m{1.9369, 1.9369};
  std::array<Mat3, kNumTestMasses> j_m{Mat3(Vec3::Constant(6.9e-4).asDiagonal()),
                                       Mat3(Vec3::Constant(6.9e-4).asDiagonal())};
  std::array<double, kNumMosas> i_zz{1.0, 1.0};
  std::array<double, kNumMosas> omega_n{72.76, 72.76};
  std::array<double, kNumMosas> xi{0.0323, 0.0323};
  std::array<Vec3, kNumMosas> b_s{Vec3(0.1074, 0.3216, 0.0), Vec3(0.1074, -0.3216, 0.0)};
  std::array<Vec3, kNumMosas> b_m{Vec3(0.25, 0.0, 0.0), Vec3(0.25, 0.0, 0.0)};
  // Nominal MOSA angles: +-30 deg about z, 60 deg between the optical axes.
  std::array<double, kNumMosas> gamma_nominal{std::numbers::pi / 6.0, -std::numbers::pi / 6.0};

  /// Throws ParameterError when a physical constraint is violated.
  void validate() const {
    auto spd = [](const Mat3& m) {
      if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12 * m.norm()) return false;
      Eigen::LLT<Mat3> llt(m);
      return llt.info() == Eigen::Success;
    };
    if (!(m_s > 0.0)) throw ParameterError("satellite mass must be positive");
    if (!spd(j_s)) throw ParameterError("satellite inertia must be symmetric positive definite");
    for (int i = 0; i < kNumTestMasses; ++i) {
      const std::string tag = " (index " + std::to_string(i + 1) + ")";
      if (!(m_m[i] > 0.0)) throw ParameterError("test-mass mass must be positive" + tag);
      if (!spd(j_m[i])) throw ParameterError("test-mass inertia must be symmetric positive definite" + tag);
      if (!(i_zz[i] > 0.0)) throw ParameterError("MOSA inertia must be positive" + tag);
      if (!(omega_n[i] > 0.0)) throw ParameterError("MOSA natural frequency must be positive" + tag);
      if (!(xi[i] > 0.0 && xi[i] < 1.0)) throw ParameterError("MOSA damping ratio must lie in (0,1)" + tag);
      if (!b_s[i].allFinite() || !b_m[i].allFinite() || !std::isfinite(gamma_nominal[i]))
        throw ParameterError("non-finite geometry" + tag);
    }
  }
};

/// R_{O_i}^S: rotation from optical frame i to the satellite frame.
inline Mat3 rotation_orf_to_srf(const SatelliteParams& params, int i, double zeta_i) {
  return rotation_z(params.gamma_nominal.at(i) + zeta_i);
}

/// A disturbance channel: either a constant or a function of (t, state).
template <typename T>
class DisturbanceTerm {
 public:
  using Function = std::function<T(double, const PlantState&)>;

  DisturbanceTerm() : value_(zero()) {}
  DisturbanceTerm(T constant) : value_(std::move(constant)) {}  // NOLINT
  DisturbanceTerm(Function fn) : value_(std::move(fn)) {}       // NOLINT

  T operator()(double t, const PlantState& x) const {
    if (const auto* c = std::get_if<T>(&value_)) return *c;
    return std::get<Function>(value_)(t, x);
  }

 private:
  static T zero() {
    if constexpr (std::is_arithmetic_v<T>) {
      return T{0};
    } else {
      return T::Zero();
    }
  }
  std::variant<T, Function> value_;
};

struct DisturbanceModel {
  DisturbanceTerm<Vec3> satellite_torque;  // D_S
  DisturbanceTerm<Vec3> satellite_force;   // d_S
  std::array<DisturbanceTerm<Vec3>, kNumTestMasses> tm_force;            // d_M
  std::array<DisturbanceTerm<Vec3>, kNumTestMasses> tm_torque;           // D_M
  std::array<DisturbanceTerm<Vec3>, kNumTestMasses> stiffness_force;     // F_St
  std::array<DisturbanceTerm<Vec3>, kNumTestMasses> stiffness_torque;    // M_St
  std::array<DisturbanceTerm<Vec3>, kNumTestMasses> gravity_gradient;    // G_Delta
  std::array<DisturbanceTerm<double>, kNumMosas> mosa_torque;            // D_zeta
};

/// The plant with validated parameters. Immutable and safe to share across
/// threads.
class SatellitePlant {
 public:
  explicit SatellitePlant(SatelliteParams params = {}, DisturbanceModel dist = {})
      : params_(std::move(params)), dist_(std::move(dist)) {
    params_.validate();
    for (int i = 0; i < kNumTestMasses; ++i) j_m_inv_[i] = params_.j_m[i].inverse();
    // The attitude and MOSA equations are coupled through omega_SI_dot and
    // zeta_ddot; their joint 5x5 mass matrix must be invertible. It depends
    // on zeta only through rotations about z, which leave e3 invariant, so
    // checking it once is enough.
    const double det = coupled_mass_matrix(Vec2::Zero()).determinant();
    if (!(std::abs(det) > 1e-9 * params_.j_s.determinant()))
      throw ParameterError("coupled satellite/MOSA inertia is singular");
  }

  const SatelliteParams& params() const { return params_; }
  const DisturbanceModel& disturbances() const { return dist_; }

  StateVector derivative(const PlantState& x, const ControlInput& u, double t) const;

  StateVector derivative(const StateVector& x, const InputVector& u, double t) const {
    return derivative(PlantState::from_vector(x), ControlInput::from_vector(u), t);
  }

 private:
  using Mat5 = Eigen::Matrix<double, 5, 5>;

  Mat5 coupled_mass_matrix(const Vec2& zeta) const {
    const Vec3 e3 = Vec3::UnitZ();
    Mat5 m = Mat5::Zero();
    m.topLeftCorner<3, 3>() = params_.j_s;
    for (int i = 0; i < kNumMosas; ++i) {
      const Vec3 axis = rotation_orf_to_srf(params_, i, zeta[i]) * e3;
      m.block<3, 1>(0, 3 + i) = params_.i_zz[i] * axis;
      m.block<1, 3>(3 + i, 0) = axis.transpose();
      m(3 + i, 3 + i) = 1.0;
    }
    return m;
  }

  SatelliteParams params_;
  DisturbanceModel dist_;
  std::array<Mat3, kNumTestMasses> j_m_inv_;
};

inline StateVector SatellitePlant::derivative(const PlantState& x, const ControlInput& u,
                                              double t) const {
  using namespace state_index;
  const SatelliteParams& p = params_;
  const Vec3 e3 = Vec3::UnitZ();
  const Vec3& w = x.omega_si;

  std::array<Mat3, kNumMosas> r_os;  // ORF_i -> SRF
  std::array<Mat3, kNumMosas> r_so;  // SRF -> ORF_i
  std::array<Mat3, kNumTestMasses> r_om;  // ORF_i -> MRF_i
  for (int i = 0; i < kNumMosas; ++i) {
    r_os[i] = rotation_orf_to_srf(p, i, x.zeta[i]);
    r_so[i] = r_os[i].transpose();
    r_om[i] = Mat3::Identity() - skew(x.tm[i].theta);
  }

  // Satellite attitude and MOSA rotation, solved jointly:
  //   J_S w_dot + sum_i I_zz R_Oi^S e3 zeta_ddot_i = rhs_att
  //   zeta_ddot_i + e3^T R_S^Oi w_dot            = rhs_mosa_i
  Vec3 rhs_att = -w.cross(p.j_s * w) + u.thruster_torque + dist_.satellite_torque(t, x);
  for (int i = 0; i < kNumTestMasses; ++i) {
    const Vec3 b_i = p.b_s[i] + r_os[i] * p.b_m[i];
    rhs_att -= r_os[i] * u.es_torque[i] + b_i.cross(r_os[i] * u.es_force[i]);
  }
  Eigen::Matrix<double, 5, 1> rhs;
  rhs.head<3>() = rhs_att;
  for (int i = 0; i < kNumMosas; ++i) {
    const double wn = p.omega_n[i];
    rhs[3 + i] = -2.0 * wn * p.xi[i] * x.zeta_dot[i] - wn * wn * x.zeta[i] +
                 (u.mosa_torque[i] - e3.dot(u.es_torque[i]) + dist_.mosa_torque[i](t, x)) /
                     p.i_zz[i];
  }
  const Eigen::Matrix<double, 5, 1> acc = coupled_mass_matrix(x.zeta).partialPivLu().solve(rhs);
  const Vec3 w_dot = acc.head<3>();
  const Vec2 zeta_ddot = acc.tail<2>();

  StateVector dx;
  dx.segment<3>(kThetaSI) = w;
  dx.segment<3>(kOmegaSI) = w_dot;
  dx.segment<2>(kZeta) = x.zeta_dot;
  dx.segment<2>(kZetaDot) = zeta_ddot;

  const Mat3 omega_sat = omega_big(w, w_dot);
  const Vec3 f_thrust = u.thruster_force + dist_.satellite_force(t, x);

  for (int i = 0; i < kNumTestMasses; ++i) {
    const TestMassState& tm = x.tm[i];
    const Vec3 w_body = r_so[i] * w;
    // Angular velocity / acceleration of ORF_i w.r.t. inertial space, in ORF_i.
    const Vec3 w_orf = w_body + x.zeta_dot[i] * e3;
    const Vec3 w_orf_dot = r_so[i] * w_dot + zeta_ddot[i] * e3 - x.zeta_dot[i] * e3.cross(w_body);
    const Mat3 omega_orf = omega_big(w_orf, w_orf_dot);

    Vec3 es_reaction = Vec3::Zero();
    for (int j = 0; j < kNumTestMasses; ++j) {
      es_reaction += r_om[i] * r_so[i] * r_os[j] * u.es_force[j];
    }

    const Vec3 r_ddot =
        r_so[i] * dist_.gravity_gradient[i](t, x) +
        (u.es_force[i] + dist_.tm_force[i](t, x) + dist_.stiffness_force[i](t, x)) / p.m_m[i] -
        r_om[i] * f_thrust / p.m_s + es_reaction / p.m_s -
        r_so[i] * (omega_sat * p.b_s[i]) - omega_orf * p.b_m[i] - omega_orf * tm.r -
        2.0 * w_orf.cross(tm.r_dot);

    const Mat3 r_sm = r_om[i] * r_so[i];
    const Vec3 w_gamma = x.zeta_dot[i] * e3;
    const Vec3 w_gamma_dot = zeta_ddot[i] * e3;
    const Vec3 w_tm_inertial = tm.omega + r_om[i] * w_gamma + r_sm * w;
    const Vec3 w_tm_dot =
        -j_m_inv_[i] * w_tm_inertial.cross(p.j_m[i] * w_tm_inertial) +
        j_m_inv_[i] * r_om[i] *
            (u.es_torque[i] + dist_.tm_torque[i](t, x) + dist_.stiffness_torque[i](t, x)) -
        r_om[i] * w_gamma_dot - r_sm * w_dot;

    dx.segment<3>(test_mass(i, kR)) = tm.r_dot;
    dx.segment<3>(test_mass(i, kRDot)) = r_ddot;
    dx.segment<3>(test_mass(i, kTheta)) = tm.omega;
    dx.segment<3>(test_mass(i, kOmega)) = w_tm_dot;
  }
  return dx;
}

/// Free-function form of the plant right-hand side. Validates `params` on
/// every call; prefer a long-lived SatellitePlant in loops.
inline StateVector plant_derivative(const PlantState& x, const ControlInput& u,
                                    const SatelliteParams& params,
                                    const DisturbanceModel& dist = {}, double t = 0.0) {
  return SatellitePlant(params, dist).derivative(x, u, t);
}

}  // namespace dfacs

#endif  // DFACS_DYNAMICS_HPP_
