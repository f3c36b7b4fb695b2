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

#ifndef DFACS_INTEGRATOR_HPP_
#define DFACS_INTEGRATOR_HPP_

// Dormand-Prince 5(4) embedded Runge-Kutta integrator with step-size control
// and the 4th-order continuous extension, sampled on a fixed output grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "dfacs/errors.hpp"

namespace dfacs {

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 1.0;     // s
  double output_dt = 0.1;    // s
  double initial_step = 0.0; // s; 0 selects a step automatically
  std::size_t max_steps = 50'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw ConfigError("integrator tolerances must be positive");
    if (!(output_dt > 0.0)) throw ConfigError("integrator output_dt must be positive");
    if (!(max_step > 0.0)) throw ConfigError("integrator max_step must be positive");
  }
};

template <typename Vector>
struct SampledTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

namespace detail {

// Butcher tableau of DOPRI5.
struct DormandPrinceTableau {
  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                          a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
  // Error coefficients: 5th-order weights minus embedded 4th-order weights.
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  // Dense output (Hairer & Wanner, DOPRI5 contd5).
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
};

}  // namespace detail

/// One Dormand-Prince step with FSAL reuse and dense output. `Vector` is any
/// Eigen column vector type.
template <typename Vector>
class DormandPrinceStepper {
 public:
  using T = detail::DormandPrinceTableau;

  /// Attempts a step of size h from (t, y) with k1 = f(t, y) already known.
  /// Fills y_new, k7 = f(t+h, y_new) and the embedded error estimate.
  template <typename Rhs>
  void step(Rhs& f, double t, const Vector& y, const Vector& k1, double h) {
    t_ = t;
    h_ = h;
    y0_ = y;
    k1_ = k1;
    k2_ = f(t + T::c2 * h, Vector(y + h * (T::a21 * k1)));
    k3_ = f(t + T::c3 * h, Vector(y + h * (T::a31 * k1 + T::a32 * k2_)));
    k4_ = f(t + T::c4 * h, Vector(y + h * (T::a41 * k1 + T::a42 * k2_ + T::a43 * k3_)));
    k5_ = f(t + T::c5 * h,
            Vector(y + h * (T::a51 * k1 + T::a52 * k2_ + T::a53 * k3_ + T::a54 * k4_)));
    k6_ = f(t + h, Vector(y + h * (T::a61 * k1 + T::a62 * k2_ + T::a63 * k3_ + T::a64 * k4_ +
                                   T::a65 * k5_)));
    y1_ = y + h * (T::a71 * k1 + T::a73 * k3_ + T::a74 * k4_ + T::a75 * k5_ + T::a76 * k6_);
    k7_ = f(t + h, y1_);
    err_ = h * (T::e1 * k1 + T::e3 * k3_ + T::e4 * k4_ + T::e5 * k5_ + T::e6 * k6_ + T::e7 * k7_);
  }

  /// Hairer's RMS error norm scaled by the tolerances.
  double error_norm(double rel_tol, double abs_tol) const {
    const auto scale = (abs_tol + rel_tol * y0_.cwiseAbs().cwiseMax(y1_.cwiseAbs()).array());
    return std::sqrt((err_.array() / scale).square().mean());
  }

  /// Prepares the interpolant for the step just taken.
  void prepare_dense() {
    r1_ = y0_;
    r2_ = y1_ - y0_;
    r3_ = h_ * k1_ - r2_;
    r4_ = r2_ - h_ * k7_ - r3_;
    r5_ = h_ * (T::d1 * k1_ + T::d3 * k3_ + T::d4 * k4_ + T::d5 * k5_ + T::d6 * k6_ +
                T::d7 * k7_);
  }

  Vector dense(double t) const {
    const double s = (t - t_) / h_;
    const double s1 = 1.0 - s;
    return r1_ + s * (r2_ + s1 * (r3_ + s * (r4_ + s1 * r5_)));
  }

  const Vector& y_new() const { return y1_; }
  const Vector& k_last() const { return k7_; }

 private:
  double t_ = 0.0, h_ = 0.0;
  Vector y0_, y1_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, err_;
  Vector r1_, r2_, r3_, r4_, r5_;
};

/// Integrates y' = f(t, y) from t_span[0] to t_span[1] with adaptive steps and
/// returns samples at t0 + k * output_dt. Sample times are formed by
/// multiplication so they never accumulate drift.
template <typename Vector, typename Rhs>
SampledTrajectory<Vector> integrate(Rhs&& f, const Vector& y0, double t0, double t_end,
                                    const IntegratorConfig& cfg = {}) {
  cfg.validate();
  if (!(t_end > t0)) throw ConfigError("integration span must be increasing");
  if (!y0.allFinite()) throw ConfigError("initial state is not finite");

  const double span = t_end - t0;
  const auto n_out = static_cast<std::size_t>(std::floor(span / cfg.output_dt * (1.0 + 1e-12)));
  SampledTrajectory<Vector> out;
  out.times.reserve(n_out + 1);
  out.states.reserve(n_out + 1);
  out.times.push_back(t0);
  out.states.push_back(y0);
  std::size_t next = 1;
  auto sample_time = [&](std::size_t k) { return t0 + static_cast<double>(k) * cfg.output_dt; };

  Vector y = y0;
  Vector k1 = f(t0, y);
  double t = t0;

  double h = cfg.initial_step;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic.
    const auto sc = (cfg.abs_tol + cfg.rel_tol * y.cwiseAbs().array());
    const double d0 = std::sqrt((y.array() / sc).square().mean());
    const double d1 = std::sqrt((k1.array() / sc).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg.max_step);
    const Vector y1 = y + h0 * k1;
    const Vector k2 = f(t + h0, y1);
    const double d2 = std::sqrt(((k2 - k1).array() / sc).square().mean()) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, cfg.max_step});
  }

  DormandPrinceStepper<Vector> stepper;
  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 10.0;
  bool last_rejected = false;

  while (t < t_end) {
    if (out.accepted_steps + out.rejected_steps >= cfg.max_steps) {
      throw IntegrationError("maximum number of integrator steps exceeded", t);
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) {
      std::ostringstream msg;
      msg << "step size underflow at t = " << t << " s";
      throw IntegrationError(msg.str(), t);
    }
    bool final_step = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      final_step = true;
    }
    stepper.step(f, t, y, k1, h);
    const double err = stepper.error_norm(cfg.rel_tol, cfg.abs_tol);
    if (!std::isfinite(err)) {
      ++out.rejected_steps;
      h *= kMinFactor;
      last_rejected = true;
      continue;
    }
    if (err <= 1.0) {
      stepper.prepare_dense();
      const double t_new = final_step ? t_end : t + h;
      while (next <= n_out && sample_time(next) <= t_new) {
        const double ts = sample_time(next);
        out.times.push_back(ts);
        out.states.push_back(ts == t_new ? stepper.y_new() : stepper.dense(ts));
        ++next;
      }
      t = t_new;
      y = stepper.y_new();
      k1 = stepper.k_last();
      ++out.accepted_steps;
      double factor = err == 0.0 ? kMaxFactor : kSafety * std::pow(err, -0.2);
      factor = std::clamp(factor, kMinFactor, last_rejected ? 1.0 : kMaxFactor);
      h = std::min(h * factor, cfg.max_step);
      last_rejected = false;
    } else {
      ++out.rejected_steps;
      h *= std::max(kMinFactor, kSafety * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  // Round-off can leave the final grid point a hair beyond t_end.
  while (next <= n_out) {
    out.times.push_back(sample_time(next));
    out.states.push_back(y);
    ++next;
  }
  return out;
}

/// Fixed-step Dormand-Prince (5th-order solution, no error control) over
/// n_steps equal steps. Used for convergence studies.
template <typename Vector, typename Rhs>
Vector integrate_fixed(Rhs&& f, const Vector& y0, double t0, double t_end, std::size_t n_steps) {
  if (n_steps == 0 || !(t_end > t0)) throw ConfigError("fixed-step integration needs n_steps > 0");
  const double h = (t_end - t0) / static_cast<double>(n_steps);
  DormandPrinceStepper<Vector> stepper;
  Vector y = y0;
  Vector k1 = f(t0, y);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const double t = t0 + static_cast<double>(n) * h;
    stepper.step(f, t, y, k1, h);
    y = stepper.y_new();
    k1 = stepper.k_last();
  }
  return y;
}

}  // namespace dfacs

#endif  // DFACS_INTEGRATOR_HPP_
