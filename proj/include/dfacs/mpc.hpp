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

#ifndef DFACS_MPC_HPP_
#define DFACS_MPC_HPP_

// Box-constrained linear MPC on lifted models: condensed QP, projected
// Newton box-QP solver, receding-horizon controller and closed-loop runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dfacs/dynamics.hpp"
#include "dfacs/errors.hpp"
#include "dfacs/integrator.hpp"
#include "dfacs/sindy.hpp"

namespace dfacs {

// ---------------------------------------------------------------------------
// Problem types

struct MpcConfig {
  int np = 50;
  int nc = 1;
  VectorXd q;          // N
  VectorXd r;          // m
  VectorXd s;          // m
  VectorXd u_min;      // m
  VectorXd u_max;      // m
  VectorXd reference;  // N, empty means zero

  void validate(Eigen::Index n, Eigen::Index m) const {
    if (nc < 1 || np < nc) throw ConfigError("horizons must satisfy np >= nc >= 1");
    if (q.size() != n) throw ConfigError("state weight length does not match the model");
    if (r.size() != m || s.size() != m || u_min.size() != m || u_max.size() != m)
      throw ConfigError("input weight or bound length does not match the model");
    if (reference.size() != 0 && reference.size() != n) throw ConfigError("reference length does not match the model");
    if (!q.allFinite() || !r.allFinite() || !s.allFinite() || (q.array() < 0).any() || (r.array() < 0).any() ||
        (s.array() < 0).any())
      throw ConfigError("weights must be finite and non-negative");
    if (((r + s).array() <= 0).any()) throw ConfigError("each input needs a positive R or S weight");
    if (!(u_min.array() < u_max.array()).all()) throw ConfigError("input bounds must satisfy u_min < u_max");
  }
};

/// min 0.5 z'Hz + g'z + constant  s.t. lb <= z <= ub.
struct QpProblem {
  MatrixXd h;
  VectorXd g;
  VectorXd lb;
  VectorXd ub;
  double constant = 0.0;

  double objective(const VectorXd& z) const { return 0.5 * z.dot(h * z) + g.dot(z) + constant; }

  void validate() const {
    const Eigen::Index d = g.size();
    if (h.rows() != d || h.cols() != d || lb.size() != d || ub.size() != d)
      throw ConfigError("QP dimensions are inconsistent");
    if (!h.allFinite() || !g.allFinite()) throw ConfigError("QP data is not finite");
    if ((lb.array() > ub.array()).any()) throw ConfigError("QP bounds must satisfy lb <= ub");
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
      throw ConfigError("QP Hessian is not symmetric");
  }
};

// ---------------------------------------------------------------------------
// Condensation

/// Eliminates the states of
///   J = sum_{k=0}^{Np-1} e_k'Q e_k + u_k'R u_k + du_k'S du_k,
///   chi_{k+1} = A chi_k + B u_k,  e_k = chi_k - ref,  du_k = u_k - u_{k-1},
/// with u_{-1} = u_prev and u_k = u_{Nc-1} for k >= Nc. Everything that does
/// not depend on chi0, ref or u_prev is built once.
class Condenser {
 public:
  Condenser(const MatrixXd& a, const MatrixXd& b, const MpcConfig& cfg) : a_(a), b_(b), cfg_(cfg) {
    const Eigen::Index n = a.rows(), m = b.cols();
    if (a.cols() != n || b.rows() != n) throw ConfigError("model matrices have inconsistent shapes");
    if (!a.allFinite() || !b.allFinite()) throw ConfigError("model matrices are not finite");
    cfg.validate(n, m);
    const Eigen::Index d = m * cfg.nc;
    const auto& q = cfg.q;
    h_ = MatrixXd::Zero(d, d);
    f_ = MatrixXd::Zero(d, n);
    w_ = MatrixXd::Zero(d, n);
    MatrixXd gamma = MatrixXd::Zero(n, d);  // d chi_k / dU
    MatrixXd ak = MatrixXd::Identity(n, n);
    for (int k = 0; k < cfg.np; ++k) {
      const MatrixXd gq = gamma.transpose() * q.asDiagonal();
      h_ += gq * gamma;
      f_ += gq * ak;
      w_ += gq;
      const Eigen::Index blk = std::min(k, cfg.nc - 1) * m;
      h_.block(blk, blk, m, m).diagonal() += cfg.r;
      if (k < cfg.nc) {
        // du_k = u_k - u_{k-1}; only the first Nc increments can be non-zero.
        h_.block(blk, blk, m, m).diagonal() += cfg.s;
        if (k > 0) {
          const Eigen::Index prev = blk - m;
          h_.block(prev, prev, m, m).diagonal() += cfg.s;
          h_.block(blk, prev, m, m).diagonal() -= cfg.s;
          h_.block(prev, blk, m, m).diagonal() -= cfg.s;
        }
      }
      gamma = a * gamma;
      gamma.middleCols(blk, m) += b;
      ak = a * ak;
    }
    h_ *= 2.0;
    h_ = 0.5 * (h_ + h_.transpose());
  }

  Eigen::Index decision_size() const { return h_.rows(); }
  const MatrixXd& hessian() const { return h_; }

  QpProblem condense(const VectorXd& chi0, const VectorXd& u_prev) const {
    const Eigen::Index n = a_.rows(), m = b_.cols();
    if (chi0.size() != n || u_prev.size() != m) throw ConfigError("condense: vector sizes do not match the model");
    const VectorXd ref = cfg_.reference.size() ? cfg_.reference : VectorXd::Zero(n);
    QpProblem qp;
    qp.h = h_;
    qp.g = 2.0 * (f_ * chi0 - w_ * ref);
    qp.g.head(m) -= 2.0 * cfg_.s.cwiseProduct(u_prev);
    qp.lb = cfg_.u_min.replicate(cfg_.nc, 1);
    qp.ub = cfg_.u_max.replicate(cfg_.nc, 1);
    // Free response cost plus the u_prev part of the first increment.
    double c = u_prev.dot(cfg_.s.cwiseProduct(u_prev));
    VectorXd chi = chi0;
    for (int k = 0; k < cfg_.np; ++k) {
      const VectorXd e = chi - ref;
      c += e.dot(cfg_.q.cwiseProduct(e));
      chi = a_ * chi;
    }
    qp.constant = c;
    return qp;
  }

 private:
  MatrixXd a_, b_;
  MpcConfig cfg_;
  MatrixXd h_, f_, w_;
};

inline QpProblem condense(const LiftedModel& model, const MpcConfig& cfg, const VectorXd& chi0,
                          const VectorXd& u_prev) {
  return Condenser(model.a_d, model.b_d, cfg).condense(chi0, u_prev);
}

/// Direct evaluation of the MPC cost along the model recursion.
inline double mpc_cost(const MatrixXd& a, const MatrixXd& b, const MpcConfig& cfg, const VectorXd& chi0,
                       const VectorXd& u_prev, const VectorXd& decision) {
  const Eigen::Index m = b.cols();
  const VectorXd ref = cfg.reference.size() ? cfg.reference : VectorXd::Zero(a.rows());
  VectorXd chi = chi0, last = u_prev;
  double j = 0.0;
  for (int k = 0; k < cfg.np; ++k) {
    const VectorXd u = decision.segment(std::min(k, cfg.nc - 1) * m, m);
    const VectorXd e = chi - ref, du = u - last;
    j += e.dot(cfg.q.cwiseProduct(e)) + u.dot(cfg.r.cwiseProduct(u)) + du.dot(cfg.s.cwiseProduct(du));
    chi = a * chi + b * u;
    last = u;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Box QP

struct QpOptions {
  double tol = 1e-8;
  int max_iters = 100;
  double armijo = 0.1;
  double backtrack = 0.5;
  double min_step = 1e-12;
};

struct QpResult {
  VectorXd z;
  int iterations = 0;
  double objective = 0.0;
  double stationarity = 0.0;     // ||z - clip(z - grad)||_inf
  double complementarity = 0.0;  // max_i bound-multiplier x slack
};

namespace detail {

inline VectorXd clip(const VectorXd& z, const VectorXd& lb, const VectorXd& ub) { return z.cwiseMax(lb).cwiseMin(ub); }

inline void kkt_residuals(const QpProblem& qp, const VectorXd& z, double& stat, double& comp) {
  const VectorXd grad = qp.h * z + qp.g;
  stat = (z - clip(z - grad, qp.lb, qp.ub)).cwiseAbs().maxCoeff();
  comp = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // grad = mu_lb - mu_ub with mu >= 0.
    const double mu_lb = std::max(grad[i], 0.0), mu_ub = std::max(-grad[i], 0.0);
    comp = std::max({comp, mu_lb * (z[i] - qp.lb[i]), mu_ub * (qp.ub[i] - z[i])});
  }
}

}  // namespace detail

/// Projected Newton method for strictly convex box QPs. Variables sitting on
/// a bound with the gradient pushing outward are clamped; a Newton step is
/// taken on the rest and projected back onto the box with an Armijo
/// backtracking search. Iterates are always clipped, so feasibility is exact.
inline QpResult solve_qp(const QpProblem& qp, const QpOptions& opt = {}, const VectorXd& warm_start = {}) {
  qp.validate();
  const Eigen::Index d = qp.g.size();
  QpResult res;
  VectorXd z = warm_start.size() == d ? detail::clip(warm_start, qp.lb, qp.ub)
                                      : detail::clip(VectorXd::Zero(d), qp.lb, qp.ub);
  double fz = qp.objective(z);
  for (int it = 0; it <= opt.max_iters; ++it) {
    res.iterations = it;
    detail::kkt_residuals(qp, z, res.stationarity, res.complementarity);
    if (res.stationarity <= opt.tol && res.complementarity <= opt.tol) {
      res.z = z;
      res.objective = fz;
      return res;
    }
    if (it == opt.max_iters) break;
    const VectorXd grad = qp.h * z + qp.g;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < d; ++i) {
      const bool clamped = (z[i] <= qp.lb[i] && grad[i] > 0.0) || (z[i] >= qp.ub[i] && grad[i] < 0.0);
      if (!clamped) free.push_back(i);
    }
    VectorXd dir = VectorXd::Zero(d);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      MatrixXd hff(nf, nf);
      VectorXd gf(nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        gf[i] = grad[free[i]];
        for (Eigen::Index j = 0; j < nf; ++j) hff(i, j) = qp.h(free[i], free[j]);
      }
      Eigen::LLT<MatrixXd> llt(hff);
      if (llt.info() != Eigen::Success) throw SolverError("QP Hessian is not positive definite", z, res.stationarity, res.complementarity);
      const VectorXd step = llt.solve(-gf);
      for (Eigen::Index i = 0; i < nf; ++i) dir[free[i]] = step[i];
    }
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= opt.min_step) {
      const VectorXd trial = detail::clip(z + alpha * dir, qp.lb, qp.ub);
      const double ft = qp.objective(trial);
      if (ft <= fz + opt.armijo * grad.dot(trial - z)) {
        accepted = (trial != z);
        z = trial;
        fz = ft;
        break;
      }
      alpha *= opt.backtrack;
    }
    if (!accepted) break;
  }
  detail::kkt_residuals(qp, z, res.stationarity, res.complementarity);
  if (res.stationarity <= opt.tol && res.complementarity <= opt.tol) {
    res.z = z;
    res.objective = fz;
    return res;
  }
  throw SolverError("box QP did not converge", z, res.stationarity, res.complementarity);
}

// ---------------------------------------------------------------------------
// Stacked controller

/// Tuning bound to named dictionary blocks. Blocks without an entry get zero
/// state weight; every input block needs R (or S) and a bound.
struct ControllerSettings {
  int np = 50;
  int nc = 1;
  std::map<std::string, double> state_weights;
  std::map<std::string, double> input_weights;
  std::map<std::string, double> increment_weights;
  std::map<std::string, double> input_limits;  // symmetric |u| <= limit
  QpOptions qp;

  nlohmann::json to_json() const {
    return {{"np", np},
            {"nc", nc},
            {"state_weights", state_weights},
            {"input_weights", input_weights},
            {"increment_weights", increment_weights},
            {"input_limits", input_limits},
            {"qp_tol", qp.tol},
            {"qp_max_iters", qp.max_iters}};
  }
};

inline ControllerSettings default_controller_settings() {
  ControllerSettings s;
  s.state_weights = {{"theta_SI", 600.0}, {"zeta", 10.0},     {"r_MO1", 0.005},
                     {"theta_MO1", 0.0004}, {"r_MO2", 0.005}, {"theta_MO2", 0.0004}};
  s.input_weights = {{"M_T", 18.0}, {"M_MOSA", 20.0}, {"F_E1", 0.01}, {"M_E1", 0.001}, {"F_E2", 0.01}, {"M_E2", 0.001}};
  s.increment_weights = {{"M_T", 0.0}, {"M_MOSA", 0.0}, {"F_E1", 0.0}, {"M_E1", 0.0}, {"F_E2", 0.0}, {"M_E2", 0.0}};
  s.input_limits = {{"M_T", 2e-5}, {"M_MOSA", 2e-5}, {"F_E1", 1e-6}, {"M_E1", 1e-6}, {"F_E2", 1e-6}, {"M_E2", 1e-6}};
  return s;
}

/// Block-diagonal union of several lifted models.
struct StackedModel {
  MatrixXd a_d, b_d;
  std::vector<const LiftedModel*> parts;
  std::vector<Eigen::Index> state_offset, input_offset;
  std::vector<int> channels;  // physical input channel of each stacked input

  explicit StackedModel(std::vector<const LiftedModel*> models) : parts(std::move(models)) {
    Eigen::Index n = 0, m = 0;
    double dt = 0.0;
    for (const LiftedModel* p : parts) {
      if (dt != 0.0 && p->dt != dt) throw ConfigError("stacked models use different sample times");
      dt = p->dt;
      state_offset.push_back(n);
      input_offset.push_back(m);
      n += p->n_state();
      m += p->n_input();
      for (const auto& in : p->dictionary.input_observables()) {
        if (std::find(channels.begin(), channels.end(), in.channel) != channels.end())
          throw ConfigError("input channel " + in.name + " is driven by two models");
        channels.push_back(in.channel);
      }
    }
    a_d = MatrixXd::Zero(n, n);
    b_d = MatrixXd::Zero(n, m);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      a_d.block(state_offset[i], state_offset[i], parts[i]->n_state(), parts[i]->n_state()) = parts[i]->a_d;
      b_d.block(state_offset[i], input_offset[i], parts[i]->n_state(), parts[i]->n_input()) = parts[i]->b_d;
    }
  }

  double dt() const { return parts.empty() ? 0.0 : parts.front()->dt; }

  VectorXd lift(const PlantState& x) const {
    VectorXd chi(a_d.rows());
    for (std::size_t i = 0; i < parts.size(); ++i)
      chi.segment(state_offset[i], parts[i]->n_state()) = parts[i]->dictionary.lift(x);
    return chi;
  }

  /// Builds MpcConfig vectors from named-block settings.
  MpcConfig config(const ControllerSettings& s) const {
    MpcConfig c;
    c.np = s.np;
    c.nc = s.nc;
    c.q = VectorXd::Zero(a_d.rows());
    c.r = VectorXd::Zero(b_d.cols());
    c.s = VectorXd::Zero(b_d.cols());
    c.u_min = VectorXd::Zero(b_d.cols());
    c.u_max = VectorXd::Zero(b_d.cols());
    std::map<std::string, bool> used;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Dictionary& d = parts[i]->dictionary;
      for (const auto& [name, w] : s.state_weights) {
        if (!d.has_state_block(name)) continue;
        const Block& b = d.state_block(name);
        c.q.segment(state_offset[i] + b.offset, b.size).setConstant(w);
        used[name] = true;
      }
      for (const Block& b : d.input_blocks()) {
        auto get = [&](const std::map<std::string, double>& m, double fallback, bool required) {
          const auto it = m.find(b.name);
          if (it == m.end()) {
            if (required) throw ConfigError("no setting for input block " + b.name);
            return fallback;
          }
          return it->second;
        };
        const Eigen::Index o = input_offset[i] + b.offset;
        c.r.segment(o, b.size).setConstant(get(s.input_weights, 0.0, true));
        c.s.segment(o, b.size).setConstant(get(s.increment_weights, 0.0, false));
        const double lim = get(s.input_limits, 0.0, true);
        if (!(lim > 0.0)) throw ConfigError("input limit for " + b.name + " must be positive");
        c.u_max.segment(o, b.size).setConstant(lim);
        c.u_min.segment(o, b.size).setConstant(-lim);
      }
    }
    for (const auto& [name, w] : s.state_weights)
      if (!used.count(name)) throw ConfigError("state weight for unknown block " + name);
    c.validate(a_d.rows(), b_d.cols());
    return c;
  }
};

struct ControlStepInfo {
  double cost = 0.0;     // full horizon cost at the applied decision
  int iterations = 0;
  bool fault = false;
  std::string fault_message;
};

/// Receding-horizon controller over a stack of lifted models. The decision
/// is solved in units of the input bounds so the QP tolerance is scale-free.
class MpcController {
 public:
  /// Maps the stacked MPC input (written into its physical channels, other
  /// channels zero) to the actuator command.
  using InputTransform = std::function<InputVector(const PlantState&, const InputVector&)>;

  MpcController(std::vector<const LiftedModel*> models, const ControllerSettings& settings,
                InputTransform transform = {})
      : stack_(std::move(models)),
        settings_(settings),
        cfg_(stack_.config(settings)),
        condenser_(stack_.a_d, stack_.b_d, cfg_),
        transform_(std::move(transform)) {
    const Eigen::Index m = stack_.b_d.cols();
    scale_ = 0.5 * (cfg_.u_max - cfg_.u_min);
    const VectorXd sd = scale_.replicate(cfg_.nc, 1);
    scaled_h_ = sd.asDiagonal() * condenser_.hessian() * sd.asDiagonal();
    h_norm_ = scaled_h_.diagonal().maxCoeff();
    if (!(h_norm_ > 0.0)) throw ConfigError("MPC Hessian is degenerate");
    scaled_h_ /= h_norm_;
    scaled_h_ = 0.5 * (scaled_h_ + scaled_h_.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled_h_, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw ConfigError("MPC Hessian is not positive definite");
    u_prev_ = VectorXd::Zero(m);
    applied_ = InputVector::Zero();
  }

  const MpcConfig& config() const { return cfg_; }
  const StackedModel& model() const { return stack_; }
  Eigen::Index decision_size() const { return condenser_.decision_size(); }
  void reset() {
    u_prev_.setZero();
    applied_.setZero();
    warm_.resize(0);
  }

  /// The condensed QP for the current stored u_prev.
  QpProblem problem(const PlantState& x) const { return condenser_.condense(stack_.lift(x), u_prev_); }

  ControlInput control_step(const PlantState& x, ControlStepInfo* info = nullptr) {
    ControlStepInfo local;
    ControlStepInfo& out = info ? *info : local;
    out = {};
    try {
      if (!x.all_finite()) throw SolverError("state is not finite", {}, 0.0, 0.0);
      const QpProblem qp = problem(x);
      const VectorXd sd = scale_.replicate(cfg_.nc, 1);
      QpProblem sq;
      sq.h = scaled_h_;
      sq.g = sd.cwiseProduct(qp.g) / h_norm_;
      sq.lb = qp.lb.cwiseQuotient(sd);
      sq.ub = qp.ub.cwiseQuotient(sd);
      const QpResult r = solve_qp(sq, settings_.qp, warm_);
      const VectorXd z = r.z.cwiseProduct(sd).cwiseMax(qp.lb).cwiseMin(qp.ub);
      const Eigen::Index m = stack_.b_d.cols();
      const VectorXd first = z.head(m);
      InputVector ubar = InputVector::Zero();
      for (Eigen::Index j = 0; j < m; ++j) ubar[stack_.channels[static_cast<std::size_t>(j)]] = first[j];
      InputVector u = transform_ ? transform_(x, ubar) : ubar;
      if (!u.allFinite()) throw SolverError("input transform returned a non-finite command", z, 0.0, 0.0);
      out.cost = qp.objective(z);
      out.iterations = r.iterations;
      warm_ = r.z;
      u_prev_ = first;
      applied_ = u;
    } catch (const Error& e) {
      out.fault = true;
      out.fault_message = std::string(e.kind()) + ": " + e.what();
    }
    return ControlInput::from_vector(applied_);
  }

 private:
  StackedModel stack_;
  ControllerSettings settings_;
  MpcConfig cfg_;
  Condenser condenser_;
  InputTransform transform_;
  VectorXd scale_;
  MatrixXd scaled_h_;
  double h_norm_ = 1.0;
  VectorXd u_prev_;
  VectorXd warm_;
  InputVector applied_;
};

// ---------------------------------------------------------------------------
// Closed loop

struct CaptureThresholds {
  double position = 1e-6;  // m, per axis
  double angle = 1e-5;     // rad, per axis
  double cage = 2e-3;      // m, per axis
};

struct ClosedLoopLog {
  std::vector<double> times;
  std::vector<StateVector> states;  // state at the start of each step
  std::vector<InputVector> inputs;  // command held over the step
  std::vector<double> cost;
  std::vector<int> iterations;
  std::vector<std::pair<int, std::string>> faults;  // (step, message)
  StateVector final_state = StateVector::Zero();
  double final_time = 0.0;
};

struct CaptureSummary {
  double capture_time[kNumTestMasses] = {-1.0, -1.0};  // first time from which the TM stays inside thresholds; -1 if never
  double max_position[kNumTestMasses] = {0.0, 0.0};
  double max_angle[kNumTestMasses] = {0.0, 0.0};
  InputVector max_abs_input = InputVector::Zero();
  int bound_violations = 0;
  int faults = 0;
  bool cage_contact = false;
  bool captured() const { return capture_time[0] >= 0.0 && capture_time[1] >= 0.0 && !cage_contact; }
};

inline CaptureSummary summarize_capture(const ClosedLoopLog& log, const InputVector& u_limit,
                                        const CaptureThresholds& th = {}) {
  CaptureSummary s;
  s.faults = static_cast<int>(log.faults.size());
  std::vector<StateVector> states = log.states;
  std::vector<double> times = log.times;
  states.push_back(log.final_state);
  times.push_back(log.final_time);
  for (int i = 0; i < kNumTestMasses; ++i) {
    using namespace state_index;
    bool inside_from_here = true;
    for (std::size_t k = states.size(); k-- > 0;) {
      const auto r = states[k].segment<3>(test_mass(i, kR)).cwiseAbs();
      const auto a = states[k].segment<3>(test_mass(i, kTheta)).cwiseAbs();
      s.max_position[i] = std::max(s.max_position[i], r.maxCoeff());
      s.max_angle[i] = std::max(s.max_angle[i], a.maxCoeff());
      if (r.maxCoeff() >= th.cage) s.cage_contact = true;
      inside_from_here = inside_from_here && r.maxCoeff() < th.position && a.maxCoeff() < th.angle;
      if (inside_from_here) s.capture_time[i] = times[k];
    }
  }
  for (const InputVector& u : log.inputs) {
    s.max_abs_input = s.max_abs_input.cwiseMax(u.cwiseAbs());
    for (int j = 0; j < input_index::kDim; ++j)
      if (std::abs(u[j]) > u_limit[j]) ++s.bound_violations;
  }
  return s;
}

/// Per-channel magnitude limits of the controller (zero on channels it does
/// not drive, so any use of those counts as a violation).
inline InputVector channel_limits(const MpcController& c) {
  InputVector lim = InputVector::Zero();
  const auto& ch = c.model().channels;
  for (std::size_t j = 0; j < ch.size(); ++j)
    lim[ch[j]] = std::max(std::abs(c.config().u_min[static_cast<Eigen::Index>(j)]),
                          std::abs(c.config().u_max[static_cast<Eigen::Index>(j)]));
  return lim;
}

/// Alternates one control step with one sample interval of the nonlinear
/// plant under the held command.
inline ClosedLoopLog run_closed_loop(const SatellitePlant& plant, MpcController& controller, const PlantState& x0,
                                     double duration, double dt, IntegratorConfig icfg = {}) {
  if (!(duration > 0.0) || !(dt > 0.0)) throw ConfigError("closed loop needs positive duration and step");
  const auto steps = static_cast<int>(std::llround(duration / dt));
  icfg.output_dt = dt;
  icfg.max_step = std::min(icfg.max_step, dt);
  ClosedLoopLog log;
  log.times.reserve(static_cast<std::size_t>(steps));
  StateVector x = x0.to_vector();
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    ControlStepInfo info;
    const ControlInput u = controller.control_step(PlantState::from_vector(x), &info);
    if (info.fault) log.faults.emplace_back(k, info.fault_message);
    const InputVector uv = u.to_vector();
    log.times.push_back(t);
    log.states.push_back(x);
    log.inputs.push_back(uv);
    log.cost.push_back(info.cost);
    log.iterations.push_back(info.iterations);
    // Local time keeps the sample grid exact for long runs.
    auto rhs = [&](double tau, const StateVector& y) { return plant.derivative(y, uv, t + tau); };
    const auto seg = integrate(rhs, x, 0.0, dt, icfg);
    x = seg.states.back();
  }
  log.final_state = x;
  log.final_time = steps * dt;
  return log;
}

}  // namespace dfacs

#endif  // DFACS_MPC_HPP_
