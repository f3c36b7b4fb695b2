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

#ifndef DFACS_SINDY_HPP_
#define DFACS_SINDY_HPP_

// Sparse identification of lifted linear models by sequential thresholded
// least squares (STLS), zero-order-hold discretization and multi-step
// prediction.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <json.hpp>

#include "dfacs/dataset.hpp"
#include "dfacs/dictionary.hpp"
#include "dfacs/errors.hpp"
#include "dfacs/io.hpp"

namespace dfacs {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct StlsOptions {
  double lambda = 1e-13;
  int max_iters = 20;
  bool scale_columns = true;
};

/// Library matrix Theta (rows = snapshots) and targets X_dot_lift.
struct RegressionProblem {
  MatrixXd theta;
  MatrixXd targets;
  StlsOptions options;

  void validate() const {
    if (theta.rows() != targets.rows())
      throw ConfigError("library and target row counts differ");
    if (theta.cols() == 0 || targets.cols() == 0) throw ConfigError("empty regression problem");
    if (!(options.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (options.max_iters < 1) throw ConfigError("max_iters must be at least 1");
    if (!theta.allFinite() || !targets.allFinite())
      throw ConfigError("regression data contains non-finite entries");
  }
};

struct StlsDiagnostics {
  int iterations = 0;
  bool converged = false;
  bool underdetermined = false;        // fewer rows than library columns
  std::vector<bool> rank_deficient;    // per target column, any restricted solve
  std::vector<bool> empty_support;     // per target column
  std::vector<int> support_size;       // per target column
  std::vector<double> residual_norm;   // ||y_k - Theta xi_k|| per target column
  std::vector<std::vector<int>> support_history;  // total support size per iteration

  nlohmann::json to_json() const {
    return {{"iterations", iterations},
            {"converged", converged},
            {"underdetermined", underdetermined},
            {"rank_deficient", rank_deficient},
            {"empty_support", empty_support},
            {"support_size", support_size},
            {"residual_norm", residual_norm}};
  }
};

struct StlsResult {
  MatrixXd xi;        // library columns x targets
  MaskMatrix support;
  StlsDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Library construction

/// Evaluates [Psi Psi_bar Psi_u] at every interior snapshot of the given
/// trajectories, with targets d/dt Psi from the chain rule on (x, x_dot).
inline RegressionProblem lift_dataset(const std::vector<const Trajectory*>& trajectories,
                                      const Dictionary& dict, const StlsOptions& options = {}) {
  Eigen::Index rows = 0;
  for (const Trajectory* t : trajectories) {
    if (t->x.cols() != state_index::kDim || t->u.cols() != input_index::kDim)
      throw ConfigError("trajectory dimensions do not match the plant");
    if (t->x_dot.rows() != t->x.rows() - 4 || t->u.rows() != t->x.rows())
      throw ConfigError("trajectory row counts are inconsistent");
    rows += t->x_dot.rows();
  }
  RegressionProblem p;
  p.options = options;
  p.theta.resize(rows, dict.n_library());
  p.targets.resize(rows, dict.n_state());
  Eigen::Index r = 0;
  for (const Trajectory* t : trajectories) {
    for (Eigen::Index j = 0; j < t->x_dot.rows(); ++j, ++r) {
      const StateVector x = t->x.row(j + 2).transpose();
      const InputVector u = t->u.row(j + 2).transpose();
      const StateVector xd = t->x_dot.row(j).transpose();
      p.theta.row(r) = dict.library_row(x, u).transpose();
      p.targets.row(r) = dict.lift_rate(x, xd).transpose();
    }
  }
  return p;
}

inline RegressionProblem lift_dataset(const TrajectoryDataset& ds, Split split, const Dictionary& dict,
                                      const StlsOptions& options = {}) {
  return lift_dataset(ds.select(split), dict, options);
}

// ---------------------------------------------------------------------------
// STLS

namespace detail {

// Least squares restricted to the columns in `support`, solved on the
// triangular factor R of Theta: min ||z - R_S xi_S|| has the same minimiser
// as min ||y - Theta_S xi_S|| because Q^T is an isometry onto range(Theta).
// Rank-deficient supports get the minimum-norm solution.
inline VectorXd restricted_solve(const MatrixXd& r, const VectorXd& z, const std::vector<int>& support,
                                 bool& rank_deficient) {
  VectorXd xi = VectorXd::Zero(r.cols());
  if (support.empty()) return xi;
  MatrixXd rs(r.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) rs.col(static_cast<Eigen::Index>(k)) = r.col(support[k]);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(rs);
  if (cod.rank() < rs.cols()) rank_deficient = true;
  const VectorXd sol = cod.solve(z);
  for (std::size_t k = 0; k < support.size(); ++k) xi[support[k]] = sol[static_cast<Eigen::Index>(k)];
  return xi;
}

}  // namespace detail

/// Sequential thresholded least squares. Starting from the least-squares
/// solution on `initial_support` (all columns when empty), repeatedly zeroes
/// coefficients whose magnitude is below lambda and re-solves each target
/// column on its surviving columns, until the support stops changing or
/// max_iters is reached. With column scaling the threshold is applied to the
/// coefficients of the unit-RMS library; the returned coefficients are in
/// the original units.
inline StlsResult stls(const RegressionProblem& problem, const MaskMatrix& initial_support = {}) {
  problem.validate();
  const Eigen::Index n_rows = problem.theta.rows();
  const Eigen::Index n_lib = problem.theta.cols();
  const Eigen::Index n_tgt = problem.targets.cols();
  const StlsOptions& opt = problem.options;

  VectorXd scale = VectorXd::Ones(n_lib);
  if (opt.scale_columns) {
    for (Eigen::Index j = 0; j < n_lib; ++j) {
      const double rms = problem.theta.col(j).norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(n_rows, 1)));
      scale[j] = rms > 0.0 ? rms : 1.0;
    }
  }
  const MatrixXd scaled = problem.theta * scale.cwiseInverse().asDiagonal();

  StlsResult res;
  StlsDiagnostics& diag = res.diagnostics;
  diag.underdetermined = n_rows < n_lib;
  diag.rank_deficient.assign(static_cast<std::size_t>(n_tgt), false);

  // Reduce once: Theta_scaled = Q R, z = Q^T Y.
  MatrixXd r, z;
  if (n_rows >= n_lib) {
    Eigen::HouseholderQR<MatrixXd> qr(scaled);
    r = qr.matrixQR().topRows(n_lib).triangularView<Eigen::Upper>();
    z = (qr.householderQ().transpose() * problem.targets).topRows(n_lib);
  } else {
    r = scaled;
    z = problem.targets;
  }

  MaskMatrix support = initial_support.size() ? initial_support : MaskMatrix::Constant(n_lib, n_tgt, true);
  if (support.rows() != n_lib || support.cols() != n_tgt)
    throw ConfigError("initial support has the wrong shape");

  auto support_list = [&](Eigen::Index k) {
    std::vector<int> s;
    for (Eigen::Index j = 0; j < n_lib; ++j)
      if (support(j, k)) s.push_back(static_cast<int>(j));
    return s;
  };
  auto solve_all = [&](MatrixXd& xi) {
    for (Eigen::Index k = 0; k < n_tgt; ++k) {
      bool rd = false;
      xi.col(k) = detail::restricted_solve(r, z.col(k), support_list(k), rd);
      if (rd) diag.rank_deficient[static_cast<std::size_t>(k)] = true;
    }
  };

  MatrixXd xi(n_lib, n_tgt);
  solve_all(xi);
  diag.support_history.push_back({static_cast<int>(support.count())});
  for (int it = 0; it < opt.max_iters; ++it) {
    const MaskMatrix next = support.array() && (xi.array().abs() >= opt.lambda);
    diag.iterations = it + 1;
    if (next == support) {
      diag.converged = true;
      break;
    }
    support = next;
    diag.support_history.push_back({static_cast<int>(support.count())});
    solve_all(xi);
  }
  // Exact zeros off the support, then undo the column scaling.
  xi = (support.array()).select(xi, 0.0);
  res.xi = scale.cwiseInverse().asDiagonal() * xi;
  res.support = support;

  const MatrixXd resid = problem.targets - problem.theta * res.xi;
  for (Eigen::Index k = 0; k < n_tgt; ++k) {
    diag.residual_norm.push_back(resid.col(k).norm());
    const int count = static_cast<int>(support.col(k).count());
    diag.support_size.push_back(count);
    diag.empty_support.push_back(count == 0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Lifted linear model

struct LiftedModel {
  Dictionary dictionary;
  MatrixXd xi;      // (N + N_bar + M) x N
  MaskMatrix support;
  MatrixXd a;       // N x N
  MatrixXd a_bar;   // N x N_bar (dropped from the linear model)
  MatrixXd b;       // N x M
  MatrixXd a_d;     // N x N
  MatrixXd b_d;     // N x M
  double dt = 0.1;
  nlohmann::json diagnostics = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();

  int n_state() const { return static_cast<int>(a.rows()); }
  int n_input() const { return static_cast<int>(b.cols()); }
};

/// Zero-order-hold discretization: exp([[A, B], [0, 0]] dt) = [[A_D, B_D], [0, I]].
inline std::pair<MatrixXd, MatrixXd> discretize_zoh(const MatrixXd& a, const MatrixXd& b, double dt) {
  const Eigen::Index n = a.rows(), m = b.cols();
  MatrixXd aug = MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a * dt;
  aug.topRightCorner(n, m) = b * dt;
  const MatrixXd e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

/// Splits Xi by the dictionary's column blocks (A^T; A_bar^T; B^T) and
/// discretizes the linear part at dt.
inline LiftedModel assemble_model(const MatrixXd& xi, const Dictionary& dict, double dt,
                                  const MaskMatrix& support = {}) {
  const int n = dict.n_state(), nb = dict.n_compensation(), m = dict.n_input();
  if (xi.rows() != dict.n_library() || xi.cols() != n)
    throw ConfigError("coefficient matrix does not match the dictionary");
  if (!xi.allFinite()) throw ConfigError("coefficient matrix is not finite");
  if (!(dt > 0.0)) throw ConfigError("discretization step must be positive");
  LiftedModel model;
  model.dictionary = dict;
  model.xi = xi;
  model.support = support.size() ? support : MaskMatrix((xi.array() != 0.0).matrix());
  model.a = xi.topRows(n).transpose();
  model.a_bar = xi.middleRows(n, nb).transpose();
  model.b = xi.bottomRows(m).transpose();
  model.dt = dt;
  std::tie(model.a_d, model.b_d) = discretize_zoh(model.a, model.b, dt);
  return model;
}

/// Fits one subsystem model on the training split.
inline LiftedModel fit_model(const TrajectoryDataset& ds, const Dictionary& dict, const StlsOptions& options) {
  const RegressionProblem problem = lift_dataset(ds, Split::kTrain, dict, options);
  const StlsResult res = stls(problem);
  LiftedModel model = assemble_model(res.xi, dict, ds.dt, res.support);
  model.diagnostics = res.diagnostics.to_json();
  model.diagnostics["rows"] = problem.theta.rows();
  model.diagnostics["lambda"] = options.lambda;
  model.diagnostics["scale_columns"] = options.scale_columns;
  model.diagnostics["max_iters"] = options.max_iters;
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

struct LiftedPrediction {
  MatrixXd chi;       // (steps + 1) x N, row 0 = lift(x0)
  MatrixXd physical;  // (steps + 1) x 34, raw states covered by the dictionary (others 0)
};

/// Iterates chi_{k+1} = A_D chi_k + B_D Psi_u(u_k) from chi_0 = Psi(x0).
inline LiftedPrediction predict(const LiftedModel& model, const PlantState& x0,
                                const std::vector<ControlInput>& inputs, int steps) {
  if (steps < 1) throw ConfigError("prediction needs at least one step");
  if (static_cast<int>(inputs.size()) < steps) throw ConfigError("not enough inputs for the prediction horizon");
  const Dictionary& d = model.dictionary;
  LiftedPrediction out;
  out.chi.resize(steps + 1, d.n_state());
  VectorXd chi = d.lift(x0);
  out.chi.row(0) = chi.transpose();
  for (int k = 0; k < steps; ++k) {
    chi = model.a_d * chi + model.b_d * d.lift_inputs(inputs[static_cast<std::size_t>(k)]);
    out.chi.row(k + 1) = chi.transpose();
  }
  out.physical = MatrixXd::Zero(steps + 1, state_index::kDim);
  for (const auto& [obs, state] : d.linear_observables()) out.physical.col(state) = out.chi.col(obs);
  return out;
}

/// Per-sample mean absolute error over the columns [first, first + count).
inline VectorXd prediction_error(const MatrixXd& truth, const MatrixXd& predicted, int first, int count) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    throw AlignmentError("true and predicted trajectories are not aligned");
  if (first < 0 || count <= 0 || first + count > truth.cols())
    throw ConfigError("error block out of range");
  return (truth.middleCols(first, count) - predicted.middleCols(first, count)).cwiseAbs().rowwise().mean();
}

/// Error of a named dictionary block, compared on the lifted coordinates.
inline VectorXd prediction_error(const MatrixXd& true_chi, const MatrixXd& predicted_chi, const Block& block) {
  return prediction_error(true_chi, predicted_chi, block.offset, block.size);
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw IoError("matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw IoError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline nlohmann::json mask_to_json(const MaskMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::string row(static_cast<std::size_t>(m.cols()), '0');
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j)) row[static_cast<std::size_t>(j)] = '1';
    rows.push_back(row);
  }
  return rows;
}

inline MaskMatrix mask_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows) throw IoError("support mask row count mismatch");
  MaskMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto s = j[static_cast<std::size_t>(i)].get<std::string>();
    if (static_cast<Eigen::Index>(s.size()) != cols) throw IoError("support mask column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = s[static_cast<std::size_t>(c)] == '1';
  }
  return m;
}

}  // namespace detail

/// Self-describing model document: dictionary, Xi with its support mask,
/// A, B, A_D, B_D (and A_bar) as dense row arrays, dt, diagnostics and
/// metadata. Doubles are written in shortest round-trip form, so loading
/// reproduces every matrix bit for bit.
inline nlohmann::json model_to_json(const LiftedModel& m) {
  return {{"format", "dfacs-lifted-model"},
          {"version", 1},
          {"dictionary", m.dictionary.to_json()},
          {"dt", m.dt},
          {"xi", detail::matrix_to_json(m.xi)},
          {"support", detail::mask_to_json(m.support)},
          {"A", detail::matrix_to_json(m.a)},
          {"A_bar", detail::matrix_to_json(m.a_bar)},
          {"B", detail::matrix_to_json(m.b)},
          {"A_D", detail::matrix_to_json(m.a_d)},
          {"B_D", detail::matrix_to_json(m.b_d)},
          {"diagnostics", m.diagnostics},
          {"metadata", m.metadata}};
}

inline LiftedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "dfacs-lifted-model") throw IoError("not a lifted model document");
  LiftedModel m;
  m.dictionary = Dictionary::from_json(j.at("dictionary"));
  m.dt = j.at("dt").get<double>();
  m.xi = detail::matrix_from_json(j.at("xi"));
  m.support = detail::mask_from_json(j.at("support"), m.xi.rows(), m.xi.cols());
  m.a = detail::matrix_from_json(j.at("A"));
  m.a_bar = detail::matrix_from_json(j.at("A_bar"));
  m.b = detail::matrix_from_json(j.at("B"));
  m.a_d = detail::matrix_from_json(j.at("A_D"));
  m.b_d = detail::matrix_from_json(j.at("B_D"));
  m.diagnostics = j.value("diagnostics", nlohmann::json::object());
  m.metadata = j.value("metadata", nlohmann::json::object());
  const int n = m.dictionary.n_state(), k = m.dictionary.n_input();
  if (m.a.rows() != n || m.a.cols() != n || m.b.rows() != n || m.b.cols() != k || m.a_d.rows() != n ||
      m.b_d.cols() != k || m.xi.rows() != m.dictionary.n_library())
    throw IoError("model matrices do not match the dictionary");
  return m;
}

inline void save_model(const LiftedModel& m, const std::filesystem::path& path) {
  write_json(path, model_to_json(m));
}

inline LiftedModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

}  // namespace dfacs

#endif  // DFACS_SINDY_HPP_
