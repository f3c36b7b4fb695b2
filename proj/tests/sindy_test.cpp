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


// Tests for include/dfacs/sindy.hpp.

#include "dfacs/sindy.hpp"

#include <algorithm>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

namespace dfacs {
namespace {

MatrixXd RandomMatrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

RegressionProblem Problem(const MatrixXd& theta, const MatrixXd& y, double lambda, bool scale = true) {
  RegressionProblem p;
  p.theta = theta;
  p.targets = y;
  p.options.lambda = lambda;
  p.options.scale_columns = scale;
  return p;
}

TEST(StlsTest, ZeroThresholdIsLeastSquares) {
  const MatrixXd theta = RandomMatrix(60, 8, 1);
  const MatrixXd y = RandomMatrix(60, 3, 2);
  const StlsResult r = stls(Problem(theta, y, 0.0));
  const MatrixXd ref = theta.colPivHouseholderQr().solve(y);
  EXPECT_LT((r.xi - ref).norm(), 1e-10 * ref.norm());
  EXPECT_TRUE(r.diagnostics.converged);
  EXPECT_EQ(r.support.count(), 24);
}

// Exhaustive search over all supports of the true size: the residual
// minimiser must be the support STLS returns.
TEST(StlsTest, MatchesBestSubsetOracle) {
  const int n_lib = 8;
  const MatrixXd theta = RandomMatrix(80, n_lib, 3);
  VectorXd truth = VectorXd::Zero(n_lib);
  truth[1] = 2.0;
  truth[4] = -1.5;
  truth[6] = 0.7;
  const VectorXd noise = 1e-4 * RandomMatrix(80, 1, 4);
  const VectorXd y = theta * truth + noise;
  const StlsResult r = stls(Problem(theta, y, 0.05));
  ASSERT_EQ(r.support.count(), 3);

  double best = 1e300;
  int best_mask = -1;
  for (int mask = 0; mask < (1 << n_lib); ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
    std::vector<int> cols;
    for (int j = 0; j < n_lib; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    MatrixXd sub(theta.rows(), 3);
    for (int k = 0; k < 3; ++k) sub.col(k) = theta.col(cols[k]);
    const VectorXd c = sub.colPivHouseholderQr().solve(y);
    const double res = (y - sub * c).norm();
    if (res < best) best = res, best_mask = mask;
  }
  for (int j = 0; j < n_lib; ++j) EXPECT_EQ(r.support(j, 0), bool(best_mask & (1 << j))) << j;
  EXPECT_NEAR(r.diagnostics.residual_norm[0], best, 1e-12 * std::max(best, 1.0));
}

TEST(StlsTest, RecoversExactSparseModel) {
  const MatrixXd theta = RandomMatrix(50, 10, 5);
  MatrixXd truth = MatrixXd::Zero(10, 2);
  truth(0, 0) = 1.0;
  truth(9, 0) = -3.0;
  truth(5, 1) = 0.25;
  const StlsResult r = stls(Problem(theta, theta * truth, 1e-6));
  EXPECT_LT((r.xi - truth).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(r.support.count(), 3);
}

TEST(StlsTest, IdempotentFromOwnSupport) {
  const MatrixXd theta = RandomMatrix(40, 7, 6);
  const MatrixXd y = RandomMatrix(40, 2, 7);
  const RegressionProblem p = Problem(theta, y, 0.1);
  const StlsResult a = stls(p);
  const StlsResult b = stls(p, a.support);
  EXPECT_TRUE(a.support == b.support);
  EXPECT_LT((a.xi - b.xi).norm(), 1e-12 * (1.0 + a.xi.norm()));
  EXPECT_EQ(b.diagnostics.iterations, 1);
}

TEST(StlsTest, SupportShrinksMonotonically) {
  const MatrixXd theta = RandomMatrix(40, 12, 8);
  const MatrixXd y = RandomMatrix(40, 4, 9);
  const StlsResult r = stls(Problem(theta, y, 0.15));
  const auto& h = r.diagnostics.support_history;
  ASSERT_GE(h.size(), 2u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i][0], h[i - 1][0]);
  // Every surviving coefficient clears the threshold in unit-RMS units.
  for (Eigen::Index j = 0; j < theta.cols(); ++j) {
    const double s = theta.col(j).norm() / std::sqrt(40.0);
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
      if (!r.support(j, k)) continue;
      EXPECT_GE(std::abs(r.xi(j, k)) * s, 0.15 * (1 - 1e-12));
    }
  }
}

TEST(StlsTest, ColumnScalingInvariance) {
  const MatrixXd theta = RandomMatrix(50, 6, 10);
  const MatrixXd y = RandomMatrix(50, 2, 11);
  MatrixXd scaled = theta;
  scaled.col(2) *= 1e-9;
  scaled.col(4) *= 1e7;
  const StlsResult a = stls(Problem(theta, y, 0.1));
  const StlsResult b = stls(Problem(scaled, y, 0.1));
  EXPECT_TRUE(a.support == b.support);
  for (Eigen::Index k = 0; k < 2; ++k) {
    EXPECT_NEAR(b.xi(2, k) * 1e-9, a.xi(2, k), 1e-10);
    EXPECT_NEAR(b.xi(4, k) * 1e7, a.xi(4, k), 1e-10);
  }
}

TEST(StlsTest, FlagsEmptySupportAndUnderdetermined) {
  const MatrixXd theta = RandomMatrix(30, 4, 12);
  const StlsResult r = stls(Problem(theta, 1e-6 * RandomMatrix(30, 1, 13), 1.0));
  EXPECT_TRUE(r.diagnostics.empty_support[0]);
  EXPECT_EQ(r.xi.norm(), 0.0);

  const StlsResult u = stls(Problem(RandomMatrix(3, 6, 14), RandomMatrix(3, 1, 15), 0.0));
  EXPECT_TRUE(u.diagnostics.underdetermined);
}

TEST(StlsTest, RankDeficientColumnsFlagged) {
  MatrixXd theta = RandomMatrix(30, 4, 16);
  theta.col(3) = theta.col(1);
  const StlsResult r = stls(Problem(theta, RandomMatrix(30, 1, 17), 0.0));
  EXPECT_TRUE(r.diagnostics.rank_deficient[0]);
  EXPECT_TRUE(r.xi.allFinite());
}

TEST(StlsTest, RejectsBadInput) {
  EXPECT_THROW(stls(Problem(RandomMatrix(5, 2, 1), RandomMatrix(4, 1, 1), 0.0)), ConfigError);
  MatrixXd bad = RandomMatrix(5, 2, 1);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(stls(Problem(bad, RandomMatrix(5, 1, 1), 0.0)), ConfigError);
  EXPECT_THROW(stls(Problem(RandomMatrix(5, 2, 1), RandomMatrix(5, 1, 1), -1.0)), ConfigError);
}

TEST(ZohTest, ZeroDynamicsGivesInputTimesStep) {
  const MatrixXd b = RandomMatrix(3, 2, 20);
  const auto [ad, bd] = discretize_zoh(MatrixXd::Zero(3, 3), b, 0.1);
  EXPECT_LT((ad - MatrixXd::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((bd - 0.1 * b).norm(), 1e-15);
}

TEST(ZohTest, ScalarClosedForm) {
  const double a = -0.7, b = 2.0, dt = 0.1;
  const auto [ad, bd] = discretize_zoh(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b), dt);
  EXPECT_NEAR(ad(0, 0), std::exp(a * dt), 1e-15);
  EXPECT_NEAR(bd(0, 0), (std::exp(a * dt) - 1.0) / a * b, 1e-15);
}

TEST(ZohTest, MatchesTaylorSeries) {
  const MatrixXd a = 0.3 * RandomMatrix(4, 4, 21);
  const MatrixXd b = RandomMatrix(4, 2, 22);
  const double dt = 0.1;
  const auto [ad, bd] = discretize_zoh(a, b, dt);
  // A_D = sum (A dt)^k / k!, B_D = sum A^k dt^(k+1) / (k+1)! B.
  MatrixXd term = MatrixXd::Identity(4, 4), ea = term, ib = term * dt;
  for (int k = 1; k < 30; ++k) {
    term = term * a * dt / k;
    ea += term;
    ib += term * dt / (k + 1);
  }
  EXPECT_LT((ad - ea).norm(), 1e-14);
  EXPECT_LT((bd - ib * b).norm(), 1e-14);
}

TEST(ZohTest, HarmonicOscillatorIsRotation) {
  MatrixXd a(2, 2);
  a << 0, 1, -1, 0;
  const auto [ad, bd] = discretize_zoh(a, MatrixXd::Zero(2, 1), 0.5);
  EXPECT_NEAR(ad(0, 0), std::cos(0.5), 1e-15);
  EXPECT_NEAR(ad(0, 1), std::sin(0.5), 1e-15);
  EXPECT_NEAR(ad(1, 0), -std::sin(0.5), 1e-15);
}

class DataTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    DatasetConfig cfg;
    cfg.n_traj = 4;
    cfg.duration = 3.0;
    cfg.train_fraction = 0.5;
    cfg.workers = 1;
    data_ = new TrajectoryDataset(generate_dataset(SatellitePlant(SatelliteParams{}), cfg, 7));
  }
  static void TearDownTestSuite() { delete data_; }
  static TrajectoryDataset* data_;
};
TrajectoryDataset* DataTest::data_ = nullptr;

TEST_F(DataTest, LibraryRowsUseInteriorSamples) {
  const Dictionary dict = attitude_dictionary();
  const RegressionProblem p = lift_dataset(*data_, Split::kTrain, dict);
  ASSERT_EQ(p.theta.rows(), 2 * 27);  // 31 samples, 2 trimmed at each end
  ASSERT_EQ(p.theta.cols(), dict.n_library());
  const Trajectory& t = *data_->select(Split::kTrain)[0];
  const StateVector x = t.x.row(5).transpose();
  const InputVector u = t.u.row(5).transpose();
  const StateVector xd = t.x_dot.row(3).transpose();
  EXPECT_EQ((p.theta.row(3).transpose() - dict.library_row(x, u)).norm(), 0.0);
  EXPECT_EQ((p.targets.row(3).transpose() - dict.lift_rate(x, xd)).norm(), 0.0);
}

TEST_F(DataTest, ChainRuleTargetForProduct) {
  const Dictionary dict = attitude_dictionary();
  const RegressionProblem p = lift_dataset(*data_, Split::kTrain, dict);
  const Trajectory& t = *data_->select(Split::kTrain)[0];
  const Block& blk = dict.state_block("zeta_dot^2");
  const int k = 10;
  const double zd = t.x(k + 2, state_index::kZetaDot);
  const double zdd = t.x_dot(k, state_index::kZetaDot);
  EXPECT_NEAR(p.targets(k, blk.offset), 2.0 * zd * zdd, 1e-14 * (1.0 + std::abs(2.0 * zd * zdd)));
}

TEST_F(DataTest, FitAndPersistModelBitExact) {
  StlsOptions opt;
  LiftedModel m = fit_model(*data_, attitude_dictionary(), opt);
  EXPECT_EQ(m.a.rows(), 27);
  EXPECT_EQ(m.b.cols(), 5);
  EXPECT_TRUE(m.a_d.allFinite());
  const auto path = std::filesystem::temp_directory_path() / "dfacs_sindy_model_test.json";
  save_model(m, path);
  const LiftedModel r = load_model(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(r.dictionary == m.dictionary);
  EXPECT_TRUE(r.support == m.support);
  EXPECT_EQ(r.dt, m.dt);
  for (const auto& [x, y] : {std::pair(&m.xi, &r.xi), std::pair(&m.a, &r.a), std::pair(&m.b, &r.b),
                             std::pair(&m.a_d, &r.a_d), std::pair(&m.b_d, &r.b_d)}) {
    ASSERT_EQ(x->size(), y->size());
    EXPECT_EQ(std::memcmp(x->data(), y->data(), sizeof(double) * x->size()), 0);
  }
}

TEST(PredictTest, ZeroModelHoldsInitialLift) {
  const Dictionary dict = attitude_dictionary();
  const LiftedModel m = assemble_model(MatrixXd::Zero(dict.n_library(), dict.n_state()), dict, 0.1);
  PlantState x0;
  x0.theta_si = Vec3(1e-3, -2e-3, 3e-3);
  x0.zeta = Vec2(1e-4, 0.0);
  const LiftedPrediction p = predict(m, x0, std::vector<ControlInput>(5), 5);
  ASSERT_EQ(p.chi.rows(), 6);
  for (int k = 0; k <= 5; ++k) EXPECT_EQ((p.chi.row(k) - p.chi.row(0)).norm(), 0.0);
  EXPECT_EQ(p.physical(5, state_index::kThetaSI + 1), -2e-3);
  EXPECT_EQ(p.physical(5, state_index::kZeta), 1e-4);
  EXPECT_THROW(predict(m, x0, std::vector<ControlInput>(2), 5), ConfigError);
}

TEST(PredictTest, InputIntegratesThroughB) {
  const Dictionary dict = attitude_dictionary();
  MatrixXd xi = MatrixXd::Zero(dict.n_library(), dict.n_state());
  const int w = dict.state_block("omega_SI").offset;
  const int th = dict.state_block("theta_SI").offset;
  const int mt = dict.n_state() + dict.n_compensation() + dict.input_block("M_T").offset;
  xi(w, th) = 1.0;    // theta_dot = omega
  xi(mt, w) = 10.0;   // omega_dot = 10 M_T
  const LiftedModel m = assemble_model(xi, dict, 0.1);
  ControlInput u;
  u.thruster_torque = Vec3(1e-5, 0, 0);
  const LiftedPrediction p = predict(m, PlantState{}, std::vector<ControlInput>(10, u), 10);
  // Constant acceleration 1e-4 over 1 s.
  EXPECT_NEAR(p.chi(10, w), 1e-4, 1e-18);
  EXPECT_NEAR(p.chi(10, th), 0.5e-4, 1e-18);
}

TEST(ErrorTest, MeanAbsolutePerSample) {
  MatrixXd a(2, 3), b(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  b << 1, 0, 0, 4, 6, 8;
  const VectorXd e = prediction_error(a, b, 1, 2);
  EXPECT_DOUBLE_EQ(e[0], 2.5);
  EXPECT_DOUBLE_EQ(e[1], 1.5);
  EXPECT_THROW(prediction_error(a, MatrixXd::Zero(3, 3), 0, 1), AlignmentError);
  EXPECT_THROW(prediction_error(a, b, 2, 2), ConfigError);
}

}  // namespace
}  // namespace dfacs
