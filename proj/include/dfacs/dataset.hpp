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

#ifndef DFACS_DATASET_HPP_
#define DFACS_DATASET_HPP_

// Identification data: random initial states, sinusoidal excitation,
// simulated trajectories, 5-point derivative estimates and persistence.
//
// On-disk layout of a dataset directory:
//   manifest.json       format tag, config echo, master seed, and per
//                       trajectory {index, seed, split, file, rows, fnv1a64,
//                       excitation a/b/c}
//   traj_NNNN.bin       one file per trajectory, little-endian:
//                         char[8]  magic "DFTRAJ01"
//                         uint32   T, n_state, n_input, n_deriv
//                         float64  times[T]
//                         float64  X[T][n_state]       (row-major)
//                         float64  U[T][n_input]
//                         float64  X_dot[n_deriv][n_state]
//                       X_dot row j belongs to sample j + 2.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dfacs/dynamics.hpp"
#include "dfacs/errors.hpp"
#include "dfacs/integrator.hpp"
#include "dfacs/io.hpp"
#include "dfacs/random.hpp"
#include "dfacs/state.hpp"

namespace dfacs {

using Eigen::MatrixXd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Initial conditions

/// Half-widths of the uniform initial-condition boxes.
struct InitialStateRanges {
  double theta_si = 1e-8;
  double omega_si = 1e-8;
  double r = 1e-7;
  double r_dot = 1e-8;
  double theta_tm = 1e-5;
  double omega_tm = 1e-7;
  double zeta = 1e-8;
  double zeta_dot = 1e-10;
};

inline PlantState sample_initial_state(Rng& rng, const InitialStateRanges& box = {}) {
  auto draw3 = [&](double h) {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = uniform(rng, -h, h);
    return v;
  };
  PlantState x;
  x.theta_si = draw3(box.theta_si);
  x.omega_si = draw3(box.omega_si);
  for (int i = 0; i < kNumTestMasses; ++i) {
    x.tm[i].r = draw3(box.r);
    x.tm[i].r_dot = draw3(box.r_dot);
    x.tm[i].theta = draw3(box.theta_tm);
    x.tm[i].omega = draw3(box.omega_tm);
  }
  for (int i = 0; i < kNumMosas; ++i) x.zeta[i] = uniform(rng, -box.zeta, box.zeta);
  for (int i = 0; i < kNumMosas; ++i) x.zeta_dot[i] = uniform(rng, -box.zeta_dot, box.zeta_dot);
  return x;
}

inline PlantState sample_initial_state(std::uint64_t seed, const InitialStateRanges& box = {}) {
  Rng rng(seed);
  return sample_initial_state(rng, box);
}

// ---------------------------------------------------------------------------
// Excitation u(t) = A o a o sin(b t + c)

/// Default channel peak magnitudes, in input-vector order.
inline InputVector default_excitation_amplitude() {
  InputVector a;
  a << Vec3::Constant(1e-7), Vec3::Constant(2e-5),   // M_T, F_T
      Vec3::Constant(1e-7), Vec3::Constant(3e-9),    // F_E1, M_E1
      Vec3::Constant(1e-7), Vec3::Constant(3e-9),    // F_E2, M_E2
      Vec2::Constant(1e-9);                          // M_MOSA
  return a;
}

struct ExcitationSpec {
  InputVector amplitude = default_excitation_amplitude();
  InputVector a = InputVector::Zero();  // in [-1, 1]
  InputVector b = InputVector::Zero();  // rad/s, in [0, 5]
  InputVector c = InputVector::Zero();  // rad, in [0, 2 pi]
  std::uint64_t seed = 0;

  static ExcitationSpec sample(Rng& rng, const InputVector& amplitude = default_excitation_amplitude()) {
    ExcitationSpec s;
    s.amplitude = amplitude;
    for (int i = 0; i < InputVector::SizeAtCompileTime; ++i) s.a[i] = uniform(rng, -1.0, 1.0);
    for (int i = 0; i < InputVector::SizeAtCompileTime; ++i) s.b[i] = uniform(rng, 0.0, 5.0);
    for (int i = 0; i < InputVector::SizeAtCompileTime; ++i)
      s.c[i] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return s;
  }

  static ExcitationSpec sample(std::uint64_t seed) {
    Rng rng(seed);
    ExcitationSpec s = sample(rng);
    s.seed = seed;
    return s;
  }
};

inline InputVector excitation_vector(const ExcitationSpec& spec, double t) {
  InputVector u;
  for (int i = 0; i < InputVector::SizeAtCompileTime; ++i) {
    u[i] = spec.amplitude[i] * spec.a[i] * std::sin(spec.b[i] * t + spec.c[i]);
  }
  return u;
}

inline ControlInput excitation(const ExcitationSpec& spec, double t) {
  return ControlInput::from_vector(excitation_vector(spec, t));
}

// ---------------------------------------------------------------------------
// Differentiation

/// Fourth-order central difference along rows. Row j of the result is the
/// derivative at sample j + 2; two samples are dropped at each end.
inline MatrixXd central_difference_4(const Eigen::Ref<const MatrixXd>& samples, double dt) {
  const Eigen::Index t = samples.rows();
  if (t < 5) throw InsufficientDataError("central difference needs at least 5 samples");
  if (!(dt > 0.0)) throw ConfigError("central difference needs dt > 0");
  const Eigen::Index n = t - 4;
  return (-samples.middleRows(4, n) + 8.0 * samples.middleRows(3, n) -
          8.0 * samples.middleRows(1, n) + samples.middleRows(0, n)) /
         (12.0 * dt);
}

// ---------------------------------------------------------------------------
// Dataset

enum class Split { kTrain, kValidation };

inline const char* to_string(Split s) { return s == Split::kTrain ? "train" : "validation"; }

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  throw ConfigError("unknown split tag '" + s + "'");
}

struct Trajectory {
  int index = 0;
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
  ExcitationSpec excitation;
  std::vector<double> times;
  MatrixXd x;      // T x 34
  MatrixXd u;      // T x 20
  MatrixXd x_dot;  // (T-4) x 34

  Eigen::Index samples() const { return x.rows(); }
  PlantState state(Eigen::Index k) const { return PlantState::from_vector(x.row(k).transpose()); }
  ControlInput input(Eigen::Index k) const { return ControlInput::from_vector(u.row(k).transpose()); }
};

struct DatasetConfig {
  int n_traj = 200;
  double duration = 50.0;  // s
  double dt = 0.1;         // s
  double train_fraction = 0.75;
  IntegratorConfig integrator{};
  InitialStateRanges initial{};
  InputVector amplitude = default_excitation_amplitude();
  unsigned workers = 0;  // 0 = hardware concurrency

  int n_train() const {
    return static_cast<int>(std::lround(train_fraction * static_cast<double>(n_traj)));
  }

  void validate() const {
    if (n_traj < 1) throw ConfigError("dataset needs at least one trajectory");
    if (!(dt > 0.0)) throw ConfigError("dataset dt must be positive");
    if (!(duration >= 4.0 * dt)) throw ConfigError("dataset duration must cover at least 5 samples");
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
      throw ConfigError("train_fraction must lie in [0, 1]");
    if (!amplitude.allFinite()) throw ConfigError("excitation amplitude must be finite");
    integrator.validate();
  }
};

struct TrajectoryDataset {
  std::uint64_t master_seed = 0;
  double dt = 0.1;
  std::vector<Trajectory> trajectories;
  nlohmann::json config_echo = nlohmann::json::object();

  std::vector<const Trajectory*> select(Split split) const {
    std::vector<const Trajectory*> out;
    for (const auto& t : trajectories)
      if (t.split == split) out.push_back(&t);
    return out;
  }
};

/// Seeded shuffle: the first n_train indices of the permutation are training
/// trajectories.
inline std::vector<Split> assign_splits(int n_traj, int n_train, std::uint64_t master_seed) {
  std::vector<int> order(static_cast<std::size_t>(n_traj));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(master_seed, 0x5711ull << 32));
  // Fisher-Yates with the fixed uniform mapping.
  for (int i = n_traj - 1; i > 0; --i) {
    const auto j = static_cast<int>(uniform(rng, 0.0, static_cast<double>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(std::min(j, i))]);
  }
  std::vector<Split> splits(static_cast<std::size_t>(n_traj), Split::kValidation);
  for (int k = 0; k < n_train; ++k) splits[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = Split::kTrain;
  return splits;
}

/// Simulates one trajectory of the plant under the given start and
/// excitation, and estimates its derivatives.
inline Trajectory simulate_trajectory(const SatellitePlant& plant, const PlantState& x0,
                                      const ExcitationSpec& exc, const DatasetConfig& cfg) {
  IntegratorConfig icfg = cfg.integrator;
  icfg.output_dt = cfg.dt;
  auto rhs = [&](double t, const StateVector& x) {
    return plant.derivative(x, excitation_vector(exc, t), t);
  };
  const auto traj = integrate(rhs, x0.to_vector(), 0.0, cfg.duration, icfg);
  Trajectory out;
  out.excitation = exc;
  out.times = traj.times;
  const auto n = static_cast<Eigen::Index>(traj.times.size());
  out.x.resize(n, state_index::kDim);
  out.u.resize(n, input_index::kDim);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.x.row(k) = traj.states[static_cast<std::size_t>(k)].transpose();
    out.u.row(k) = excitation_vector(exc, traj.times[static_cast<std::size_t>(k)]).transpose();
  }
  out.x_dot = central_difference_4(out.x, cfg.dt);
  return out;
}

/// Generates the full identification dataset. Each trajectory draws its
/// initial state and excitation from its own stream seeded by
/// (master_seed, index), so the result does not depend on scheduling.
inline TrajectoryDataset generate_dataset(const SatellitePlant& plant, const DatasetConfig& cfg,
                                          std::uint64_t master_seed) {
  cfg.validate();
  TrajectoryDataset ds;
  ds.master_seed = master_seed;
  ds.dt = cfg.dt;
  ds.trajectories.resize(static_cast<std::size_t>(cfg.n_traj));
  const auto splits = assign_splits(cfg.n_traj, cfg.n_train(), master_seed);

  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  int failed_index = -1;
  auto worker = [&] {
    for (int i = next++; i < cfg.n_traj; i = next++) {
      try {
        const std::uint64_t seed = mix_seed(master_seed, static_cast<std::uint64_t>(i));
        Rng rng(seed);
        const PlantState x0 = sample_initial_state(rng, cfg.initial);
        ExcitationSpec exc = ExcitationSpec::sample(rng, cfg.amplitude);
        exc.seed = seed;
        Trajectory t = simulate_trajectory(plant, x0, exc, cfg);
        t.index = i;
        t.seed = seed;
        t.split = splits[static_cast<std::size_t>(i)];
        ds.trajectories[static_cast<std::size_t>(i)] = std::move(t);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error || i < failed_index) {
          first_error = std::current_exception();
          failed_index = i;
        }
      }
    }
  };
  unsigned n_workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(cfg.n_traj));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const IntegrationError& e) {
      throw IntegrationError("trajectory " + std::to_string(failed_index) + ": " + e.what(),
                             e.last_valid_time());
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline constexpr char kTrajMagic[8] = {'D', 'F', 'T', 'R', 'A', 'J', '0', '1'};

template <typename T>
void append_raw(std::string& buf, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

inline void append_matrix(std::string& buf, const MatrixXd& m) {
  const RowMatrixXd rm = m;
  buf.append(reinterpret_cast<const char*>(rm.data()),
             static_cast<std::size_t>(rm.size()) * sizeof(double));
}

class Reader {
 public:
  Reader(const std::string& buf, std::string name) : buf_(buf), name_(std::move(name)) {}
  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    need(bytes);
    RowMatrixXd m(rows, cols);
    std::memcpy(m.data(), buf_.data() + pos_, bytes);
    pos_ += bytes;
    return m;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IoError(name_ + ": truncated trajectory file");
  }
  const std::string& buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline nlohmann::json vec_to_json(const InputVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline InputVector vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != static_cast<std::size_t>(input_index::kDim))
    throw ConfigError("excitation vector must have 20 entries");
  return Eigen::Map<const InputVector>(v.data());
}

}  // namespace detail

inline std::string encode_trajectory(const Trajectory& t) {
  std::string buf;
  buf.append(detail::kTrajMagic, sizeof(detail::kTrajMagic));
  detail::append_raw(buf, static_cast<std::uint32_t>(t.x.rows()));
  detail::append_raw(buf, static_cast<std::uint32_t>(t.x.cols()));
  detail::append_raw(buf, static_cast<std::uint32_t>(t.u.cols()));
  detail::append_raw(buf, static_cast<std::uint32_t>(t.x_dot.rows()));
  buf.append(reinterpret_cast<const char*>(t.times.data()), t.times.size() * sizeof(double));
  detail::append_matrix(buf, t.x);
  detail::append_matrix(buf, t.u);
  detail::append_matrix(buf, t.x_dot);
  return buf;
}

inline void decode_trajectory(const std::string& buf, const std::string& name, Trajectory& t) {
  detail::Reader r(buf, name);
  char magic[8];
  for (char& c : magic) c = r.read<char>();
  if (std::memcmp(magic, detail::kTrajMagic, sizeof(magic)) != 0)
    throw IoError(name + ": not a trajectory file");
  const auto rows = static_cast<Eigen::Index>(r.read<std::uint32_t>());
  const auto n_state = static_cast<Eigen::Index>(r.read<std::uint32_t>());
  const auto n_input = static_cast<Eigen::Index>(r.read<std::uint32_t>());
  const auto n_deriv = static_cast<Eigen::Index>(r.read<std::uint32_t>());
  if (n_state != state_index::kDim || n_input != input_index::kDim || n_deriv != std::max<Eigen::Index>(rows - 4, 0))
    throw IoError(name + ": unexpected dimensions");
  t.times.resize(static_cast<std::size_t>(rows));
  for (auto& v : t.times) v = r.read<double>();
  t.x = r.matrix(rows, n_state);
  t.u = r.matrix(rows, n_input);
  t.x_dot = r.matrix(n_deriv, n_state);
  if (!r.done()) throw IoError(name + ": trailing bytes");
}

inline std::string trajectory_file_name(int index) {
  std::string s = std::to_string(index);
  return "traj_" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s + ".bin";
}

/// Writes the dataset to `dir`. Files are first written to `dir.partial`,
/// which is renamed into place only when complete.
inline void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  ensure_directory(tmp);
  try {
    nlohmann::json manifest;
    manifest["format"] = "dfacs-dataset";
    manifest["version"] = 1;
    manifest["master_seed"] = ds.master_seed;
    manifest["dt"] = ds.dt;
    manifest["config"] = ds.config_echo;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& t : ds.trajectories) {
      const std::string bytes = encode_trajectory(t);
      const std::string file = trajectory_file_name(t.index);
      write_file(tmp / file, bytes);
      list.push_back({{"index", t.index},
                      {"seed", t.seed},
                      {"split", to_string(t.split)},
                      {"file", file},
                      {"rows", t.x.rows()},
                      {"fnv1a64", hex64(fnv1a64(bytes))},
                      {"excitation",
                       {{"amplitude", detail::vec_to_json(t.excitation.amplitude)},
                        {"a", detail::vec_to_json(t.excitation.a)},
                        {"b", detail::vec_to_json(t.excitation.b)},
                        {"c", detail::vec_to_json(t.excitation.c)}}}});
    }
    manifest["trajectories"] = list;
    write_json(tmp / "manifest.json", manifest);
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) throw IoError("cannot move dataset into " + dir.string() + ": " + ec.message());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

inline TrajectoryDataset read_dataset(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "dfacs-dataset")
    throw IoError(dir.string() + ": not a dataset directory");
  TrajectoryDataset ds;
  ds.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  ds.dt = manifest.at("dt").get<double>();
  ds.config_echo = manifest.value("config", nlohmann::json::object());
  for (const auto& entry : manifest.at("trajectories")) {
    Trajectory t;
    t.index = entry.at("index").get<int>();
    t.seed = entry.at("seed").get<std::uint64_t>();
    t.split = split_from_string(entry.at("split").get<std::string>());
    const auto& exc = entry.at("excitation");
    t.excitation.amplitude = detail::vec_from_json(exc.at("amplitude"));
    t.excitation.a = detail::vec_from_json(exc.at("a"));
    t.excitation.b = detail::vec_from_json(exc.at("b"));
    t.excitation.c = detail::vec_from_json(exc.at("c"));
    t.excitation.seed = t.seed;
    const std::string file = entry.at("file").get<std::string>();
    const std::string bytes = read_file(dir / file);
    if (hex64(fnv1a64(bytes)) != entry.at("fnv1a64").get<std::string>())
      throw IoError(file + ": checksum mismatch");
    decode_trajectory(bytes, file, t);
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

/// Plain CSV export: one file per trajectory with columns
/// t, x0..x33, u0..u19, xdot0..xdot33 (derivative columns empty at the two
/// trimmed samples on each end).
inline void export_dataset_csv(const TrajectoryDataset& ds, const std::filesystem::path& dir) {
  ensure_directory(dir);
  for (const auto& t : ds.trajectories) {
    std::string out = "t";
    for (int i = 0; i < state_index::kDim; ++i) out += ",x" + std::to_string(i);
    for (int i = 0; i < input_index::kDim; ++i) out += ",u" + std::to_string(i);
    for (int i = 0; i < state_index::kDim; ++i) out += ",xdot" + std::to_string(i);
    out += '\n';
    for (Eigen::Index k = 0; k < t.x.rows(); ++k) {
      out += format_double(t.times[static_cast<std::size_t>(k)]);
      for (Eigen::Index i = 0; i < t.x.cols(); ++i) out += "," + format_double(t.x(k, i));
      for (Eigen::Index i = 0; i < t.u.cols(); ++i) out += "," + format_double(t.u(k, i));
      const bool has_deriv = k >= 2 && k < t.x.rows() - 2;
      for (Eigen::Index i = 0; i < t.x.cols(); ++i)
        out += "," + (has_deriv ? format_double(t.x_dot(k - 2, i)) : std::string());
      out += '\n';
    }
    std::string name = trajectory_file_name(t.index);
    name.replace(name.size() - 4, 4, ".csv");
    write_file(dir / name, out);
  }
}

}  // namespace dfacs

#endif  // DFACS_DATASET_HPP_
