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

#ifndef DFACS_ERRORS_HPP_
#define DFACS_ERRORS_HPP_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dfacs {

// Base of every error thrown by the library. `kind()` is a stable
// machine-readable tag used by the CLI's JSON error reports.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class ParameterError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parameter_error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "insufficient_data"; }
};

class AlignmentError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "alignment_error"; }
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}
  const char* kind() const noexcept override { return "integration_failure"; }
  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, Eigen::VectorXd best_iterate,
              double stationarity, double complementarity)
      : Error(what),
        best_iterate_(std::move(best_iterate)),
        stationarity_(stationarity),
        complementarity_(complementarity) {}
  const char* kind() const noexcept override { return "solver_failure"; }
  const Eigen::VectorXd& best_iterate() const noexcept { return best_iterate_; }
  double stationarity() const noexcept { return stationarity_; }
  double complementarity() const noexcept { return complementarity_; }

 private:
  Eigen::VectorXd best_iterate_;
  double stationarity_;
  double complementarity_;
};

}  // namespace dfacs

#endif  // DFACS_ERRORS_HPP_
