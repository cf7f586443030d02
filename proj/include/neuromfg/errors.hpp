#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neuromfg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model inputs (violated type invariants).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class MissingDerivative : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(double residual, std::size_t iterations)
      : Error("fixed point did not converge: residual " +
              std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t path, double time)
      : Error("non-finite state on path " + std::to_string(path) +
              " at t=" + std::to_string(time)),
        path_(path),
        time_(time) {}

  std::size_t path() const { return path_; }
  double time() const { return time_; }

 private:
  std::size_t path_;
  double time_;
};

class ConsistencyViolation : public Error {
 public:
  ConsistencyViolation(double time, double z_score)
      : Error("mean-field consistency violated at t=" + std::to_string(time) +
              " (z=" + std::to_string(z_score) + ")"),
        time_(time),
        z_score_(z_score) {}

  double time() const { return time_; }
  double z_score() const { return z_score_; }

 private:
  double time_;
  double z_score_;
};

}  // namespace neuromfg
