#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfoc {

/// Bad argument or inconsistent input (dimension mismatch, p < 1, empty population).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact transport was requested on supports larger than the configured cap.
class SubsampleRequired : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Descriptor outside the supported closed family (kernel kind, dimension).
class UnsupportedSpec : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state coordinate became NaN/Inf during integration.
class BlowUpError : public NumericError {
 public:
  BlowUpError(const std::string& what, std::string population, std::size_t index)
      : NumericError(what), population_(std::move(population)), index_(index) {}

  const std::string& population() const noexcept { return population_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string population_;
  std::size_t index_;
};

/// Explicit time step violates the stability restriction of a grid scheme.
class StepSizeError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Fixed-point iteration did not reach its tolerance.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : NumericError(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace mfoc
