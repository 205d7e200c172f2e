#pragma once

#include <stdexcept>
#include <string>

namespace lbr {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value or parameter (e.g. B <= 0.5, stddev <= 0).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor/vector shape disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (empty batch, < 2 values).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised when training hits a non-finite loss.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, int epoch, int batch)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace lbr
