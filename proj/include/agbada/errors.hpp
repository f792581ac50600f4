#pragma once

#include <stdexcept>
#include <string>

namespace agbada {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not line up.
class DimensionError : public Error {
public:
  using Error::Error;
};

// An operation called out of order (backward before forward, step without gradients).
class StateError : public Error {
public:
  using Error::Error;
};

// Out-of-range configuration value.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Malformed user data (index rows, label mappings).
class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NonFiniteLossError : public Error {
public:
  NonFiniteLossError(int epoch, std::size_t step)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + " step " +
              std::to_string(step)),
        epoch_(epoch),
        step_(step) {}

  int epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

private:
  int epoch_;
  std::size_t step_;
};

}  // namespace agbada
