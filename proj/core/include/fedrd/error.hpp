#pragma once

#include <stdexcept>
#include <string>

namespace fedrd {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition: shape mismatch, out-of-range index, bad argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf surfaced in activations, losses or gradients.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem or parse failure on external data.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedrd
