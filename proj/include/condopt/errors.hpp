// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <stdexcept>

namespace condopt {

/// Data that does not fit its declared sample space: out of bounds,
/// non-finite, or a non-{0,1} value in a binary dimension.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, space declarations or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace condopt
