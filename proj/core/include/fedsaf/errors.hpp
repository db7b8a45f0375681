#pragma once

#include <stdexcept>
#include <string>

namespace fedsaf {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameter, config key or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent lengths or shapes between values that must agree.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (IDX, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A dataset cannot be split across clients as requested.
class PartitionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsaf
