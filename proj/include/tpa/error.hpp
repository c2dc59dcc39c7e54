#ifndef TPA_ERROR_HPP
#define TPA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace tpa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or model shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Class index outside [0, n_classes).
class IndexError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in a checkpoint, IDX or CSV file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inputs that are individually valid but disagree with each other.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tpa

#endif  // TPA_ERROR_HPP
