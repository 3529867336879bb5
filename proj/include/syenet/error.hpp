// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sye {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or channel counts that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, kernel sizes, config keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation not permitted for the model's mode (e.g. training a folded model).
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Statistics too degenerate for the requested computation (b == 0 in the OA weight).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace sye
