#pragma once

#include <stdexcept>
#include <string>

namespace smooth {

/// Bad configuration: invalid shapes, negative scales, malformed specs.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad runtime input: out-of-range labels, empty datasets.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values produced inside a numeric pipeline.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed external file (CSV, IDX, checkpoint, config).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace smooth
