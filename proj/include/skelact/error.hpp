#pragma once

#include <stdexcept>
#include <string>

namespace skelact {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/axis disagreement between tensors or between a tensor and an op.
struct DimensionError : Error {
  using Error::Error;
};

// A precondition on values or configuration was violated.
struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Mix partner selection violated the configured constraints.
struct PairingError : Error {
  using Error::Error;
};

// Training aborted (non-finite loss or gradients).
struct TrainingError : Error {
  using Error::Error;
};

// Malformed input file; carries the 1-based line the problem was found on.
struct ParseError : Error {
  ParseError(const std::string& msg, int line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace skelact
