#pragma once

#include <stdexcept>
#include <string>

namespace polaudit {

// Base class for all recoverable toolkit errors. The CLI maps these to
// exit code 2 (validation/input) or 3 (stage failure).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
  using Error::Error;
};

// Malformed file content; message carries the offending line number when known.
class ParseError : public Error {
public:
  using Error::Error;
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_ = 0;
};

// A document lost all tokens (OOV / stopwords); callers skip and tally.
class EmptyDistributionError : public InputError {
public:
  using InputError::InputError;
};

// All inputs equal where a spread is required (e.g. constant distance matrix).
class DegenerateInputError : public InputError {
public:
  using InputError::InputError;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_ = 0.0;
};

class TrainingError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class StageError : public Error {
public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

}  // namespace polaudit
