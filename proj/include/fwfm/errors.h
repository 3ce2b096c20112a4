#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fwfm {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Two tokens for the same field on one line.
class DuplicateFieldError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Invalid configuration values or misuse of an operation (wrong split role, bad rates).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (feature id out of range, mismatched shapes).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A metric is not defined for the given input (single class, empty, zero variance).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t step, double eta)
      : Error("training diverged at step " + std::to_string(step) +
              " (non-finite loss) with eta=" + std::to_string(eta)),
        step_(step),
        eta_(eta) {}
  std::size_t step() const { return step_; }
  double eta() const { return eta_; }

 private:
  std::size_t step_;
  double eta_;
};

}  // namespace fwfm
