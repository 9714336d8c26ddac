#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vsmooth {

// Base for everything the library throws on bad input or numerical trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Operation called in a way its contract forbids (e.g. feedback mode without a feed).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A fluid regime where some state has zero net drift.
class SingularDriftError : public ValidationError {
 public:
  SingularDriftError(int state, double service_rate)
      : ValidationError("zero drift in state i=" + std::to_string(state) +
                        " (i*lambda == C_x == " + std::to_string(service_rate) + ")"),
        state_(state) {}

  int state() const noexcept { return state_; }

 private:
  int state_;
};

// Solver produced something it cannot stand behind.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ModelDegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace vsmooth
