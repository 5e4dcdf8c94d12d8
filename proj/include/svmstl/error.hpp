#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svmstl {

/// Base class for every error raised by the library. All of these describe
/// a problem with the caller's input or configuration; anything else that
/// escapes (std::bad_alloc, logic errors) is an internal failure.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line` is 1-based (0 when unknown); `column` is a
/// 0-based character offset for single-line inputs such as formulas.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) {
      return what + " (at position " + std::to_string(column) + ")";
    }
    return what + " (line " + std::to_string(line) + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

/// Inconsistent dimensions: ragged rows, mixed frame sizes, wrong feature length.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A formula needs more future samples than the signal provides.
class HorizonError : public Error {
public:
  HorizonError(std::size_t required, std::size_t available)
      : Error("formula needs signal index " + std::to_string(required) +
              " but the signal ends at index " + std::to_string(available)),
        required_(required), available_(available) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }

private:
  std::size_t required_;
  std::size_t available_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Training data that cannot support the requested model (single label,
/// too few distinct points, empty classes).
class DegenerateDataError : public Error {
public:
  using Error::Error;
};

/// Simulation state left the finite/bounded region.
class BlowUpError : public Error {
public:
  BlowUpError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// A trajectory directory lacks one frame index in 0..T.
class MissingFrameError : public IoError {
public:
  MissingFrameError(const std::string& dir, std::size_t index)
      : IoError("trajectory '" + dir + "' is missing frame index " + std::to_string(index)), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

} // namespace svmstl
