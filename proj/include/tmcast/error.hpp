// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_ERROR_HPP
#define TMCAST_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmcast {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
  usage = 1,    // bad arguments or configuration
  data = 2,     // missing files, parse or validation failures
  runtime = 3,  // shape mismatches, non-finite values, I/O during a run
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class FileError : public Error {
 public:
  explicit FileError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Failure writing an output artifact during a run.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::data, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

}  // namespace tmcast

#endif  // TMCAST_ERROR_HPP
