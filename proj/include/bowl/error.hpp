#pragma once

#include <stdexcept>
#include <string>

namespace bowl {

// Base of every error the toolkit throws. `kind()` is a stable short tag used
// as the machine-parsable prefix on the CLI's diagnostic stream.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

enum class FormatErrorKind { kBadMagic, kVersionMismatch, kTruncated, kTrailingBytes, kMixedDim, kInvalidField };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind k, const std::string& what) : Error("format", what), format_kind_(k) {}
  FormatErrorKind format_kind() const noexcept { return format_kind_; }

 private:
  FormatErrorKind format_kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what) : Error("degenerate", what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error("consistency", what) {}
};

class CoverageError : public Error {
 public:
  explicit CoverageError(const std::string& what) : Error("coverage", what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bowl
