#pragma once
// Error taxonomy. Every failure the library reports derives from magtkd::Error
// so callers (and the CLI exit-code mapping) can discriminate by type.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace magtkd {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to an operation: shape mismatch, index out of range, ...
class InputError : public Error {
public:
  using Error::Error;
};

// A domain object violates its invariants.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Malformed binary container. Carries the byte offset of the defect.
class FormatError : public Error {
public:
  enum class Kind {
    BadMagic,
    BadVersion,
    BadModality,
    BadDimension,
    DimensionMismatch,
    Truncated,
    NonFinite,
    TrailingBytes,
  };

  FormatError(Kind kind, std::size_t offset, const std::string& what)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t byte_offset() const { return offset_; }

private:
  Kind kind_;
  std::size_t offset_;
};

// Malformed text input (manifest line, config file). Line numbers are 1-based.
class ParseError : public Error {
public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const { return line_; }

private:
  int line_;
};

// A referenced artifact or record is missing at run time.
class DatasetError : public Error {
public:
  using Error::Error;
};

// Configuration rejected.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace magtkd
