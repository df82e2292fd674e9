#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stylecap {

// Base of every error the library throws. The CLI maps the subclasses below
// onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class UnknownGender : public Error {
 public:
  UnknownGender() : Error("factor tuple has unknown gender") {}
};

class MalformedPhrase : public Error {
 public:
  MalformedPhrase(std::size_t position, std::string reason)
      : Error("malformed factor phrase at term " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(std::move(reason)) {}

  // Zero-based index of the offending comma-separated term.
  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class IdMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

}  // namespace stylecap
