#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace inbox {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape mismatch, empty input...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite numbers where finite ones are required.
class InvalidValueError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. line() is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// An id outside its declared range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Missing files, inconsistent datasets, failed validation against a manifest.
class DataError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace inbox
