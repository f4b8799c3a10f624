#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sentcx {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input; line is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Feature fingerprint or dimension disagreement between artifacts.
class ConfigMismatchError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A required upstream artifact is missing or no longer matches its recorded
// digest.
class UpstreamError : public Error {
 public:
  using Error::Error;
};

}  // namespace sentcx
