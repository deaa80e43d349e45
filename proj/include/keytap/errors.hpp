#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace keytap {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (bad sizes, ranges, labels).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but carries no usable signal (all zeros, empty).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unwritable outputs.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedEncodingError : public Error {
 public:
  explicit UnsupportedEncodingError(const std::string& encoding)
      : Error("unsupported WAV encoding: " + encoding), encoding_(encoding) {}

  const std::string& encoding() const noexcept { return encoding_; }

 private:
  std::string encoding_;
};

}  // namespace keytap
