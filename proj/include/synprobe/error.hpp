#pragma once

#include <stdexcept>
#include <string>

namespace synprobe {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the subclasses exist so tests and the CLI can
// tell the failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// A format error tied to a line of a text input.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : FormatError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& msg, std::size_t sentence)
      : Error("sentence " + std::to_string(sentence) + ": " + msg),
        sentence_(sentence) {}
  explicit AlignmentError(const std::string& msg)
      : Error(msg), sentence_(static_cast<std::size_t>(-1)) {}
  std::size_t sentence() const { return sentence_; }

 private:
  std::size_t sentence_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class StatsError : public Error {
 public:
  using Error::Error;
};

}  // namespace synprobe
