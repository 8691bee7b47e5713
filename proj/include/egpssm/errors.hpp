#pragma once

#include <stdexcept>
#include <string>

namespace egpssm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what)
      : Error("NotPositiveDefinite: " + what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what)
      : Error("DimensionMismatch: " + what) {}
};

class NegativeVariance : public Error {
 public:
  explicit NegativeVariance(const std::string& what)
      : Error("NegativeVariance: " + what) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what)
      : Error("InvalidConfig: " + what) {}
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& what) : Error("InvalidSpec: " + what) {}
};

class EmptySequence : public Error {
 public:
  explicit EmptySequence(const std::string& what)
      : Error("EmptySequence: " + what) {}
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& what)
      : Error("NonFiniteGradient: " + what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("ParseError (line " + std::to_string(line) + "): " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& what)
      : Error("MissingColumn: " + what) {}
};

class SequenceTooShort : public Error {
 public:
  explicit SequenceTooShort(const std::string& what)
      : Error("SequenceTooShort: " + what) {}
};

class DegenerateChannel : public Error {
 public:
  explicit DegenerateChannel(const std::string& what)
      : Error("DegenerateChannel: " + what) {}
};

}  // namespace egpssm
