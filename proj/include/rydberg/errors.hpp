#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rydberg {

/// Broad failure classes, used by the CLI to pick an exit status.
enum class ErrorClass {
  input,   ///< malformed or invalid user input
  fit,     ///< a fit could not be carried out or gave a nonphysical answer
  internal
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorClass::input, what) {}
};

// ---- solver ----

class InvalidStart : public Error {
 public:
  explicit InvalidStart(const std::string& what) : Error(ErrorClass::fit, "invalid start: " + what) {}
};

class DegenerateProblem : public Error {
 public:
  explicit DegenerateProblem(const std::string& what)
      : Error(ErrorClass::fit, "degenerate problem: " + what) {}
};

class EvaluationError : public Error {
 public:
  EvaluationError(std::size_t parameter_index, const std::string& what)
      : Error(ErrorClass::fit, "evaluation error (parameter " + std::to_string(parameter_index) +
                                   "): " + what),
        index_(parameter_index) {}
  std::size_t parameter_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// ---- physics ----

class InvalidQuantumNumber : public Error {
 public:
  explicit InvalidQuantumNumber(const std::string& what)
      : Error(ErrorClass::input, "invalid effective quantum number: " + what) {}
};

class UnboundLevel : public Error {
 public:
  explicit UnboundLevel(const std::string& what) : Error(ErrorClass::input, "unbound level: " + what) {}
};

class DivergentSeries : public Error {
 public:
  explicit DivergentSeries(const std::string& what)
      : Error(ErrorClass::fit, "divergent series: " + what) {}
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& what)
      : Error(ErrorClass::input, "insufficient data: " + what) {}
};

class NonphysicalFit : public Error {
 public:
  explicit NonphysicalFit(const std::string& what)
      : Error(ErrorClass::fit, "nonphysical fit: " + what) {}
};

class NoLineFound : public Error {
 public:
  explicit NoLineFound(const std::string& what) : Error(ErrorClass::input, "no line found: " + what) {}
};

class InsufficientSpan : public Error {
 public:
  InsufficientSpan(long multiple, const std::string& what)
      : Error(ErrorClass::input, "insufficient span for tau multiple " + std::to_string(multiple) +
                                     ": " + what),
        multiple_(multiple) {}
  long multiple() const noexcept { return multiple_; }

 private:
  long multiple_;
};

// ---- files ----

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorClass::input,
              source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  /// 1-based line number, 0 when the error concerns the whole file.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorClass::input, "I/O error: " + what) {}
};

}  // namespace rydberg
