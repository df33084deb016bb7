#pragma once

#include <stdexcept>
#include <string>

namespace gridshed {

/// Malformed input text. Carries the 1-based line where parsing stopped
/// (0 when the problem is not tied to a line, e.g. an empty file).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Well-formed input that violates a model invariant (dangling reference,
/// inverted bounds, non-positive totals).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A formulation or constraint block could not be assembled.
class BuildError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller-supplied data that is inconsistent with the request
/// (e.g. a binary assignment that switches on a line at a dead bus).
class InputError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gridshed
