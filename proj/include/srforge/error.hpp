#pragma once

#include <stdexcept>
#include <string>

namespace srforge {

/// Caller passed arguments that violate an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well formed but numerically degenerate (e.g. zero variance).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structured failure while decoding a file. `kind` tells callers which
/// check failed without string matching.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, BadHeader, ShapeMismatch, Truncated, BadValue };

  ParseError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Internal invariant violated; indicates a defect rather than bad input.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace srforge
