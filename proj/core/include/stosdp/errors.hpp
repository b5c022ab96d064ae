#pragma once

#include <stdexcept>
#include <string>

namespace stosdp {

/// Operand shapes do not agree (matrix dims, tuple counts, vector lengths).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The embedded solver could not produce a usable answer for a subproblem.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (problem files, scenario files, SDPA files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stosdp
