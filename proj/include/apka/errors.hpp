#pragma once

#include <stdexcept>
#include <string>

namespace apka {

// Malformed textual input: formulas, automaton files, tree files, scripts.
struct ParseError : std::runtime_error {
  int line;
  int col;
  explicit ParseError(const std::string& msg, int line = -1, int col = -1)
      : std::runtime_error(line >= 0 ? "parse error at " + std::to_string(line) + ":" +
                                           std::to_string(col) + ": " + msg
                                     : "parse error: " + msg),
        line(line),
        col(col) {}
};

enum class TypeErrorKind { Mismatch, Unbound, Dialect };

struct TypeError : std::runtime_error {
  TypeErrorKind kind;
  TypeError(TypeErrorKind k, const std::string& msg)
      : std::runtime_error("type error: " + msg), kind(k) {}
};

// Semantically unusable input (invalid automaton, mismatched vocabularies, ...).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configured resource cap was hit (lattice size, tree depth, type order).
struct CapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by the automaton-to-formula direction when the required fixpoint
// nesting cannot be produced by plain substitution.
struct UnsupportedPrecedence : std::runtime_error {
  std::string op_state;
  std::string operand_state;
  UnsupportedPrecedence(std::string op, std::string inner, const std::string& msg)
      : std::runtime_error(msg), op_state(std::move(op)), operand_state(std::move(inner)) {}
};

}  // namespace apka
