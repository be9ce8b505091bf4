#pragma once

#include <string>

#include "bsamp/ast.hpp"
#include "bsamp/parser.hpp"

namespace bsamp::testing {

inline Specification parse_or_die(const std::string& text) {
  ParseResult r = parse_spec(text);
  if (!r.ok())
    throw std::runtime_error("fixture does not parse: " + r.error->message);
  return *r.spec;
}

// Common small fixtures.
inline Specification binary_trees(const std::string& target_line =
                                      "target B size 1000") {
  return parse_or_die("B = Z + Z*B^2\n" + target_line + "\n");
}

inline Specification motzkin() {
  return parse_or_die("M = Z + Z*M + Z*M^2\ntarget M size 100\n");
}

inline Specification seq_of_z(double n) {
  return parse_or_die("F = Seq(Z)\ntarget F size " + std::to_string(n) + "\n");
}

inline Specification unlabelled_trees(const std::string& target =
                                          "target T singular") {
  return parse_or_die("T = Z*MSet(T)\n" + target + "\n");
}

}  // namespace bsamp::testing
