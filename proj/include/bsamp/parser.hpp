#pragma once

#include <optional>
#include <string>

#include "bsamp/ast.hpp"

namespace bsamp {

struct Diagnostic {
  std::string message;
  SourceSpan span;
};

struct ParseResult {
  std::optional<Specification> spec;
  std::optional<Diagnostic> error;
  bool ok() const { return spec.has_value(); }
};

// Parse the textual specification DSL. Total: never throws on bad input,
// returns a diagnostic with a source span instead.
ParseResult parse_spec(const std::string& text);

// Render a specification back to DSL text; parse_spec(render_spec(s))
// is structurally equal to s.
std::string render_spec(const Specification& spec);

}  // namespace bsamp
