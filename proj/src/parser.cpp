#include "bsamp/parser.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace bsamp {

namespace {

enum class Tok {
  Ident,
  Number,
  Equals,
  Plus,
  Star,
  Caret,
  LParen,
  RParen,
  LBracket,
  RBracket,
  RestrEq,    // '=' inside restriction handled via Equals
  Le,         // <=
  Ge,         // >=
  Prime,      // '
  Newline,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  bool is_int = false;
  long long int_value = 0;
  SourceSpan span;
};

struct Lexer {
  const std::string& src;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;
  std::optional<Diagnostic> error;

  explicit Lexer(const std::string& s) : src(s) {}

  SourceSpan here(std::size_t begin) const {
    SourceSpan s;
    s.line = line;
    s.column = col;
    s.begin = begin;
    s.end = pos;
    return s;
  }

  void advance() {
    if (pos < src.size()) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++pos;
    }
  }

  std::vector<Token> lex() {
    std::vector<Token> out;
    while (pos < src.size() && !error) {
      const char c = src[pos];
      const std::size_t begin = pos;
      const int tline = line, tcol = col;
      auto push = [&](Tok k, std::string text) {
        Token t;
        t.kind = k;
        t.text = std::move(text);
        t.span = SourceSpan{tline, tcol, begin, pos};
        out.push_back(std::move(t));
      };
      if (c == '\r') {
        advance();
        continue;
      }
      if (c == '\n') {
        advance();
        push(Tok::Newline, "\n");
        continue;
      }
      if (c == ' ' || c == '\t') {
        advance();
        continue;
      }
      if (c == '-' && pos + 1 < src.size() && src[pos + 1] == '-') {
        while (pos < src.size() && src[pos] != '\n') advance();
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string name;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) ||
                src[pos] == '_')) {
          name += src[pos];
          advance();
        }
        push(Tok::Ident, name);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::string num;
        bool is_int = true;
        while (pos < src.size() &&
               std::isdigit(static_cast<unsigned char>(src[pos]))) {
          num += src[pos];
          advance();
        }
        if (pos < src.size() && src[pos] == '.') {
          is_int = false;
          num += '.';
          advance();
          while (pos < src.size() &&
                 std::isdigit(static_cast<unsigned char>(src[pos]))) {
            num += src[pos];
            advance();
          }
        }
        if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
          is_int = false;
          num += src[pos];
          advance();
          if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) {
            num += src[pos];
            advance();
          }
          if (pos >= src.size() ||
              !std::isdigit(static_cast<unsigned char>(src[pos]))) {
            error = Diagnostic{"malformed number literal",
                               SourceSpan{tline, tcol, begin, pos}};
            break;
          }
          while (pos < src.size() &&
                 std::isdigit(static_cast<unsigned char>(src[pos]))) {
            num += src[pos];
            advance();
          }
        }
        if (num == ".") {
          error = Diagnostic{"malformed number literal",
                             SourceSpan{tline, tcol, begin, pos}};
          break;
        }
        Token t;
        t.kind = Tok::Number;
        t.text = num;
        t.number = std::strtod(num.c_str(), nullptr);
        t.is_int = is_int;
        if (is_int) t.int_value = std::strtoll(num.c_str(), nullptr, 10);
        t.span = SourceSpan{tline, tcol, begin, pos};
        out.push_back(std::move(t));
        continue;
      }
      switch (c) {
        case '=': advance(); push(Tok::Equals, "="); break;
        case '+': advance(); push(Tok::Plus, "+"); break;
        case '*': advance(); push(Tok::Star, "*"); break;
        case '^': advance(); push(Tok::Caret, "^"); break;
        case '(': advance(); push(Tok::LParen, "("); break;
        case ')': advance(); push(Tok::RParen, ")"); break;
        case '[': advance(); push(Tok::LBracket, "["); break;
        case ']': advance(); push(Tok::RBracket, "]"); break;
        case '\'': advance(); push(Tok::Prime, "'"); break;
        case '<':
          advance();
          if (pos < src.size() && src[pos] == '=') {
            advance();
            push(Tok::Le, "<=");
          } else {
            error = Diagnostic{"expected '<='",
                               SourceSpan{tline, tcol, begin, pos}};
          }
          break;
        case '>':
          advance();
          if (pos < src.size() && src[pos] == '=') {
            advance();
            push(Tok::Ge, ">=");
          } else {
            error = Diagnostic{"expected '>='",
                               SourceSpan{tline, tcol, begin, pos}};
          }
          break;
        default:
          error = Diagnostic{std::string("unexpected character '") + c + "'",
                             SourceSpan{tline, tcol, begin, pos + 1}};
          break;
      }
    }
    Token end;
    end.kind = Tok::End;
    end.span = SourceSpan{line, col, pos, pos};
    out.push_back(end);
    return out;
  }
};

struct Parser {
  std::vector<Token> toks;
  std::size_t at = 0;
  std::optional<Diagnostic> error;

  const Token& peek() const { return toks[at]; }
  const Token& get() { return toks[at < toks.size() - 1 ? at++ : at]; }
  bool is(Tok k) const { return toks[at].kind == k; }

  void fail(const std::string& msg, const SourceSpan& span) {
    if (!error) error = Diagnostic{msg, span};
  }
  void fail_here(const std::string& msg) { fail(msg, peek().span); }

  bool expect(Tok k, const char* what) {
    if (is(k)) {
      get();
      return true;
    }
    fail_here(std::string("expected ") + what);
    return false;
  }

  // sum := term ('+' term)*
  Expr parse_sum() {
    std::vector<Expr> terms;
    terms.push_back(parse_term());
    while (!error && is(Tok::Plus)) {
      get();
      terms.push_back(parse_term());
    }
    if (terms.size() == 1) return std::move(terms[0]);
    Expr e = Expr::sum(std::move(terms));
    e.span = e.children.front().span;
    return e;
  }

  // term := NUMBER ('*' factor)* | factor ('*' factor)*
  Expr parse_term() {
    double weight = 1.0;
    bool weighted = false;
    SourceSpan wspan = peek().span;
    std::vector<Expr> factors;

    // An integer literal 1 is always the neutral class (a factor), never
    // a weight prefix; parse_primary handles it below.
    if (is(Tok::Number) && !(peek().is_int && peek().int_value == 1)) {
      const Token& t = peek();
      weight = t.number;
      weighted = true;
      if (weight <= 0.0) fail("weights must be positive", t.span);
      get();
      if (!is(Tok::Star)) {
        // bare weight: weighted neutral class
        Expr e = Expr::weighted(weight, Expr::neutral());
        e.span = wspan;
        return e;
      }
      get();  // '*'
    }

    factors.push_back(parse_factor());
    while (!error && is(Tok::Star)) {
      get();
      factors.push_back(parse_factor());
    }
    Expr body;
    if (factors.size() == 1) {
      body = std::move(factors[0]);
    } else {
      body = Expr::product(std::move(factors));
      body.span = body.children.front().span;
    }
    if (!weighted) return body;
    Expr e = Expr::weighted(weight, std::move(body));
    e.span = wspan;
    return e;
  }

  // factor := primary ('^' INT)*
  Expr parse_factor() {
    Expr e = parse_primary();
    while (!error && is(Tok::Caret)) {
      get();
      if (!is(Tok::Number) || !peek().is_int || peek().int_value < 1) {
        fail_here("expected positive integer exponent");
        break;
      }
      const int k = static_cast<int>(get().int_value);
      SourceSpan span = e.span;
      e = Expr::pow(std::move(e), k);
      e.span = span;
    }
    return e;
  }

  // primary := '1' | NAME | OP restr? '(' sum ')' | '(' sum ')'
  Expr parse_primary() {
    if (is(Tok::Number)) {
      const Token& t = peek();
      if (t.is_int && t.int_value == 1) {
        Expr e = Expr::neutral();
        e.span = t.span;
        get();
        return e;
      }
      fail_here("number literals are only allowed as a weight at the start "
                "of a term");
      return Expr::neutral();
    }
    if (is(Tok::LParen)) {
      get();
      Expr inner = parse_sum();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (!is(Tok::Ident)) {
      fail_here("expected a class, atom, operator or '1'");
      return Expr::neutral();
    }
    Token name = get();
    ExprKind op;
    if (name.text == "Seq") {
      op = ExprKind::Seq;
    } else if (name.text == "Set") {
      op = ExprKind::Set;
    } else if (name.text == "Cyc") {
      op = ExprKind::Cycle;
    } else if (name.text == "MSet") {
      op = ExprKind::MSet;
    } else {
      Expr e;
      e.kind = ExprKind::NameRef;
      e.name = name.text;
      e.span = name.span;
      return e;
    }
    Restr restr;
    if (is(Tok::LBracket)) {
      get();
      if (is(Tok::Equals)) {
        get();
        restr.kind = RestrKind::Eq;
      } else if (is(Tok::Le)) {
        get();
        restr.kind = RestrKind::AtMost;
      } else if (is(Tok::Ge)) {
        get();
        restr.kind = RestrKind::AtLeast;
      } else {
        fail_here("expected '=', '<=' or '>=' in restriction");
        return Expr::neutral();
      }
      if (!is(Tok::Number) || !peek().is_int || peek().int_value < 0) {
        fail_here("expected non-negative integer in restriction");
        return Expr::neutral();
      }
      restr.k = static_cast<int>(get().int_value);
      if (!expect(Tok::RBracket, "']'")) return Expr::neutral();
    }
    if (!expect(Tok::LParen, "'(' after operator")) return Expr::neutral();
    Expr arg = parse_sum();
    expect(Tok::RParen, "')'");
    Expr e = Expr::op(op, std::move(arg), restr);
    e.span = name.span;
    return e;
  }
};

void classify_names(Expr& e, const std::set<std::string>& atom_names) {
  if (e.kind == ExprKind::NameRef) {
    e.kind = (atom_names.count(e.name) || e.name == "Z") ? ExprKind::AtomRef
                                                         : ExprKind::ClassRef;
  }
  for (auto& c : e.children) classify_names(c, atom_names);
}

bool mentions_atom(const Expr& e, const std::string& name) {
  if ((e.kind == ExprKind::AtomRef || e.kind == ExprKind::NameRef) &&
      e.name == name)
    return true;
  for (const auto& c : e.children)
    if (mentions_atom(c, name)) return true;
  return false;
}

std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

int precedence(const Expr& e) {
  // 0 = sum, 1 = term (weighted/product), 2 = factor
  switch (e.kind) {
    case ExprKind::Union: return 0;
    case ExprKind::Weighted:
    case ExprKind::Product: return 1;
    default: return 2;
  }
}

void render_expr(const Expr& e, int min_prec, std::string& out) {
  const bool parens = precedence(e) < min_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case ExprKind::Neutral: out += '1'; break;
    case ExprKind::NameRef:
    case ExprKind::AtomRef:
    case ExprKind::ClassRef: out += e.name; break;
    case ExprKind::Weighted:
      out += fmt_double(e.weight);
      if (!(e.children[0].kind == ExprKind::Neutral)) {
        out += '*';
        render_expr(e.children[0], 2, out);
      }
      break;
    case ExprKind::Union:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " + ";
        render_expr(e.children[i], 1, out);
      }
      break;
    case ExprKind::Product:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += '*';
        render_expr(e.children[i], 2, out);
      }
      break;
    case ExprKind::Power:
      render_expr(e.children[0], 3, out);
      out += '^';
      out += std::to_string(e.power);
      break;
    case ExprKind::Seq:
    case ExprKind::Set:
    case ExprKind::Cycle:
    case ExprKind::MSet: {
      switch (e.kind) {
        case ExprKind::Seq: out += "Seq"; break;
        case ExprKind::Set: out += "Set"; break;
        case ExprKind::Cycle: out += "Cyc"; break;
        default: out += "MSet"; break;
      }
      switch (e.restr.kind) {
        case RestrKind::None: break;
        case RestrKind::Eq: out += "[=" + std::to_string(e.restr.k) + "]"; break;
        case RestrKind::AtMost:
          out += "[<=" + std::to_string(e.restr.k) + "]";
          break;
        case RestrKind::AtLeast:
          out += "[>=" + std::to_string(e.restr.k) + "]";
          break;
      }
      out += '(';
      render_expr(e.children[0], 0, out);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.name != b.name || a.weight != b.weight ||
      a.power != b.power || a.restr.kind != b.restr.kind ||
      a.restr.k != b.restr.k || a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!expr_equal(a.children[i], b.children[i])) return false;
  return true;
}

ParseResult parse_spec(const std::string& text) {
  ParseResult result;
  Lexer lexer(text);
  std::vector<Token> toks = lexer.lex();
  if (lexer.error) {
    result.error = lexer.error;
    return result;
  }

  Specification spec;
  bool kind_set = false;
  bool target_set = false;
  std::optional<Diagnostic> error;
  std::map<std::string, SourceSpan> class_spans;
  std::string diff_class;
  std::optional<std::pair<std::string, double>> init_decl;
  SourceSpan init_span;

  Parser p;
  p.toks = std::move(toks);

  auto fail = [&](const std::string& msg, const SourceSpan& span) {
    if (!error) error = Diagnostic{msg, span};
  };

  while (!p.is(Tok::End) && !error) {
    if (p.is(Tok::Newline)) {
      p.get();
      continue;
    }
    if (!p.is(Tok::Ident)) {
      fail("expected a declaration or rule", p.peek().span);
      break;
    }
    Token head = p.get();
    if (head.text == "labelled" || head.text == "unlabelled") {
      if (kind_set) {
        fail("duplicate kind declaration", head.span);
        break;
      }
      spec.kind =
          head.text == "labelled" ? SpecKind::Labelled : SpecKind::Unlabelled;
      kind_set = true;
    } else if (head.text == "atom") {
      AtomDecl atom;
      if (!p.is(Tok::Ident)) {
        fail("expected atom name", p.peek().span);
        break;
      }
      atom.name = p.get().text;
      for (const auto& a : spec.atoms)
        if (a.name == atom.name) fail("duplicate atom '" + atom.name + "'",
                                      head.span);
      if (!p.is(Tok::Ident) || p.peek().text != "size") {
        fail("expected 'size'", p.peek().span);
        break;
      }
      p.get();
      if (!p.is(Tok::Number) || !p.peek().is_int || p.peek().int_value < 0) {
        fail("expected non-negative integer atom size", p.peek().span);
        break;
      }
      atom.size = static_cast<int>(p.get().int_value);
      if (p.is(Tok::Ident) &&
          (p.peek().text == "expect" || p.peek().text == "freq")) {
        const bool freq = p.get().text == "freq";
        if (!p.is(Tok::Number)) {
          fail("expected target value", p.peek().span);
          break;
        }
        Token v = p.get();
        atom.target = freq ? TargetKind::Freq : TargetKind::Count;
        atom.target_value = v.number;
        if (freq && !(v.number > 0.0 && v.number < 1.0))
          fail("freq target must lie in (0,1)", v.span);
        if (!freq && !(v.number > 0.0))
          fail("expect target must be positive", v.span);
      }
      spec.atoms.push_back(atom);
    } else if (head.text == "init") {
      if (!p.is(Tok::Ident)) {
        fail("expected class name after 'init'", p.peek().span);
        break;
      }
      std::string name = p.get().text;
      if (!p.is(Tok::Number)) {
        fail("expected initial value", p.peek().span);
        break;
      }
      if (init_decl) fail("duplicate init declaration", head.span);
      init_decl = {name, p.get().number};
      init_span = head.span;
    } else if (head.text == "target") {
      if (target_set) {
        fail("duplicate target declaration", head.span);
        break;
      }
      target_set = true;
      if (!p.is(Tok::Ident)) {
        fail("expected target class name", p.peek().span);
        break;
      }
      spec.target_class = p.get().text;
      while (p.is(Tok::Ident) && !error) {
        Token opt = p.get();
        if (opt.text == "size") {
          if (!p.is(Tok::Number)) {
            fail("expected size value", p.peek().span);
            break;
          }
          Token v = p.get();
          if (!(v.number > 0)) fail("size target must be positive", v.span);
          spec.size_kind = SizeTargetKind::Finite;
          spec.size_value = v.number;
        } else if (opt.text == "singular") {
          spec.size_kind = SizeTargetKind::Singular;
        } else if (opt.text == "tolerance") {
          if (!p.is(Tok::Number)) {
            fail("expected tolerance value", p.peek().span);
            break;
          }
          Token v = p.get();
          if (!(v.number > 0 && v.number < 1))
            fail("tolerance must lie in (0,1)", v.span);
          spec.tolerance = v.number;
        } else {
          fail("unknown target option '" + opt.text + "'", opt.span);
        }
      }
    } else {
      // class rule: NAME ['] = sum
      std::string name = head.text;
      bool differential = false;
      if (p.is(Tok::Prime)) {
        p.get();
        differential = true;
      }
      if (!p.expect(Tok::Equals, "'='")) break;
      Expr body = p.parse_sum();
      if (p.error) break;
      if (class_spans.count(name)) {
        fail("duplicate definition of class '" + name + "'", head.span);
        break;
      }
      class_spans[name] = head.span;
      spec.classes.emplace_back(name, std::move(body));
      if (differential) {
        if (!diff_class.empty())
          fail("only one differential rule is supported", head.span);
        diff_class = name;
      }
    }
    if (error || p.error) break;
    if (!p.is(Tok::Newline) && !p.is(Tok::End)) {
      fail("unexpected trailing input on line", p.peek().span);
      break;
    }
  }

  if (p.error) error = p.error;
  if (!error && spec.classes.empty())
    error = Diagnostic{"no class rules found", SourceSpan{}};

  if (!error) {
    // Implicit reserved atom Z.
    bool z_declared = spec.find_atom("Z") != nullptr;
    if (!z_declared) {
      bool z_used = false;
      for (const auto& [name, body] : spec.classes)
        if (mentions_atom(body, "Z")) z_used = true;
      if (z_used) {
        AtomDecl z;
        z.name = "Z";
        z.size = 1;
        spec.atoms.insert(spec.atoms.begin(), z);
      }
    }
    std::set<std::string> atom_names;
    for (const auto& a : spec.atoms) atom_names.insert(a.name);
    for (auto& [name, body] : spec.classes) classify_names(body, atom_names);

    if (spec.target_class.empty()) spec.target_class = spec.classes[0].first;
    if (!diff_class.empty()) {
      if (diff_class != spec.target_class)
        error = Diagnostic{"differential rule must define the target class",
                           class_spans[diff_class]};
      spec.differential = true;
    }
    if (init_decl) {
      if (init_decl->first != diff_class)
        error = Diagnostic{"init declaration must name the differential class",
                           init_span};
      else
        spec.init_value = init_decl->second;
    }
  }

  if (error) {
    result.error = error;
  } else {
    result.spec = std::move(spec);
  }
  return result;
}

std::string render_spec(const Specification& spec) {
  std::string out;
  out += spec.kind == SpecKind::Labelled ? "labelled\n" : "unlabelled\n";
  for (const auto& a : spec.atoms) {
    if (a.name == "Z" && a.size == 1 && a.target == TargetKind::None)
      continue;  // implicit
    out += "atom " + a.name + " size " + std::to_string(a.size);
    if (a.target == TargetKind::Count)
      out += " expect " + fmt_double(a.target_value);
    else if (a.target == TargetKind::Freq)
      out += " freq " + fmt_double(a.target_value);
    out += '\n';
  }
  if (spec.differential && spec.init_value != 0.0)
    out += "init " + spec.target_class + " " + fmt_double(spec.init_value) +
           "\n";
  for (const auto& [name, body] : spec.classes) {
    out += name;
    if (spec.differential && name == spec.target_class) out += '\'';
    out += " = ";
    render_expr(body, 0, out);
    out += '\n';
  }
  out += "target " + spec.target_class;
  if (spec.size_kind == SizeTargetKind::Finite)
    out += " size " + fmt_double(spec.size_value);
  else if (spec.size_kind == SizeTargetKind::Singular)
    out += " singular";
  if (spec.tolerance != 0.1) out += " tolerance " + fmt_double(spec.tolerance);
  out += '\n';
  return out;
}

}  // namespace bsamp
