#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bsamp {

struct SourceSpan {
  int line = 1;
  int column = 1;
  std::size_t begin = 0;
  std::size_t end = 0;
};

enum class TargetKind { None, Count, Freq };

struct AtomDecl {
  std::string name;
  int size = 1;  // 0 for markers
  TargetKind target = TargetKind::None;
  double target_value = 0.0;
};

enum class RestrKind { None, Eq, AtMost, AtLeast };

struct Restr {
  RestrKind kind = RestrKind::None;
  int k = 0;
};

enum class ExprKind {
  Neutral,   // the class 1
  NameRef,   // unresolved identifier (parser output)
  AtomRef,
  ClassRef,
  Weighted,  // weight * child
  Union,     // sum of children
  Product,   // product of children
  Power,     // child ^ power
  Seq,
  Set,
  Cycle,
  MSet,
};

struct Expr {
  ExprKind kind = ExprKind::Neutral;
  std::string name;     // NameRef / AtomRef / ClassRef
  double weight = 1.0;  // Weighted
  int power = 1;        // Power
  Restr restr;          // Seq / Set / Cycle / MSet
  std::vector<Expr> children;
  SourceSpan span;

  static Expr neutral() { return Expr{}; }
  static Expr atom(std::string n) {
    Expr e;
    e.kind = ExprKind::AtomRef;
    e.name = std::move(n);
    return e;
  }
  static Expr cls(std::string n) {
    Expr e;
    e.kind = ExprKind::ClassRef;
    e.name = std::move(n);
    return e;
  }
  static Expr weighted(double w, Expr child) {
    Expr e;
    e.kind = ExprKind::Weighted;
    e.weight = w;
    e.children.push_back(std::move(child));
    return e;
  }
  static Expr sum(std::vector<Expr> terms) {
    Expr e;
    e.kind = ExprKind::Union;
    e.children = std::move(terms);
    return e;
  }
  static Expr product(std::vector<Expr> factors) {
    Expr e;
    e.kind = ExprKind::Product;
    e.children = std::move(factors);
    return e;
  }
  static Expr pow(Expr base, int k) {
    Expr e;
    e.kind = ExprKind::Power;
    e.power = k;
    e.children.push_back(std::move(base));
    return e;
  }
  static Expr op(ExprKind k, Expr arg, Restr r = {}) {
    Expr e;
    e.kind = k;
    e.restr = r;
    e.children.push_back(std::move(arg));
    return e;
  }
};

bool expr_equal(const Expr& a, const Expr& b);

enum class SpecKind { Labelled, Unlabelled };
enum class SizeTargetKind { None, Finite, Singular };

struct Specification {
  SpecKind kind = SpecKind::Unlabelled;
  std::vector<AtomDecl> atoms;  // Z is implicit unless declared
  std::vector<std::pair<std::string, Expr>> classes;  // in source order
  std::string target_class;
  SizeTargetKind size_kind = SizeTargetKind::None;
  double size_value = 0.0;
  double tolerance = 0.1;

  // Differential rule T' = F(T, markers): set when the target class was
  // defined with an apostrophe rule. init_value is T(0).
  bool differential = false;
  double init_value = 0.0;

  const AtomDecl* find_atom(const std::string& name) const {
    for (const auto& a : atoms)
      if (a.name == name) return &a;
    return nullptr;
  }
  const Expr* find_class(const std::string& name) const {
    for (const auto& c : classes)
      if (c.first == name) return &c.second;
    return nullptr;
  }
};

}  // namespace bsamp
