#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsamp/parser.hpp"
#include "bsamp/rng.hpp"
#include "helpers.hpp"

using namespace bsamp;

TEST_CASE("binary tree spec parses") {
  ParseResult r = parse_spec("B = Z + Z*B^2\ntarget B size 1000\n");
  REQUIRE(r.ok());
  const Specification& s = *r.spec;
  CHECK(s.classes.size() == 1);
  CHECK(s.atoms.size() == 1);
  CHECK(s.atoms[0].name == "Z");
  CHECK(s.target_class == "B");
  CHECK(s.size_kind == SizeTargetKind::Finite);
  CHECK(s.size_value == 1000.0);
  const Expr& body = s.classes[0].second;
  CHECK(body.kind == ExprKind::Union);
  CHECK(body.children.size() == 2);
  CHECK(body.children[0].kind == ExprKind::AtomRef);
  CHECK(body.children[1].kind == ExprKind::Product);
}

TEST_CASE("running example with marker") {
  ParseResult r = parse_spec(
      "atom v size 0 freq 0.1\n"
      "T = Z * MSet(Q)\n"
      "Q = v*Z + Z*T^2\n"
      "target T size 500\n");
  REQUIRE(r.ok());
  const Specification& s = *r.spec;
  CHECK(s.atoms.size() == 2);  // implicit Z plus v
  CHECK(s.find_atom("v")->size == 0);
  CHECK(s.find_atom("v")->target == TargetKind::Freq);
  CHECK(s.find_atom("v")->target_value == doctest::Approx(0.1));
  CHECK(s.find_atom("Z")->size == 1);
  CHECK(s.classes.size() == 2);
}

TEST_CASE("syntax error carries a span") {
  ParseResult r = parse_spec("B = Z + ");
  REQUIRE(!r.ok());
  CHECK(r.error->span.line == 1);
  CHECK(r.error->span.begin <= 8);
}

TEST_CASE("negative weights are rejected") {
  ParseResult r = parse_spec("B = Z + -1*B\ntarget B size 10\n");
  CHECK(!r.ok());
}

TEST_CASE("zero weight rejected") {
  CHECK(!parse_spec("B = 0*Z\n").ok());
}

TEST_CASE("duplicate class definition") {
  ParseResult r = parse_spec("B = Z\nB = Z + Z\n");
  REQUIRE(!r.ok());
  CHECK(r.error->message.find("duplicate") != std::string::npos);
}

TEST_CASE("unknown restriction is a syntax error") {
  CHECK(!parse_spec("B = Seq[!=2](Z)\n").ok());
}

TEST_CASE("literal weight 2.5 is preserved") {
  ParseResult r = parse_spec("C = 2.5*Z\ntarget C size 5\n");
  REQUIRE(r.ok());
  const Expr& b = r.spec->classes[0].second;
  CHECK(b.kind == ExprKind::Weighted);
  CHECK(b.weight == 2.5);
  const std::string text = render_spec(*r.spec);
  CHECK(text.find("2.5*Z") != std::string::npos);
}

TEST_CASE("nested restricted operators round trip") {
  ParseResult r = parse_spec("C = MSet[>=1](Seq[>=1](Z))\ntarget C size 8\n");
  REQUIRE(r.ok());
  ParseResult r2 = parse_spec(render_spec(*r.spec));
  REQUIRE(r2.ok());
  CHECK(expr_equal(r.spec->classes[0].second, r2.spec->classes[0].second));
}

TEST_CASE("differential rule parses") {
  ParseResult r = parse_spec("T' = 1 + T^2\ntarget T singular\n");
  REQUIRE(r.ok());
  CHECK(r.spec->differential);
  CHECK(r.spec->init_value == 0.0);
  ParseResult r2 = parse_spec("init T 1.5\nT' = 1 + T^2\ntarget T size 10\n");
  REQUIRE(r2.ok());
  CHECK(r2.spec->init_value == 1.5);
}

namespace {

// Random canonical expressions for the round-trip property: unions never
// directly nest, weights avoid 1.0, powers are >= 2.
struct Gen {
  Rng rng;
  std::vector<std::string> atoms{"Z", "u", "v"};
  std::vector<std::string> classes{"A", "B", "C"};

  explicit Gen(std::uint64_t seed) : rng(1234, seed) {}

  double positive_weight() {
    double w = 0.25 * (1 + rng.below(16));
    if (w == 1.0) w = 2.5;
    return w;
  }

  Expr leaf() {
    if (rng.below(2) == 0) return Expr::atom(atoms[rng.below(atoms.size())]);
    return Expr::cls(classes[rng.below(classes.size())]);
  }

  Expr factor(int depth) {
    const int pick = static_cast<int>(rng.below(depth <= 0 ? 2 : 6));
    switch (pick) {
      case 0: return Expr::neutral();
      case 1: return leaf();
      case 2: return Expr::pow(factor(depth - 1), 2 + static_cast<int>(rng.below(3)));
      default: {
        Restr restr;
        switch (rng.below(4)) {
          case 0: restr = {RestrKind::None, 0}; break;
          case 1: restr = {RestrKind::Eq, 1 + static_cast<int>(rng.below(4))}; break;
          case 2: restr = {RestrKind::AtMost, 1 + static_cast<int>(rng.below(4))}; break;
          default: restr = {RestrKind::AtLeast, static_cast<int>(rng.below(3))}; break;
        }
        const ExprKind op[] = {ExprKind::Seq, ExprKind::Set, ExprKind::Cycle,
                               ExprKind::MSet};
        return Expr::op(op[rng.below(4)], sum(depth - 1), restr);
      }
    }
  }

  Expr term(int depth) {
    const auto choice = rng.below(3);
    if (choice == 0) {
      std::vector<Expr> fs;
      const int n = 2 + static_cast<int>(rng.below(2));
      for (int i = 0; i < n; ++i) fs.push_back(factor(depth - 1));
      return Expr::product(std::move(fs));
    }
    if (choice == 1) return Expr::weighted(positive_weight(), factor(depth - 1));
    return factor(depth);
  }

  Expr sum(int depth) {
    if (depth <= 0 || rng.below(2) == 0) return term(depth);
    std::vector<Expr> ts;
    const int n = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) ts.push_back(term(depth - 1));
    return Expr::sum(std::move(ts));
  }

  Specification spec() {
    Specification s;
    s.kind = rng.below(2) ? SpecKind::Labelled : SpecKind::Unlabelled;
    AtomDecl z{"Z", 1, TargetKind::None, 0};
    AtomDecl u{"u", 0, TargetKind::Freq, 0.25};
    AtomDecl v{"v", 2, TargetKind::Count, 7.5};
    s.atoms = {z, u, v};
    for (const auto& name : classes) s.classes.emplace_back(name, sum(3));
    s.target_class = "A";
    s.size_kind = SizeTargetKind::Finite;
    s.size_value = 128.0;
    return s;
  }
};

}  // namespace

TEST_CASE("round trip on 1000 random specs") {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Gen gen(i);
    Specification s = gen.spec();
    const std::string text = render_spec(s);
    ParseResult r = parse_spec(text);
    REQUIRE_MESSAGE(r.ok(), "seed ", i, ": ", r.error->message, "\n", text);
    REQUIRE(r.spec->classes.size() == s.classes.size());
    for (std::size_t c = 0; c < s.classes.size(); ++c) {
      CHECK_MESSAGE(
          expr_equal(r.spec->classes[c].second, s.classes[c].second),
          "seed ", i, " class ", s.classes[c].first, "\n", text);
    }
    CHECK(r.spec->kind == s.kind);
    // Z is implicit: it reappears only when referenced. All declared
    // non-Z atoms must survive with their targets.
    for (const auto& a : s.atoms) {
      if (a.name == "Z") continue;
      const AtomDecl* p = r.spec->find_atom(a.name);
      REQUIRE(p != nullptr);
      CHECK(p->size == a.size);
      CHECK(p->target == a.target);
      CHECK(p->target_value == a.target_value);
    }
  }
}
