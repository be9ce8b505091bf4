#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsamp/ast.hpp"
#include "bsamp/parser.hpp"

namespace bsamp {

// --- Desugared core form ------------------------------------------------
//
// Every class body is a positive weighted sum of monomials whose factors
// are atoms, class references (possibly at a diagonal scale z -> z^s),
// or scalar composition nodes. Scalar nodes carry the log-exp transforms
// of Set/Cycle/MSet-style compositions:
//   Exp    value = exp(arg)          (labelled Set, MSet series wrap)
//   LogInv value = log 1/(1 - arg)   (labelled Cycle, Polya cycle layers)
//   ExpM1  value = exp(arg) - 1      (MSet_{>=1} / Set_{>0})
// where arg is the value of a class (at a diagonal scale).

enum class FactorKind { Atom, Class, Scalar };

struct Factor {
  FactorKind kind;
  int index;      // atom / class / scalar index
  int scale = 1;  // diagonal level (Class and Scalar refs)
  int power = 1;
};

struct Monomial {
  double weight = 1.0;  // strictly positive
  std::vector<Factor> factors;
};

struct CoreClass {
  std::string name;
  std::vector<Monomial> terms;
  // True for the auxiliary series-sum classes behind MSet/Cycle where
  // dropping terms beyond the truncation level is the intended semantics.
  bool truncatable_sum = false;
};

enum class ScalarKind { Exp, LogInv, ExpM1 };

struct ScalarAtom {
  ScalarKind kind;
  int arg_class;
  int arg_scale = 1;
};

struct CoreSystem {
  SpecKind kind = SpecKind::Unlabelled;
  std::vector<AtomDecl> atoms;
  std::vector<CoreClass> classes;
  std::vector<ScalarAtom> scalars;
  int target_class = 0;
  int truncation = 20;  // K: max total diagonal scale kept
  SizeTargetKind size_kind = SizeTargetKind::None;
  double size_value = 0.0;
  double tolerance = 0.1;

  int class_index(const std::string& name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int atom_index(const std::string& name) const {
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

// --- Validation -----------------------------------------------------------

struct ValidationIssue {
  std::string rule_id;     // e.g. "unreachable-class"
  std::string class_name;  // offending class, if any
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  bool ok() const { return errors.empty(); }
  std::string to_string() const;
};

ValidationReport validate(const Specification& spec);

// --- Dependency graph -------------------------------------------------

struct DependencyGraph {
  std::vector<std::string> nodes;
  std::vector<std::set<int>> edges;  // edges[i] = classes referenced by i
  std::vector<int> scc_id;           // per node, in reverse topological order
  int scc_count = 0;
  std::vector<bool> reachable;  // from the target class

  bool strongly_connected() const { return scc_count == 1; }
};

DependencyGraph dependency_graph(const Specification& spec);

// --- Desugaring -------------------------------------------------------

struct DesugarOptions {
  int truncation = 20;  // K for MSet / unlabelled Cycle layers
};

struct DesugarResult {
  std::optional<CoreSystem> core;
  std::optional<ValidationIssue> error;
  bool ok() const { return core.has_value(); }
};

// Requires validate(spec).ok().
DesugarResult desugar(const Specification& spec, const DesugarOptions& opts = {});

// --- Combination operator ----------------------------------------------
//
// Adds O(d^2) auxiliary classes computing the k-selections S_1..S_d of the
// given classes and returns the class name of S_k. Sum_k S_k is
// series-equivalent to prod(1 + C_i) - 1.
std::string select_combination(Specification& spec,
                               const std::vector<std::string>& class_refs,
                               int k);

}  // namespace bsamp
