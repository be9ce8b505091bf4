#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsamp/ast.hpp"
#include "bsamp/core.hpp"

namespace bsamp {

// Generating-function values of the truncated core system at a point.
//
// values[(i, s)] is the value of class i with all atoms z replaced by
// z^s, under the same truncation semantics the convex program uses:
// references whose total diagonal scale exceeds core.truncation evaluate
// to the class's zero-atom constant term, and truncatable series sums
// drop their deep terms.
struct EvalPoint {
  std::vector<double> z;
  std::map<std::pair<int, int>, double> values;
  std::vector<double> zero_values;
  int truncation = 20;
  double residual = 0.0;

  double value(int cls, int scale) const {
    if (scale > truncation) return zero_values[cls];
    auto it = values.find({cls, scale});
    return it == values.end() ? 0.0 : it->second;
  }
};

struct EvalResult {
  std::optional<EvalPoint> point;
  std::string error;
  bool ok() const { return point.has_value(); }
};

// Fixed-point evaluation; diverges -> "point outside domain" error.
EvalResult evaluate_values(const CoreSystem& core, const std::vector<double>& z);

// (class, scale) pairs needed to evaluate the truncated system.
std::set<std::pair<int, int>> diagonal_closure(const CoreSystem& core);

// Class values at the all-zero atom point (weighted counts of size-0
// objects); nullopt when the zero-point iteration diverges.
std::optional<std::vector<double>> class_constant_terms(const CoreSystem& core);

// Value of a single scalar atom given an eval point.
double scalar_value(const CoreSystem& core, const EvalPoint& pt, int scalar,
                    int scale);

// Sum of the series terms dropped by the truncation, evaluated with exact
// (untruncated) class values at z. Small when K was adequate.
double truncation_tail_bound(const CoreSystem& core, const EvalPoint& pt);

struct ExpectationResult {
  std::vector<double> expectation;            // per atom
  std::vector<std::vector<double>> covariance;  // per atom pair
  double min_cov_eigenvalue = 0.0;
  bool ok = false;
  std::string error;
};

// Expected atom counts and covariance for the Boltzmann sampler of the
// given class at z, by central finite differences on log C.
ExpectationResult expectation_vector(const CoreSystem& core,
                                     const std::vector<double>& z,
                                     int target_class);

// --- Sampler tables -------------------------------------------------------

// Annotated copy of a class body expression.
struct SamplerNode {
  ExprKind kind = ExprKind::Neutral;
  int atom = -1;       // AtomRef
  int cls = -1;        // ClassRef
  double weight = 1.0; // Weighted
  int power = 1;       // Power
  RestrKind restr = RestrKind::None;
  int restr_k = 0;
  std::vector<int> children;
};

// Per (node, scale) sampling data.
struct NodeTable {
  double value = 0.0;
  double param = 0.0;            // Seq: A(z^s); Set: Pois rate; Cyc: Loga
  std::vector<double> cum;       // Union / restricted-cardinality choice
  std::vector<double> arg_diag;  // operator arg values at scales s, 2s, ...
};

struct SamplerTables {
  SpecKind kind = SpecKind::Unlabelled;
  std::vector<std::string> atom_names;
  std::vector<int> atom_sizes;
  std::vector<std::string> class_names;
  std::vector<SamplerNode> nodes;
  std::vector<int> class_root;  // node index per class
  std::map<std::pair<int, int>, NodeTable> tables;  // (node, scale)
  int truncation = 20;
  int target_class = 0;

  const NodeTable& table(int node, int scale) const {
    return tables.at({node, scale});
  }
};

struct TablesResult {
  std::optional<SamplerTables> tables;
  std::string error;
  bool ok() const { return tables.has_value(); }
};

// Compile branching probabilities and per-construct distribution
// parameters at an eval point. Fails on degenerate (zero-valued) classes.
TablesResult branching_tables(const Specification& spec, const CoreSystem& core,
                              const EvalPoint& pt);

}  // namespace bsamp
