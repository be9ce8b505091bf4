#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsamp/ast.hpp"
#include "bsamp/core.hpp"

namespace bsamp {

// Linear term w * exp(sum coeff_v x_v) of a posynomial epigraph.
struct LinTerm {
  double w = 1.0;
  std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
};

// x_target >= log sum_j terms_j
struct PosyConstraint {
  int target_var;
  std::vector<LinTerm> terms;
};

// x_target >= g(x_arg)
struct ScalarConstraint {
  int target_var;
  int arg_var;
  ScalarKind g;
};

// zeta <= log integral_{t0}^{e^phi} dt / F(t, e^eta)
struct IncTreeConstraint {
  int zeta_var;
  int phi_var;
  std::vector<int> eta_vars;
  struct FTerm {
    double w;
    int tpow;
    std::vector<std::pair<int, int>> upows;  // (index into eta_vars, power)
  };
  std::vector<FTerm> f;
  double t0 = 0.0;
};

struct Objective {
  bool maximize = false;
  std::vector<std::pair<int, double>> coeffs;
};

struct ConvexProgram {
  std::vector<std::string> var_names;
  Objective objective;
  std::vector<PosyConstraint> posy;
  std::vector<ScalarConstraint> scalars;
  std::optional<IncTreeConstraint> inctree;

  // Pipeline metadata
  int size_var = -1;                              // xi (shared size role)
  std::vector<int> atom_var;                      // per-atom eta (-1 if none)
  std::map<std::pair<int, int>, int> class_var;   // (class, scale) -> var
  std::map<std::pair<int, int>, int> scalar_var;  // (scalar, scale) -> var

  int num_vars() const { return static_cast<int>(var_names.size()); }
  std::string to_json() const;
};

// Tuning targets resolved to per-atom numbers.
struct TargetVector {
  bool has_size = false;
  double size_target = 0.0;         // n (finite mode)
  std::vector<bool> targeted;       // per atom
  std::vector<double> counts;       // per atom, finite mode
  std::vector<double> freqs;        // per atom, singular mode
};

// Resolve the specification's declared targets. freq f becomes count f*n
// in finite mode; frequencies stay frequencies in singular mode.
TargetVector resolve_targets(const Specification& spec);

struct BuildResult {
  std::optional<ConvexProgram> program;
  std::string error;
  bool ok() const { return program.has_value(); }
};

BuildResult build_finite_program(const CoreSystem& core,
                                 const TargetVector& targets);

BuildResult build_singular_program(const CoreSystem& core,
                                   const TargetVector& freqs);

// For a differential specification T' = F(T, markers), T(0) = t0.
BuildResult build_increasing_tree_program(const Specification& spec,
                                          const TargetVector& targets);

}  // namespace bsamp
