#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsamp/ast.hpp"
#include "bsamp/core.hpp"
#include "bsamp/evaluator.hpp"
#include "bsamp/program.hpp"
#include "bsamp/solver.hpp"

namespace bsamp {

struct TuneOptions {
  int truncation = 20;
  SolverOptions solver;
  bool build_tables = true;
  double tail_tolerance = 1e-9;
};

struct TuningResult {
  bool ok = false;
  std::string error;
  SolveStatus status = SolveStatus::NumericalFailure;

  Specification spec;
  std::optional<CoreSystem> core;
  std::optional<ConvexProgram> program;
  Solution solution;

  std::vector<double> z;  // tuned per-atom values (markers included)
  double size_variable = 0.0;  // e^xi
  std::map<std::string, double> class_values;
  std::optional<EvalPoint> eval;
  std::optional<SamplerTables> tables;
  std::optional<ExpectationResult> expectations;
  double tail_bound = 0.0;
  bool tail_warning = false;
};

// Full tuning pipeline: validate, desugar, build, solve, evaluate, and
// compile sampler tables. For differential (increasing-tree) rules the
// evaluation and table steps are skipped.
TuningResult tune_specification(const Specification& spec,
                                const TuneOptions& opts = {});

}  // namespace bsamp
