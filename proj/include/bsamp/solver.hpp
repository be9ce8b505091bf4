#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bsamp/program.hpp"

namespace bsamp {

struct SolverOptions {
  double tol_gap = 1e-9;
  double tol_newton = 1e-10;
  double barrier_mu = 10.0;  // t-schedule factor
  int max_outer = 60;
  int max_newton_per_center = 100;
  double ls_beta = 0.5;      // backtracking factor
  double ls_armijo = 0.01;   // Armijo constant
  double unbounded_threshold = 1e9;
  bool collect_trace = false;
};

enum class SolveStatus { Optimal, Unbounded, Infeasible, MaxIter, NumericalFailure };

struct TraceEntry {
  double t;
  int newton_steps;
  double objective;
  double gap;
};

struct Solution {
  std::vector<double> x;
  double objective = 0.0;
  double gap = 0.0;
  int outer_iterations = 0;
  int newton_steps = 0;
  SolveStatus status = SolveStatus::NumericalFailure;
  std::string message;
  std::vector<TraceEntry> trace;
  double final_t = 0.0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

// Numerically stable log-sum-exp with gradient and Hessian (dense; meant
// for small instances and tests -- the solver uses a local-index variant).
struct LseEval {
  double value;
  std::vector<double> gradient;
  std::vector<std::vector<double>> hessian;
};
LseEval logsumexp_eval(const std::vector<LinTerm>& terms,
                       const std::vector<double>& x);

// Strictly feasible interior start (all constraint slacks >= ~0.5).
struct StartResult {
  std::optional<std::vector<double>> x;
  std::string error;
  bool ok() const { return x.has_value(); }
};
StartResult feasible_start(const ConvexProgram& prog);

Solution solve(const ConvexProgram& prog, const SolverOptions& opts = {});

// Increasing-tree programs route through the same barrier machinery; this
// is a convenience alias that insists on the integral constraint.
Solution solve_increasing_tree(const ConvexProgram& prog,
                               const SolverOptions& opts = {});

// max-norm of grad f0 + sum_i grad g_i / (t * slack_i) at x.
double kkt_residual(const ConvexProgram& prog, const std::vector<double>& x,
                    double t);

// Largest constraint violation at x (negative slack), for tightness checks.
double max_constraint_violation(const ConvexProgram& prog,
                                const std::vector<double>& x);
// Largest slack over all constraints at x.
double max_constraint_slack(const ConvexProgram& prog,
                            const std::vector<double>& x);

}  // namespace bsamp
