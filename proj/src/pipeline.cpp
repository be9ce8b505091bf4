#include "bsamp/pipeline.hpp"

#include <cmath>

namespace bsamp {

TuningResult tune_specification(const Specification& spec,
                                const TuneOptions& opts) {
  TuningResult out;
  out.spec = spec;

  ValidationReport report = validate(spec);
  if (!report.ok()) {
    out.error = report.to_string();
    return out;
  }

  const TargetVector targets = resolve_targets(spec);

  if (spec.differential) {
    BuildResult build = build_increasing_tree_program(spec, targets);
    if (!build.ok()) {
      out.error = build.error;
      return out;
    }
    out.program = build.program;
    out.solution = solve_increasing_tree(*out.program, opts.solver);
    out.status = out.solution.status;
    if (out.solution.status != SolveStatus::Optimal) {
      out.error = out.solution.message;
      return out;
    }
    out.z.assign(spec.atoms.size(), 1.0);
    for (std::size_t i = 0; i < spec.atoms.size(); ++i)
      if (out.program->atom_var[i] >= 0)
        out.z[i] = std::exp(out.solution.x[out.program->atom_var[i]]);
    out.size_variable = std::exp(out.solution.x[out.program->size_var]);
    // e^phi is the tuned value of the class itself
    out.class_values[spec.target_class] =
        std::exp(out.solution.x[out.program->inctree->phi_var]);
    out.ok = true;
    return out;
  }

  DesugarResult des = desugar(spec, DesugarOptions{opts.truncation});
  if (!des.ok()) {
    out.error = des.error->message;
    return out;
  }
  out.core = std::move(des.core);
  const CoreSystem& core = *out.core;

  BuildResult build = spec.size_kind == SizeTargetKind::Singular
                          ? build_singular_program(core, targets)
                          : build_finite_program(core, targets);
  if (!build.ok()) {
    out.error = build.error;
    return out;
  }
  out.program = build.program;

  out.solution = solve(*out.program, opts.solver);
  out.status = out.solution.status;
  if (out.solution.status != SolveStatus::Optimal) {
    out.error = out.solution.message;
    return out;
  }

  const ConvexProgram& prog = *out.program;
  out.z.assign(core.atoms.size(), 1.0);
  const double xi = prog.size_var >= 0 ? out.solution.x[prog.size_var] : 0.0;
  out.size_variable = std::exp(xi);
  for (std::size_t i = 0; i < core.atoms.size(); ++i) {
    double log_z = core.atoms[i].size * xi;
    if (prog.atom_var[i] >= 0) log_z += out.solution.x[prog.atom_var[i]];
    out.z[i] = std::exp(log_z);
  }
  for (const auto& [pair, var] : prog.class_var) {
    if (pair.second != 1) continue;
    out.class_values[core.classes[pair.first].name] =
        std::exp(out.solution.x[var]);
  }

  // Evaluation point: back off singular tunings slightly.
  std::vector<double> zeval = out.z;
  if (spec.size_kind == SizeTargetKind::Singular) {
    for (std::size_t i = 0; i < core.atoms.size(); ++i)
      if (core.atoms[i].size > 0)
        zeval[i] *= std::pow(1.0 - 1e-9, core.atoms[i].size);
  }

  EvalResult ev = evaluate_values(core, zeval);
  if (!ev.ok()) {
    out.error = "tuned point evaluation failed: " + ev.error;
    return out;
  }
  out.eval = std::move(ev.point);
  out.tail_bound = truncation_tail_bound(core, *out.eval);
  out.tail_warning = out.tail_bound > opts.tail_tolerance;

  if (opts.build_tables) {
    TablesResult tr = branching_tables(spec, core, *out.eval);
    if (!tr.ok()) {
      out.error = tr.error;
      return out;
    }
    out.tables = std::move(tr.tables);
  }

  ExpectationResult exp = expectation_vector(core, zeval, core.target_class);
  if (exp.ok) out.expectations = std::move(exp);

  out.ok = true;
  return out;
}

}  // namespace bsamp
