#include "bsamp/program.hpp"

#include <cmath>
#include <sstream>

#include "bsamp/evaluator.hpp"
#include "bsamp/numeric.hpp"

namespace bsamp {

TargetVector resolve_targets(const Specification& spec) {
  TargetVector t;
  t.has_size = spec.size_kind == SizeTargetKind::Finite;
  t.size_target = spec.size_value;
  t.targeted.assign(spec.atoms.size(), false);
  t.counts.assign(spec.atoms.size(), 0.0);
  t.freqs.assign(spec.atoms.size(), 0.0);
  for (std::size_t i = 0; i < spec.atoms.size(); ++i) {
    const AtomDecl& a = spec.atoms[i];
    if (a.target == TargetKind::None) continue;
    t.targeted[i] = true;
    if (a.target == TargetKind::Count) {
      t.counts[i] = a.target_value;
      t.freqs[i] = t.has_size ? a.target_value / spec.size_value : 0.0;
    } else {
      t.freqs[i] = a.target_value;
      if (t.has_size) t.counts[i] = a.target_value * spec.size_value;
    }
  }
  return t;
}

namespace {

struct Builder {
  const CoreSystem& core;
  ConvexProgram prog;
  std::vector<double> zero_values;
  std::string error;

  explicit Builder(const CoreSystem& c) : core(c) {}

  int add_var(const std::string& name) {
    prog.var_names.push_back(name);
    return static_cast<int>(prog.var_names.size() - 1);
  }

  // Shared structure of finite and singular programs: variables for the
  // size role, targeted atoms, class replicas and scalar instances, plus
  // the epigraph constraints.
  bool build_feasible_set(const TargetVector& targets) {
    auto zv = class_constant_terms(core);
    if (!zv) {
      error = "ill-founded system: zero-point iteration diverged";
      return false;
    }
    zero_values = *zv;

    bool any_sized = false;
    for (const auto& a : core.atoms)
      if (a.size > 0) any_sized = true;
    if (any_sized) prog.size_var = add_var("xi");

    prog.atom_var.assign(core.atoms.size(), -1);
    for (std::size_t i = 0; i < core.atoms.size(); ++i)
      if (targets.targeted[i])
        prog.atom_var[i] = add_var("eta." + core.atoms[i].name);

    const auto closure = diagonal_closure(core);
    for (const auto& [cls, s] : closure) {
      std::string name = "c." + core.classes[cls].name;
      if (s > 1) name += "@" + std::to_string(s);
      prog.class_var[{cls, s}] = add_var(name);
    }
    // Scalar instances used by kept monomials.
    for (const auto& [pair, var] : prog.class_var) {
      (void)var;
      const auto& [cls, s] = pair;
      for (const auto& m : core.classes[cls].terms) {
        for (const auto& f : m.factors) {
          if (f.kind != FactorKind::Scalar) continue;
          const ScalarAtom& sc = core.scalars[f.index];
          const int t = s * f.scale * sc.arg_scale;
          if (t > core.truncation) continue;
          const int eff = s * f.scale;
          if (!prog.scalar_var.count({f.index, eff}))
            prog.scalar_var[{f.index, eff}] =
                add_var("g." + std::to_string(f.index) + "@" +
                        std::to_string(eff));
        }
      }
    }

    // Atom linear form at a diagonal scale.
    auto atom_coeffs = [&](int atom, int scale, double power,
                           LinTerm& term) {
      const AtomDecl& a = core.atoms[atom];
      const double s = static_cast<double>(scale) * power;
      if (a.size > 0) term.coeffs.push_back({prog.size_var, s * a.size});
      if (prog.atom_var[atom] >= 0)
        term.coeffs.push_back({prog.atom_var[atom], s});
    };

    for (const auto& [pair, cvar] : prog.class_var) {
      const auto& [cls, s] = pair;
      const bool truncatable = core.classes[cls].truncatable_sum;
      PosyConstraint pc;
      pc.target_var = cvar;
      for (const auto& m : core.classes[cls].terms) {
        LinTerm term;
        term.w = m.weight;
        bool drop = false;
        for (const auto& f : m.factors) {
          switch (f.kind) {
            case FactorKind::Atom:
              atom_coeffs(f.index, s, f.power, term);
              break;
            case FactorKind::Class: {
              const int t = s * f.scale;
              if (t > core.truncation) {
                if (truncatable) {
                  drop = true;
                } else {
                  const double zv0 = zero_values[f.index];
                  if (zv0 <= 0.0)
                    drop = true;
                  else
                    term.w *= std::pow(zv0, f.power);
                }
              } else {
                term.coeffs.push_back(
                    {prog.class_var.at({f.index, t}),
                     static_cast<double>(f.power)});
              }
              break;
            }
            case FactorKind::Scalar: {
              const ScalarAtom& sc = core.scalars[f.index];
              const int t = s * f.scale * sc.arg_scale;
              if (t > core.truncation) {
                if (truncatable) {
                  drop = true;
                } else {
                  const double g = [&] {
                    const double arg = zero_values[sc.arg_class];
                    switch (sc.kind) {
                      case ScalarKind::Exp: return std::exp(arg);
                      case ScalarKind::LogInv:
                        return -std::log1p(-arg);
                      case ScalarKind::ExpM1: return std::expm1(arg);
                    }
                    return 0.0;
                  }();
                  if (g <= 0.0)
                    drop = true;
                  else
                    term.w *= std::pow(g, f.power);
                }
              } else {
                term.coeffs.push_back(
                    {prog.scalar_var.at({f.index, s * f.scale}),
                     static_cast<double>(f.power)});
              }
              break;
            }
          }
          if (drop) break;
        }
        if (!drop) pc.terms.push_back(std::move(term));
      }
      if (pc.terms.empty()) {
        error = "class " + core.classes[cls].name +
                " has no terms after truncation (raise K)";
        return false;
      }
      prog.posy.push_back(std::move(pc));
    }

    for (const auto& [pair, svar] : prog.scalar_var) {
      const auto& [scalar, eff] = pair;
      const ScalarAtom& sc = core.scalars[scalar];
      ScalarConstraint c;
      c.target_var = svar;
      c.arg_var = prog.class_var.at({sc.arg_class, eff * sc.arg_scale});
      c.g = sc.kind;
      prog.scalars.push_back(c);
    }
    return true;
  }
};

}  // namespace

BuildResult build_finite_program(const CoreSystem& core,
                                 const TargetVector& targets) {
  BuildResult result;
  for (std::size_t i = 0; i < core.atoms.size(); ++i) {
    if (targets.targeted[i] && !(targets.counts[i] > 0)) {
      result.error = "atom " + core.atoms[i].name +
                     ": frequency target requires a finite size target";
      return result;
    }
  }
  Builder b(core);
  if (!b.build_feasible_set(targets)) {
    result.error = b.error;
    return result;
  }
  ConvexProgram& prog = b.prog;
  prog.objective.maximize = false;
  prog.objective.coeffs.push_back({prog.class_var.at({core.target_class, 1}),
                                   1.0});
  if (targets.has_size) {
    if (prog.size_var < 0) {
      result.error = "size target on a system without size atoms";
      return result;
    }
    prog.objective.coeffs.push_back({prog.size_var, -targets.size_target});
  }
  for (std::size_t i = 0; i < core.atoms.size(); ++i)
    if (targets.targeted[i])
      prog.objective.coeffs.push_back({prog.atom_var[i], -targets.counts[i]});
  result.program = std::move(prog);
  return result;
}

BuildResult build_singular_program(const CoreSystem& core,
                                   const TargetVector& freqs) {
  BuildResult result;
  Builder b(core);
  if (!b.build_feasible_set(freqs)) {
    result.error = b.error;
    return result;
  }
  ConvexProgram& prog = b.prog;
  if (prog.size_var < 0) {
    result.error = "singular tuning requires a size atom";
    return result;
  }
  prog.objective.maximize = true;
  prog.objective.coeffs.push_back({prog.size_var, 1.0});
  for (std::size_t i = 0; i < core.atoms.size(); ++i)
    if (freqs.targeted[i])
      prog.objective.coeffs.push_back({prog.atom_var[i], freqs.freqs[i]});
  result.program = std::move(prog);
  return result;
}

namespace {

// Flatten the differential body F(T, markers) into polynomial terms.
bool flatten_poly(const Specification& spec, const Expr& e,
                  const std::string& self,
                  std::vector<IncTreeConstraint::FTerm>& out, double w,
                  int tpow, std::map<int, int> upows,
                  const std::map<std::string, int>& marker_index) {
  switch (e.kind) {
    case ExprKind::Neutral: {
      IncTreeConstraint::FTerm t;
      t.w = w;
      t.tpow = tpow;
      for (const auto& [idx, p] : upows) t.upows.push_back({idx, p});
      out.push_back(std::move(t));
      return true;
    }
    case ExprKind::AtomRef: {
      auto it = marker_index.find(e.name);
      if (it != marker_index.end()) upows[it->second] += 1;
      IncTreeConstraint::FTerm t;
      t.w = w;
      t.tpow = tpow;
      for (const auto& [idx, p] : upows) t.upows.push_back({idx, p});
      out.push_back(std::move(t));
      return true;
    }
    case ExprKind::ClassRef: {
      if (e.name != self) return false;
      IncTreeConstraint::FTerm t;
      t.w = w;
      t.tpow = tpow + 1;
      for (const auto& [idx, p] : upows) t.upows.push_back({idx, p});
      out.push_back(std::move(t));
      return true;
    }
    case ExprKind::Weighted:
      return flatten_poly(spec, e.children[0], self, out, w * e.weight, tpow,
                          upows, marker_index);
    case ExprKind::Union: {
      for (const auto& c : e.children)
        if (!flatten_poly(spec, c, self, out, w, tpow, upows, marker_index))
          return false;
      return true;
    }
    case ExprKind::Product: {
      // multiply terms left to right
      std::vector<IncTreeConstraint::FTerm> acc;
      IncTreeConstraint::FTerm unit;
      unit.w = w;
      unit.tpow = tpow;
      for (const auto& [idx, p] : upows) unit.upows.push_back({idx, p});
      acc.push_back(unit);
      for (const auto& c : e.children) {
        std::vector<IncTreeConstraint::FTerm> child;
        if (!flatten_poly(spec, c, self, child, 1.0, 0, {}, marker_index))
          return false;
        std::vector<IncTreeConstraint::FTerm> next;
        for (const auto& x : acc) {
          for (const auto& y : child) {
            IncTreeConstraint::FTerm t;
            t.w = x.w * y.w;
            t.tpow = x.tpow + y.tpow;
            std::map<int, int> merged;
            for (auto [i, p] : x.upows) merged[i] += p;
            for (auto [i, p] : y.upows) merged[i] += p;
            for (const auto& [i, p] : merged) t.upows.push_back({i, p});
            next.push_back(std::move(t));
          }
        }
        acc = std::move(next);
      }
      for (auto& t : acc) out.push_back(std::move(t));
      return true;
    }
    case ExprKind::Power: {
      std::vector<IncTreeConstraint::FTerm> base;
      if (!flatten_poly(spec, e.children[0], self, base, 1.0, 0, {},
                        marker_index))
        return false;
      std::vector<IncTreeConstraint::FTerm> acc;
      IncTreeConstraint::FTerm unit;
      unit.w = w;
      unit.tpow = tpow;
      for (const auto& [idx, p] : upows) unit.upows.push_back({idx, p});
      acc.push_back(unit);
      for (int i = 0; i < e.power; ++i) {
        std::vector<IncTreeConstraint::FTerm> next;
        for (const auto& x : acc) {
          for (const auto& y : base) {
            IncTreeConstraint::FTerm t;
            t.w = x.w * y.w;
            t.tpow = x.tpow + y.tpow;
            std::map<int, int> merged;
            for (auto [ii, p] : x.upows) merged[ii] += p;
            for (auto [ii, p] : y.upows) merged[ii] += p;
            for (const auto& [ii, p] : merged) t.upows.push_back({ii, p});
            next.push_back(std::move(t));
          }
        }
        acc = std::move(next);
      }
      for (auto& t : acc) out.push_back(std::move(t));
      return true;
    }
    default: return false;
  }
}

}  // namespace

BuildResult build_increasing_tree_program(const Specification& spec,
                                          const TargetVector& targets) {
  BuildResult result;
  if (!spec.differential || spec.classes.size() != 1) {
    result.error = "increasing-tree program requires a single differential rule";
    return result;
  }
  ConvexProgram prog;
  const int phi = static_cast<int>(prog.var_names.size());
  prog.var_names.push_back("phi");
  const int zeta = static_cast<int>(prog.var_names.size());
  prog.var_names.push_back("zeta");
  prog.size_var = zeta;

  IncTreeConstraint c;
  c.phi_var = phi;
  c.zeta_var = zeta;
  c.t0 = spec.init_value;

  std::map<std::string, int> marker_index;
  prog.atom_var.assign(spec.atoms.size(), -1);
  for (std::size_t i = 0; i < spec.atoms.size(); ++i) {
    if (spec.atoms[i].size == 0 && targets.targeted[i]) {
      marker_index[spec.atoms[i].name] = static_cast<int>(c.eta_vars.size());
      prog.atom_var[i] = static_cast<int>(prog.var_names.size());
      c.eta_vars.push_back(prog.atom_var[i]);
      prog.var_names.push_back("eta." + spec.atoms[i].name);
    }
  }

  if (!flatten_poly(spec, spec.classes[0].second, spec.target_class, c.f, 1.0,
                    0, {}, marker_index)) {
    result.error = "differential rule is not a positive polynomial in the "
                   "class and markers";
    return result;
  }
  for (const auto& t : c.f) {
    if (t.w <= 0) {
      result.error = "differential rule has non-positive coefficients";
      return result;
    }
  }

  prog.objective.maximize = spec.size_kind == SizeTargetKind::Singular;
  if (prog.objective.maximize) {
    prog.objective.coeffs.push_back({zeta, 1.0});
    for (std::size_t i = 0; i < spec.atoms.size(); ++i)
      if (prog.atom_var[i] >= 0)
        prog.objective.coeffs.push_back({prog.atom_var[i],
                                         targets.freqs[i]});
  } else {
    prog.objective.coeffs.push_back({phi, 1.0});
    if (targets.has_size)
      prog.objective.coeffs.push_back({zeta, -targets.size_target});
    for (std::size_t i = 0; i < spec.atoms.size(); ++i)
      if (prog.atom_var[i] >= 0)
        prog.objective.coeffs.push_back({prog.atom_var[i],
                                         -targets.counts[i]});
  }
  prog.inctree = std::move(c);
  result.program = std::move(prog);
  return result;
}

std::string ConvexProgram::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"vars\":[";
  for (std::size_t i = 0; i < var_names.size(); ++i) {
    if (i) os << ",";
    os << "\"" << var_names[i] << "\"";
  }
  os << "],\"objective\":{\"sense\":\""
     << (objective.maximize ? "max" : "min") << "\",\"coeffs\":{";
  for (std::size_t i = 0; i < objective.coeffs.size(); ++i) {
    if (i) os << ",";
    os << "\"" << var_names[objective.coeffs[i].first]
       << "\":" << objective.coeffs[i].second;
  }
  os << "}},\"constraints\":[";
  bool first = true;
  for (const auto& pc : posy) {
    if (!first) os << ",";
    first = false;
    os << "{\"type\":\"posynomial\",\"target\":\"" << var_names[pc.target_var]
       << "\",\"terms\":[";
    for (std::size_t j = 0; j < pc.terms.size(); ++j) {
      if (j) os << ",";
      os << "{\"w\":" << pc.terms[j].w << ",\"coeffs\":{";
      for (std::size_t k = 0; k < pc.terms[j].coeffs.size(); ++k) {
        if (k) os << ",";
        os << "\"" << var_names[pc.terms[j].coeffs[k].first]
           << "\":" << pc.terms[j].coeffs[k].second;
      }
      os << "}}";
    }
    os << "]}";
  }
  for (const auto& sc : scalars) {
    if (!first) os << ",";
    first = false;
    const char* g = sc.g == ScalarKind::Exp
                        ? "exp"
                        : (sc.g == ScalarKind::LogInv ? "L" : "E");
    os << "{\"type\":\"" << g << "\",\"target\":\"" << var_names[sc.target_var]
       << "\",\"arg\":\"" << var_names[sc.arg_var] << "\"}";
  }
  if (inctree) {
    if (!first) os << ",";
    os << "{\"type\":\"inctree\",\"zeta\":\"" << var_names[inctree->zeta_var]
       << "\",\"phi\":\"" << var_names[inctree->phi_var]
       << "\",\"t0\":" << inctree->t0 << "}";
  }
  os << "]}";
  return os.str();
}

}  // namespace bsamp
