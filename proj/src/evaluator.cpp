#include "bsamp/evaluator.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <stdexcept>

#include "bsamp/numeric.hpp"

namespace bsamp {

namespace {

double stable_log_inv(double a) {
  // log(1/(1-a)) for a in [0,1)
  return -std::log1p(-a);
}

double apply_scalar(ScalarKind kind, double arg) {
  switch (kind) {
    case ScalarKind::Exp: return std::exp(arg);
    case ScalarKind::LogInv:
      if (arg >= 1.0) return std::numeric_limits<double>::infinity();
      return stable_log_inv(arg);
    case ScalarKind::ExpM1: return std::expm1(arg);
  }
  return 0.0;
}

// Scales at which each class is needed, given the truncation cap.
std::set<std::pair<int, int>> scale_closure(const CoreSystem& core) {
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> todo;
  for (std::size_t i = 0; i < core.classes.size(); ++i) {
    seen.insert({static_cast<int>(i), 1});
    todo.push_back({static_cast<int>(i), 1});
  }
  while (!todo.empty()) {
    auto [i, s] = todo.back();
    todo.pop_back();
    for (const auto& m : core.classes[i].terms) {
      for (const auto& f : m.factors) {
        int cls = -1, t = 0;
        if (f.kind == FactorKind::Class) {
          cls = f.index;
          t = s * f.scale;
        } else if (f.kind == FactorKind::Scalar) {
          cls = core.scalars[f.index].arg_class;
          t = s * f.scale * core.scalars[f.index].arg_scale;
        } else {
          continue;
        }
        if (t <= core.truncation && !seen.count({cls, t})) {
          seen.insert({cls, t});
          todo.push_back({cls, t});
        }
      }
    }
  }
  return seen;
}

struct FixedPoint {
  const CoreSystem& core;
  const std::vector<double>& z;
  EvalPoint& pt;

  double atom_value(int idx, int scale, int power) const {
    return std::pow(z[idx], static_cast<double>(scale) * power);
  }

  // Value of one monomial of class `cls` instantiated at scale s.
  // Returns 0 for dropped terms of truncatable sums.
  double monomial_value(int cls, const Monomial& m, int s) const {
    const bool truncatable = core.classes[cls].truncatable_sum;
    double v = m.weight;
    for (const auto& f : m.factors) {
      switch (f.kind) {
        case FactorKind::Atom:
          v *= atom_value(f.index, s, f.power);
          break;
        case FactorKind::Class: {
          const int t = s * f.scale;
          if (t > core.truncation) {
            if (truncatable) return 0.0;
            v *= std::pow(pt.zero_values[f.index], f.power);
          } else {
            v *= std::pow(pt.value(f.index, t), f.power);
          }
          break;
        }
        case FactorKind::Scalar: {
          const ScalarAtom& sc = core.scalars[f.index];
          const int t = s * f.scale * sc.arg_scale;
          double arg;
          if (t > core.truncation) {
            if (truncatable) return 0.0;
            arg = pt.zero_values[sc.arg_class];
          } else {
            arg = pt.value(sc.arg_class, t);
          }
          v *= std::pow(apply_scalar(sc.kind, arg), f.power);
          break;
        }
      }
    }
    return v;
  }

  double class_value(int cls, int s) const {
    double v = 0;
    for (const auto& m : core.classes[cls].terms)
      v += monomial_value(cls, m, s);
    return v;
  }
};

bool zero_point_values(const CoreSystem& core, std::vector<double>& out) {
  // All diagonal scales coincide at z = 0.
  out.assign(core.classes.size(), 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0;
    for (std::size_t i = 0; i < core.classes.size(); ++i) {
      double v = 0;
      for (const auto& m : core.classes[i].terms) {
        double term = m.weight;
        for (const auto& f : m.factors) {
          if (f.kind == FactorKind::Atom) {
            term = 0;
            break;
          }
          if (f.kind == FactorKind::Class) {
            term *= std::pow(out[f.index], f.power);
          } else {
            const ScalarAtom& sc = core.scalars[f.index];
            term *= std::pow(apply_scalar(sc.kind, out[sc.arg_class]), f.power);
          }
          if (term == 0) break;
        }
        v += term;
      }
      if (!std::isfinite(v) || v > 1e100) return false;
      delta = std::max(delta, std::abs(v - out[i]));
      out[i] = v;
    }
    if (delta < 1e-14) return true;
  }
  return false;
}

}  // namespace

std::set<std::pair<int, int>> diagonal_closure(const CoreSystem& core) {
  return scale_closure(core);
}

std::optional<std::vector<double>> class_constant_terms(const CoreSystem& core) {
  std::vector<double> out;
  if (!zero_point_values(core, out)) return std::nullopt;
  return out;
}

EvalResult evaluate_values(const CoreSystem& core, const std::vector<double>& z) {
  EvalResult result;
  if (z.size() != core.atoms.size()) {
    result.error = "evaluate_values: wrong atom vector length";
    return result;
  }
  EvalPoint pt;
  pt.z = z;
  pt.truncation = core.truncation;
  if (!zero_point_values(core, pt.zero_values)) {
    result.error = "point outside domain (zero-point iteration diverged)";
    return result;
  }

  const auto closure = scale_closure(core);
  // Group class indices by scale, descending.
  std::map<int, std::vector<int>, std::greater<int>> by_scale;
  for (const auto& [cls, s] : closure) by_scale[s].push_back(cls);
  for (const auto& [cls, s] : closure) pt.values[{cls, s}] = 0.0;

  FixedPoint fp{core, z, pt};
  for (const auto& [s, members] : by_scale) {
    bool converged = false;
    for (long iter = 0; iter < 1000000; ++iter) {
      double delta = 0;
      for (int cls : members) {
        const double v = fp.class_value(cls, s);
        if (!std::isfinite(v) || v > 1e200) {
          result.error = "point outside domain (value iteration diverged)";
          return result;
        }
        auto& slot = pt.values[{cls, s}];
        delta = std::max(delta, std::abs(v - slot) / (1.0 + std::abs(v)));
        slot = v;
      }
      if (delta < 1e-12) {
        pt.residual = delta;
        converged = true;
        break;
      }
    }
    if (!converged) {
      result.error = "point outside domain (no convergence)";
      return result;
    }
  }
  result.point = std::move(pt);
  return result;
}

double scalar_value(const CoreSystem& core, const EvalPoint& pt, int scalar,
                    int scale) {
  const ScalarAtom& sc = core.scalars[scalar];
  const int t = scale * sc.arg_scale;
  const double arg =
      t > core.truncation ? pt.zero_values[sc.arg_class] : pt.value(sc.arg_class, t);
  return apply_scalar(sc.kind, arg);
}

double truncation_tail_bound(const CoreSystem& core, const EvalPoint& pt) {
  double bound = 0;
  const int K = core.truncation;
  // Exact value of a class at the componentwise power z^t, evaluated with
  // a fresh fixed point (cheap: z^t is far inside the domain for t > K).
  auto value_at_power = [&](int cls, int t) -> double {
    std::vector<double> zt(pt.z.size());
    for (std::size_t i = 0; i < zt.size(); ++i)
      zt[i] = std::pow(pt.z[i], t);
    EvalResult r = evaluate_values(core, zt);
    if (!r.ok()) return std::numeric_limits<double>::infinity();
    return r.point->value(cls, 1);
  };
  for (std::size_t i = 0; i < core.classes.size(); ++i) {
    if (!core.classes[i].truncatable_sum) continue;
    // Terms follow the generated pattern: weight(j) * f(arg at scale j).
    // Extend beyond K until the terms are negligible.
    const auto& terms = core.classes[i].terms;
    if (terms.empty()) continue;
    const auto& last = terms.back().factors[0];
    int arg_class;
    bool log_form;
    if (last.kind == FactorKind::Class) {
      arg_class = last.index;
      log_form = false;
    } else {
      arg_class = core.scalars[last.index].arg_class;
      log_form = true;
    }
    for (int j = K + 1; j <= 40 * K + 4000; ++j) {
      const double a = value_at_power(arg_class, j);
      double term;
      if (log_form) {
        if (a >= 1.0) return std::numeric_limits<double>::infinity();
        term = (static_cast<double>(totient(j)) / j) * stable_log_inv(a);
      } else {
        term = a / j;
      }
      bound += term;
      if (term < 1e-18) break;
    }
  }
  return bound;
}

ExpectationResult expectation_vector(const CoreSystem& core,
                                     const std::vector<double>& z,
                                     int target_class) {
  ExpectationResult out;
  const std::size_t d = core.atoms.size();
  const double h = 1e-6;

  auto log_target = [&](const std::vector<double>& zz,
                        bool& ok) -> double {
    EvalResult r = evaluate_values(core, zz);
    if (!r.ok()) {
      ok = false;
      return 0;
    }
    ok = true;
    return std::log(r.point->value(target_class, 1));
  };

  auto shifted = [&](int i, double di, int j, double dj) {
    std::vector<double> zz = z;
    zz[i] *= std::exp(di);
    if (j >= 0) zz[j] *= std::exp(dj);
    return zz;
  };

  bool ok = true;
  const double base = log_target(z, ok);
  if (!ok) {
    out.error = "expectation_vector: base point outside domain";
    return out;
  }
  out.expectation.resize(d);
  std::vector<double> plus(d), minus(d);
  for (std::size_t i = 0; i < d; ++i) {
    plus[i] = log_target(shifted(static_cast<int>(i), h, -1, 0), ok);
    if (!ok) {
      out.error = "expectation_vector: perturbed point outside domain";
      return out;
    }
    minus[i] = log_target(shifted(static_cast<int>(i), -h, -1, 0), ok);
    if (!ok) {
      out.error = "expectation_vector: perturbed point outside domain";
      return out;
    }
    out.expectation[i] = (plus[i] - minus[i]) / (2 * h);
  }

  out.covariance.assign(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    out.covariance[i][i] = (plus[i] - 2 * base + minus[i]) / (h * h);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double pp = log_target(shifted(i, h, j, h), ok);
      const double pm = log_target(shifted(i, h, j, -h), ok);
      const double mp = log_target(shifted(i, -h, j, h), ok);
      const double mm = log_target(shifted(i, -h, j, -h), ok);
      if (!ok) {
        out.error = "expectation_vector: perturbed point outside domain";
        return out;
      }
      const double c = (pp - pm - mp + mm) / (4 * h * h);
      out.covariance[i][j] = out.covariance[j][i] = c;
    }
  }

  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = out.covariance[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  out.min_cov_eigenvalue = d > 0 ? es.eigenvalues().minCoeff() : 0.0;
  out.ok = true;
  return out;
}

// --- Sampler tables -------------------------------------------------------

namespace {

struct TableBuilder {
  const Specification& spec;
  const CoreSystem& core;
  const EvalPoint& pt;
  SamplerTables tables;
  std::string error;

  int copy_expr(const Expr& e) {
    SamplerNode n;
    n.kind = e.kind;
    n.weight = e.weight;
    n.power = e.power;
    n.restr = e.restr.kind;
    n.restr_k = e.restr.k;
    if (e.kind == ExprKind::AtomRef) n.atom = core.atom_index(e.name);
    if (e.kind == ExprKind::ClassRef) n.cls = core.class_index(e.name);
    const int idx = static_cast<int>(tables.nodes.size());
    tables.nodes.push_back(n);
    for (const auto& c : e.children) {
      const int child = copy_expr(c);
      tables.nodes[idx].children.push_back(child);
    }
    return idx;
  }

  // Value of a node at a diagonal scale, mirroring the truncated core
  // semantics.
  double node_value(int idx, int scale) {
    const SamplerNode& n = tables.nodes[idx];
    const int K = core.truncation;
    switch (n.kind) {
      case ExprKind::Neutral: return 1.0;
      case ExprKind::AtomRef:
        return std::pow(pt.z[n.atom], scale);
      case ExprKind::ClassRef:
        return pt.value(n.cls, scale);  // handles scale > K via zero values
      case ExprKind::NameRef: return 0.0;
      case ExprKind::Weighted:
        return n.weight * node_value(n.children[0], scale);
      case ExprKind::Union: {
        double s = 0;
        for (int c : n.children) s += node_value(c, scale);
        return s;
      }
      case ExprKind::Product: {
        double p = 1;
        for (int c : n.children) p *= node_value(c, scale);
        return p;
      }
      case ExprKind::Power:
        return std::pow(node_value(n.children[0], scale), n.power);
      case ExprKind::Seq: {
        const double a = node_value(n.children[0], scale);
        switch (n.restr) {
          case RestrKind::None: return 1.0 / (1.0 - a);
          case RestrKind::Eq: return std::pow(a, n.restr_k);
          case RestrKind::AtLeast:
            return std::pow(a, n.restr_k) / (1.0 - a);
          case RestrKind::AtMost: {
            double s = 0;
            for (int i = 0; i <= n.restr_k; ++i) s += std::pow(a, i);
            return s;
          }
        }
        return 0;
      }
      case ExprKind::Set: {
        const double a = node_value(n.children[0], scale);
        switch (n.restr) {
          case RestrKind::None: return std::exp(a);
          case RestrKind::Eq: return std::pow(a, n.restr_k) / factorial(n.restr_k);
          case RestrKind::AtMost: {
            double s = 0;
            for (int i = 0; i <= n.restr_k; ++i)
              s += std::pow(a, i) / factorial(i);
            return s;
          }
          case RestrKind::AtLeast:
            return n.restr_k <= 0 ? std::exp(a) : std::expm1(a);
        }
        return 0;
      }
      case ExprKind::Cycle: {
        if (spec.kind == SpecKind::Labelled) {
          const double a = node_value(n.children[0], scale);
          switch (n.restr) {
            case RestrKind::None:
            case RestrKind::AtLeast: return stable_log_inv(a);
            case RestrKind::Eq: return std::pow(a, n.restr_k) / n.restr_k;
            case RestrKind::AtMost: {
              double s = 0;
              for (int i = 1; i <= n.restr_k; ++i) s += std::pow(a, i) / i;
              return s;
            }
          }
          return 0;
        }
        switch (n.restr) {
          case RestrKind::None:
          case RestrKind::AtLeast: {
            double s = 0;
            for (int j = 1; j * scale <= K; ++j) {
              const double a = node_value(n.children[0], j * scale);
              s += (static_cast<double>(totient(j)) / j) * stable_log_inv(a);
            }
            return s;
          }
          case RestrKind::Eq: {
            double s = 0;
            for (std::uint64_t d : divisors(n.restr_k)) {
              const double a =
                  node_value(n.children[0], scale * static_cast<int>(d));
              s += static_cast<double>(totient(d)) *
                   std::pow(a, n.restr_k / static_cast<int>(d));
            }
            return s / n.restr_k;
          }
          case RestrKind::AtMost: {
            double s = 0;
            for (int i = 1; i <= n.restr_k; ++i)
              s += cyc_eq_value(idx, scale, i);
            return s;
          }
        }
        return 0;
      }
      case ExprKind::MSet: {
        switch (n.restr) {
          case RestrKind::None:
          case RestrKind::AtLeast: {
            double s = 0;
            for (int j = 1; j * scale <= K; ++j)
              s += node_value(n.children[0], j * scale) / j;
            const double v = std::exp(s);
            return n.restr == RestrKind::AtLeast && n.restr_k >= 1 ? v - 1.0 : v;
          }
          case RestrKind::Eq: return mset_eq_value(idx, scale, n.restr_k);
          case RestrKind::AtMost: {
            double s = 1.0;
            for (int i = 1; i <= n.restr_k; ++i)
              s += mset_eq_value(idx, scale, i);
            return s;
          }
        }
        return 0;
      }
    }
    return 0;
  }

  double mset_eq_value(int idx, int scale, int k) {
    const SamplerNode& n = tables.nodes[idx];
    double v = 0;
    for (const auto& part : partition_sequences(k)) {
      double term = 1.0;
      for (std::size_t i = 0; i < part.size(); ++i) {
        if (part[i] == 0) continue;
        const double a =
            node_value(n.children[0], scale * static_cast<int>(i + 1));
        term *= std::pow(a, part[i]) /
                (std::pow(static_cast<double>(i + 1), part[i]) *
                 factorial(part[i]));
      }
      v += term;
    }
    return v;
  }

  double cyc_eq_value(int idx, int scale, int k) {
    const SamplerNode& n = tables.nodes[idx];
    double v = 0;
    for (std::uint64_t d : divisors(k)) {
      const double a = node_value(n.children[0], scale * static_cast<int>(d));
      v += static_cast<double>(totient(d)) *
           std::pow(a, k / static_cast<int>(d));
    }
    return v / k;
  }

  void build_table(int idx, int scale) {
    if (tables.tables.count({idx, scale})) return;
    const SamplerNode& n = tables.nodes[idx];
    NodeTable t;
    t.value = node_value(idx, scale);
    const int K = core.truncation;

    auto queue_child = [&](int c, int s) { build_table(c, s); };

    switch (n.kind) {
      case ExprKind::Union: {
        double acc = 0;
        for (int c : n.children) acc += node_value(c, scale);
        if (acc <= 0) {
          error = "degenerate class: zero-valued union";
          return;
        }
        double run = 0;
        for (int c : n.children) {
          run += node_value(c, scale) / acc;
          t.cum.push_back(run);
        }
        t.cum.back() = 1.0;
        break;
      }
      case ExprKind::Seq:
      case ExprKind::Set: {
        t.param = node_value(n.children[0], scale);
        if (n.kind == ExprKind::Seq && n.restr == RestrKind::AtMost) {
          double acc = 0;
          for (int i = 0; i <= n.restr_k; ++i) acc += std::pow(t.param, i);
          double run = 0;
          for (int i = 0; i <= n.restr_k; ++i) {
            run += std::pow(t.param, i) / acc;
            t.cum.push_back(run);
          }
        }
        if (n.kind == ExprKind::Set && n.restr == RestrKind::AtMost) {
          double acc = 0;
          for (int i = 0; i <= n.restr_k; ++i)
            acc += std::pow(t.param, i) / factorial(i);
          double run = 0;
          for (int i = 0; i <= n.restr_k; ++i) {
            run += std::pow(t.param, i) / factorial(i) / acc;
            t.cum.push_back(run);
          }
        }
        break;
      }
      case ExprKind::Cycle: {
        if (spec.kind == SpecKind::Labelled) {
          t.param = node_value(n.children[0], scale);
          if (n.restr == RestrKind::AtMost) {
            double acc = 0;
            for (int i = 1; i <= n.restr_k; ++i)
              acc += std::pow(t.param, i) / i;
            double run = 0;
            for (int i = 1; i <= n.restr_k; ++i) {
              run += std::pow(t.param, i) / i / acc;
              t.cum.push_back(run);
            }
          }
        } else {
          // replication-order weights (phi(j)/j) log 1/(1 - A(z^{js}))
          for (int j = 1; j * scale <= K; ++j)
            t.arg_diag.push_back(node_value(n.children[0], j * scale));
          if (n.restr == RestrKind::None || n.restr == RestrKind::AtLeast) {
            double acc = 0;
            for (std::size_t j = 0; j < t.arg_diag.size(); ++j)
              acc += (static_cast<double>(totient(j + 1)) / (j + 1)) *
                     stable_log_inv(t.arg_diag[j]);
            double run = 0;
            for (std::size_t j = 0; j < t.arg_diag.size(); ++j) {
              run += (static_cast<double>(totient(j + 1)) / (j + 1)) *
                     stable_log_inv(t.arg_diag[j]) / acc;
              t.cum.push_back(run);
            }
          } else if (n.restr == RestrKind::AtMost) {
            double acc = 0;
            for (int i = 1; i <= n.restr_k; ++i)
              acc += cyc_eq_value(idx, scale, i);
            double run = 0;
            for (int i = 1; i <= n.restr_k; ++i) {
              run += cyc_eq_value(idx, scale, i) / acc;
              t.cum.push_back(run);
            }
          }
        }
        break;
      }
      case ExprKind::MSet: {
        for (int j = 1; j * scale <= K; ++j)
          t.arg_diag.push_back(node_value(n.children[0], j * scale));
        if (n.restr == RestrKind::AtMost) {
          double acc = 1.0;  // i = 0 term
          for (int i = 1; i <= n.restr_k; ++i)
            acc += mset_eq_value(idx, scale, i);
          double run = 1.0 / acc;
          t.cum.push_back(run);
          for (int i = 1; i <= n.restr_k; ++i) {
            run += mset_eq_value(idx, scale, i) / acc;
            t.cum.push_back(run);
          }
        }
        break;
      }
      default: break;
    }
    tables.tables[{idx, scale}] = std::move(t);

    // Children scales
    switch (n.kind) {
      case ExprKind::MSet: {
        if (n.restr == RestrKind::None || n.restr == RestrKind::AtLeast) {
          for (int j = 1; j * scale <= K; ++j)
            queue_child(n.children[0], j * scale);
        } else {
          const int kk = n.restr_k;
          for (int i = 1; i <= kk; ++i) queue_child(n.children[0], scale * i);
        }
        break;
      }
      case ExprKind::Cycle: {
        if (spec.kind == SpecKind::Labelled) {
          queue_child(n.children[0], scale);
        } else if (n.restr == RestrKind::None || n.restr == RestrKind::AtLeast) {
          for (int j = 1; j * scale <= K; ++j)
            queue_child(n.children[0], j * scale);
        } else {
          for (int i = 1; i <= n.restr_k; ++i)
            for (std::uint64_t d : divisors(i))
              queue_child(n.children[0], scale * static_cast<int>(d));
        }
        break;
      }
      default:
        for (int c : n.children) queue_child(c, scale);
        break;
    }
  }
};

}  // namespace

TablesResult branching_tables(const Specification& spec, const CoreSystem& core,
                              const EvalPoint& pt) {
  TablesResult result;
  TableBuilder b{spec, core, pt, {}, {}};
  b.tables.kind = spec.kind;
  b.tables.truncation = core.truncation;
  b.tables.target_class = core.target_class;
  for (const auto& a : core.atoms) {
    b.tables.atom_names.push_back(a.name);
    b.tables.atom_sizes.push_back(a.size);
  }
  for (std::size_t i = 0; i < spec.classes.size(); ++i)
    b.tables.class_names.push_back(spec.classes[i].first);

  for (std::size_t i = 0; i < spec.classes.size(); ++i)
    b.tables.class_root.push_back(b.copy_expr(spec.classes[i].second));

  // Verify class values are usable as branching denominators.
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    if (!(pt.value(static_cast<int>(i), 1) > 0)) {
      result.error = "degenerate class '" + spec.classes[i].first +
                     "': zero value at the tuned point";
      return result;
    }
  }

  // Build tables for every (node, scale) reachable from class roots. Class
  // bodies can be entered at any diagonal scale up to the truncation.
  const auto closure = scale_closure(core);
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    for (int s = 1; s <= core.truncation; ++s) {
      if (!closure.count({static_cast<int>(i), s}) && s > 1) continue;
      b.build_table(b.tables.class_root[i], s);
      if (!b.error.empty()) {
        result.error = b.error;
        return result;
      }
    }
  }
  result.tables = std::move(b.tables);
  return result;
}

}  // namespace bsamp
