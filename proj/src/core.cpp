#include "bsamp/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "bsamp/numeric.hpp"

namespace bsamp {

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : errors) {
    os << e.rule_id;
    if (!e.class_name.empty()) os << " [" << e.class_name << "]";
    os << ": " << e.message << "\n";
  }
  return os.str();
}

// --- Dependency graph -------------------------------------------------

namespace {

void collect_class_refs(const Expr& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::ClassRef) out.insert(e.name);
  for (const auto& c : e.children) collect_class_refs(c, out);
}

struct TarjanState {
  const std::vector<std::set<int>>& edges;
  std::vector<int> index, lowlink, scc;
  std::vector<bool> on_stack;
  std::vector<int> stack;
  int next_index = 0, scc_count = 0;

  explicit TarjanState(const std::vector<std::set<int>>& e)
      : edges(e),
        index(e.size(), -1),
        lowlink(e.size(), 0),
        scc(e.size(), -1),
        on_stack(e.size(), false) {}

  void run(int v) {
    index[v] = lowlink[v] = next_index++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w : edges[v]) {
      if (index[w] < 0) {
        run(w);
        lowlink[v] = std::min(lowlink[v], lowlink[w]);
      } else if (on_stack[w]) {
        lowlink[v] = std::min(lowlink[v], index[w]);
      }
    }
    if (lowlink[v] == index[v]) {
      while (true) {
        int w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        scc[w] = scc_count;
        if (w == v) break;
      }
      ++scc_count;
    }
  }
};

}  // namespace

DependencyGraph dependency_graph(const Specification& spec) {
  DependencyGraph g;
  std::map<std::string, int> index;
  for (const auto& [name, body] : spec.classes) {
    index[name] = static_cast<int>(g.nodes.size());
    g.nodes.push_back(name);
  }
  g.edges.resize(g.nodes.size());
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    std::set<std::string> refs;
    collect_class_refs(spec.classes[i].second, refs);
    for (const auto& r : refs) {
      auto it = index.find(r);
      if (it != index.end()) g.edges[i].insert(it->second);
    }
  }
  TarjanState tarjan(g.edges);
  for (std::size_t v = 0; v < g.nodes.size(); ++v)
    if (tarjan.index[v] < 0) tarjan.run(static_cast<int>(v));
  g.scc_id = tarjan.scc;
  g.scc_count = tarjan.scc_count;

  g.reachable.assign(g.nodes.size(), false);
  auto it = index.find(spec.target_class);
  if (it != index.end()) {
    std::vector<int> todo{it->second};
    g.reachable[it->second] = true;
    while (!todo.empty()) {
      int v = todo.back();
      todo.pop_back();
      for (int w : g.edges[v])
        if (!g.reachable[w]) {
          g.reachable[w] = true;
          todo.push_back(w);
        }
    }
  }
  return g;
}

// --- Validation -----------------------------------------------------------

namespace {

// Fixed-point evaluation of the source AST at a small test point, with
// diagonal scales capped. Values beyond the cap use scale-infinity limits
// (atoms -> 0), which only lowers values and cannot mask divergence.
struct AstEvaluator {
  const Specification& spec;
  int scale_cap;
  std::map<std::string, int> class_index;
  std::map<std::string, double> atom_base;  // value at scale 1
  // values[s-1][i] = value of class i at scale s
  std::vector<std::vector<double>> values;
  bool diverged = false;

  AstEvaluator(const Specification& s, double z, int cap)
      : spec(s), scale_cap(cap) {
    for (std::size_t i = 0; i < s.classes.size(); ++i)
      class_index[s.classes[i].first] = static_cast<int>(i);
    for (const auto& a : s.atoms)
      atom_base[a.name] = a.size == 0 ? 1.0 : std::pow(z, a.size);
    values.assign(scale_cap, std::vector<double>(s.classes.size(), 0.0));
  }

  double atom_value(const std::string& name, int scale) const {
    const double v = atom_base.at(name);
    return std::pow(v, scale);
  }

  double class_value(int idx, int scale) const {
    if (scale > scale_cap) return 0.0;  // conservative lower bound
    return values[scale - 1][idx];
  }

  double eval(const Expr& e, int scale) {
    switch (e.kind) {
      case ExprKind::Neutral: return 1.0;
      case ExprKind::AtomRef: return atom_value(e.name, scale);
      case ExprKind::ClassRef: {
        auto it = class_index.find(e.name);
        return it == class_index.end() ? 0.0 : class_value(it->second, scale);
      }
      case ExprKind::NameRef: return 0.0;
      case ExprKind::Weighted: return e.weight * eval(e.children[0], scale);
      case ExprKind::Union: {
        double s = 0;
        for (const auto& c : e.children) s += eval(c, scale);
        return s;
      }
      case ExprKind::Product: {
        double p = 1;
        for (const auto& c : e.children) p *= eval(c, scale);
        return p;
      }
      case ExprKind::Power: return std::pow(eval(e.children[0], scale), e.power);
      case ExprKind::Seq: return eval_seq(e, scale);
      case ExprKind::Set: return set_value(e, scale);
      case ExprKind::Cycle: return cycle_value(e, scale);
      case ExprKind::MSet: return mset_value(e, scale);
    }
    return 0.0;
  }

  // Values of the operator argument at scales scale*1, scale*2, ... up to
  // the cap (index 0 = scale*1).
  std::vector<double> eval_arg_powers(const Expr& e, int scale) {
    std::vector<double> out;
    for (int j = 1; j * scale <= scale_cap; ++j)
      out.push_back(eval(e.children[0], j * scale));
    if (out.empty()) out.push_back(0.0);
    return out;
  }

  double restricted_pow_sum(double x, const Restr& r, bool with_fact,
                            bool cycle) {
    // sum of x^i/denom over the restricted index set (labelled forms)
    auto denom = [&](int i) {
      if (with_fact) return factorial(i);
      if (cycle) return static_cast<double>(i);
      return 1.0;
    };
    switch (r.kind) {
      case RestrKind::Eq: return std::pow(x, r.k) / denom(r.k);
      case RestrKind::AtMost: {
        double s = 0;
        for (int i = cycle ? 1 : 0; i <= r.k; ++i)
          s += std::pow(x, i) / denom(i);
        return s;
      }
      default: return 0;
    }
  }

  double eval_seq(const Expr& e, int scale) {
    const double x = eval(e.children[0], scale);
    switch (e.restr.kind) {
      case RestrKind::None: break;
      case RestrKind::Eq: return std::pow(x, e.restr.k);
      case RestrKind::AtMost: {
        double s = 0;
        for (int i = 0; i <= e.restr.k; ++i) s += std::pow(x, i);
        return s;
      }
      case RestrKind::AtLeast: {
        if (x >= 1.0) {
          diverged = true;
          return 1e30;
        }
        return std::pow(x, e.restr.k) / (1.0 - x);
      }
    }
    if (x >= 1.0) {
      diverged = true;
      return 1e30;
    }
    return 1.0 / (1.0 - x);
  }

  double set_value(const Expr& e, int scale) {
    const double x = eval(e.children[0], scale);
    switch (e.restr.kind) {
      case RestrKind::None: return std::exp(x);
      case RestrKind::Eq: return std::pow(x, e.restr.k) / factorial(e.restr.k);
      case RestrKind::AtMost: return restricted_pow_sum(x, e.restr, true, false);
      case RestrKind::AtLeast: {
        double s = std::exp(x);
        for (int i = 0; i < e.restr.k; ++i) s -= std::pow(x, i) / factorial(i);
        return std::max(s, 0.0);
      }
    }
    return 0;
  }

  double cycle_value(const Expr& e, int scale) {
    if (spec.kind == SpecKind::Labelled) {
      const double x = eval(e.children[0], scale);
      switch (e.restr.kind) {
        case RestrKind::None:
        case RestrKind::AtLeast: {
          if (x >= 1.0) {
            diverged = true;
            return 1e30;
          }
          double v = std::log(1.0 / (1.0 - x));
          for (int i = 1; i < (e.restr.kind == RestrKind::AtLeast ? e.restr.k : 1);
               ++i)
            v -= std::pow(x, i) / i;
          return std::max(v, 0.0);
        }
        case RestrKind::Eq: return std::pow(x, e.restr.k) / e.restr.k;
        case RestrKind::AtMost:
          return restricted_pow_sum(x, e.restr, false, true);
      }
      return 0;
    }
    // unlabelled (Polya) cycle
    switch (e.restr.kind) {
      case RestrKind::None:
      case RestrKind::AtLeast: {
        const std::vector<double> a = eval_arg_powers(e, scale);
        double v = 0;
        for (std::size_t j = 0; j < a.size(); ++j) {
          if (a[j] >= 1.0) {
            diverged = true;
            return 1e30;
          }
          v += (static_cast<double>(totient(j + 1)) / (j + 1)) *
               std::log(1.0 / (1.0 - a[j]));
        }
        return v;
      }
      case RestrKind::Eq: {
        double v = 0;
        for (std::uint64_t d : divisors(e.restr.k)) {
          const double ad = eval(e.children[0], scale * static_cast<int>(d));
          v += static_cast<double>(totient(d)) *
               std::pow(ad, e.restr.k / static_cast<int>(d));
        }
        return v / e.restr.k;
      }
      case RestrKind::AtMost: {
        double v = 0;
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          v += cycle_value(tmp, scale);
        }
        return v;
      }
    }
    return 0;
  }

  double mset_value(const Expr& e, int scale) {
    switch (e.restr.kind) {
      case RestrKind::None:
      case RestrKind::AtLeast: {
        const std::vector<double> a = eval_arg_powers(e, scale);
        double s = 0;
        for (std::size_t j = 0; j < a.size(); ++j) s += a[j] / (j + 1);
        const double v = std::exp(s);
        return e.restr.kind == RestrKind::AtLeast ? std::max(v - 1.0, 0.0) : v;
      }
      case RestrKind::Eq: {
        double v = 0;
        for (const auto& part : partition_sequences(e.restr.k)) {
          double term = 1.0;
          for (std::size_t i = 0; i < part.size(); ++i) {
            if (part[i] == 0) continue;
            const double ai =
                eval(e.children[0], scale * static_cast<int>(i + 1));
            term *= std::pow(ai, part[i]) /
                    (std::pow(static_cast<double>(i + 1), part[i]) *
                     factorial(part[i]));
          }
          v += term;
        }
        return v;
      }
      case RestrKind::AtMost: {
        double v = 1.0;
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          v += mset_value(tmp, scale);
        }
        return v;
      }
    }
    return 0;
  }

  // One synchronous iteration sweep; returns max relative change.
  double sweep() {
    double delta = 0;
    for (int s = scale_cap; s >= 1; --s) {
      for (std::size_t i = 0; i < spec.classes.size(); ++i) {
        double v = eval(spec.classes[i].second, s);
        if (!std::isfinite(v) || v > 1e30) {
          diverged = true;
          v = 1e30;
        }
        delta = std::max(delta,
                         std::abs(v - values[s - 1][i]) / (1.0 + std::abs(v)));
        values[s - 1][i] = v;
      }
    }
    return delta;
  }
};

bool body_autonomous_polynomial(const Specification& spec, const Expr& e,
                                const std::string& self) {
  switch (e.kind) {
    case ExprKind::Neutral: return true;
    case ExprKind::AtomRef: {
      const AtomDecl* a = spec.find_atom(e.name);
      return a && a->size == 0;  // markers only; no explicit z
    }
    case ExprKind::ClassRef: return e.name == self;
    case ExprKind::Weighted:
    case ExprKind::Union:
    case ExprKind::Product:
    case ExprKind::Power: {
      for (const auto& c : e.children)
        if (!body_autonomous_polynomial(spec, c, self)) return false;
      return true;
    }
    default: return false;  // Seq/Set/Cycle/MSet: not a polynomial
  }
}

void check_operators(const Expr& e, SpecKind kind, const std::string& cls,
                     std::vector<ValidationIssue>& errors) {
  if (kind == SpecKind::Labelled && e.kind == ExprKind::MSet)
    errors.push_back({"illegal-operator", cls,
                      "MSet is an unlabelled operator (labelled system)"});
  if (kind == SpecKind::Unlabelled && e.kind == ExprKind::Set)
    errors.push_back({"illegal-operator", cls,
                      "Set is a labelled operator (unlabelled system)"});
  for (const auto& c : e.children) check_operators(c, kind, cls, errors);
}

void check_resolved(const Specification& spec, const Expr& e,
                    const std::string& cls,
                    std::vector<ValidationIssue>& errors) {
  if (e.kind == ExprKind::NameRef ||
      (e.kind == ExprKind::ClassRef && !spec.find_class(e.name))) {
    errors.push_back({"unresolved-ref", cls,
                      "unknown name '" + e.name + "' in class " + cls});
  }
  if (e.kind == ExprKind::AtomRef && !spec.find_atom(e.name))
    errors.push_back({"unresolved-ref", cls,
                      "undeclared atom '" + e.name + "' in class " + cls});
  for (const auto& c : e.children) check_resolved(spec, c, cls, errors);
}

}  // namespace

ValidationReport validate(const Specification& spec) {
  ValidationReport report;
  auto& errors = report.errors;

  if (spec.classes.empty()) {
    errors.push_back({"empty-spec", "", "specification defines no classes"});
    return report;
  }
  if (!spec.find_class(spec.target_class)) {
    errors.push_back({"missing-target-class", spec.target_class,
                      "target class '" + spec.target_class + "' is not defined"});
    return report;
  }

  for (const auto& [name, body] : spec.classes) {
    check_resolved(spec, body, name, errors);
    check_operators(body, spec.kind, name, errors);
  }
  if (!errors.empty()) return report;

  if (spec.differential) {
    if (spec.classes.size() != 1) {
      errors.push_back({"differential-system", spec.target_class,
                        "a differential rule must be the only class"});
      return report;
    }
    const Expr& body = spec.classes[0].second;
    if (!body_autonomous_polynomial(spec, body, spec.target_class)) {
      errors.push_back(
          {"differential-not-polynomial", spec.target_class,
           "differential rule must be a positive polynomial in the class "
           "itself and size-0 markers"});
    }
    return report;
  }

  DependencyGraph graph = dependency_graph(spec);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (!graph.reachable[i])
      errors.push_back({"unreachable-class", graph.nodes[i],
                        "class " + graph.nodes[i] +
                            " is not reachable from the target class"});
  }
  if (spec.size_kind == SizeTargetKind::Singular && !graph.strongly_connected())
    errors.push_back(
        {"singular-not-strongly-connected", spec.target_class,
         "singular tuning requires a strongly connected class graph"});
  if (!errors.empty()) return report;

  // Fixed-point convergence probe at a tiny test point.
  AstEvaluator eval(spec, 1e-6, 8);
  bool converged = false;
  for (int iter = 0; iter < 10000; ++iter) {
    const double delta = eval.sweep();
    if (eval.diverged) break;
    if (delta < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged || eval.diverged) {
    errors.push_back({"ill-founded", "",
                      "value iteration at the test point does not converge "
                      "(epsilon-cycle or ill-founded system)"});
    return report;
  }
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    if (eval.values[0][i] <= 0.0)
      errors.push_back({"ill-founded", spec.classes[i].first,
                        "class " + spec.classes[i].first +
                            " has value 0 at the test point "
                            "(epsilon-cycle or empty class)"});
  }
  return report;
}

// --- Desugaring -------------------------------------------------------

namespace {

struct DesugarContext {
  const Specification& spec;
  CoreSystem core;
  std::map<std::string, int> class_index;
  std::optional<ValidationIssue> error;
  int aux_counter = 0;

  explicit DesugarContext(const Specification& s) : spec(s) {}

  void fail(const std::string& cls, const std::string& msg) {
    if (!error) error = ValidationIssue{"unsupported", cls, msg};
  }

  int fresh_class(const std::string& hint, bool truncatable = false) {
    CoreClass c;
    c.name = hint + "." + std::to_string(aux_counter++);
    c.truncatable_sum = truncatable;
    core.classes.push_back(std::move(c));
    return static_cast<int>(core.classes.size() - 1);
  }

  static Factor atom_factor(int idx, int power = 1) {
    return Factor{FactorKind::Atom, idx, 1, power};
  }
  static Factor class_factor(int idx, int scale = 1, int power = 1) {
    return Factor{FactorKind::Class, idx, scale, power};
  }
  static Factor scalar_factor(int idx) {
    return Factor{FactorKind::Scalar, idx, 1, 1};
  }

  static Monomial mono(double w, std::vector<Factor> fs = {}) {
    Monomial m;
    m.weight = w;
    m.factors = std::move(fs);
    return m;
  }

  static Monomial mul(const Monomial& a, const Monomial& b) {
    Monomial m;
    m.weight = a.weight * b.weight;
    m.factors = a.factors;
    m.factors.insert(m.factors.end(), b.factors.begin(), b.factors.end());
    return m;
  }

  static void canonicalize(Monomial& m) {
    std::sort(m.factors.begin(), m.factors.end(),
              [](const Factor& x, const Factor& y) {
                return std::tie(x.kind, x.index, x.scale) <
                       std::tie(y.kind, y.index, y.scale);
              });
    std::vector<Factor> merged;
    for (const auto& f : m.factors) {
      if (!merged.empty() && merged.back().kind == f.kind &&
          merged.back().index == f.index && merged.back().scale == f.scale) {
        merged.back().power += f.power;
      } else {
        merged.push_back(f);
      }
    }
    m.factors = std::move(merged);
  }

  static std::vector<Monomial> mul_sums(const std::vector<Monomial>& a,
                                        const std::vector<Monomial>& b) {
    std::vector<Monomial> out;
    out.reserve(a.size() * b.size());
    for (const auto& x : a)
      for (const auto& y : b) out.push_back(mul(x, y));
    return out;
  }

  // Wrap a monomial sum in an auxiliary class unless it is already a bare
  // class reference; returns the class index usable as a scalar argument
  // or powered factor.
  int as_class(const std::vector<Monomial>& sum, const std::string& hint) {
    if (sum.size() == 1 && sum[0].weight == 1.0 && sum[0].factors.size() == 1) {
      const Factor& f = sum[0].factors[0];
      if (f.kind == FactorKind::Class && f.scale == 1 && f.power == 1)
        return f.index;
    }
    const int idx = fresh_class(hint);
    core.classes[idx].terms = sum;
    return idx;
  }

  int add_scalar(ScalarKind kind, int arg_class, int arg_scale) {
    for (std::size_t i = 0; i < core.scalars.size(); ++i) {
      const auto& s = core.scalars[i];
      if (s.kind == kind && s.arg_class == arg_class && s.arg_scale == arg_scale)
        return static_cast<int>(i);
    }
    core.scalars.push_back({kind, arg_class, arg_scale});
    return static_cast<int>(core.scalars.size() - 1);
  }

  // MSet / unlabelled-Cycle series sum: sum_{j<=K} arg(z^j)/j as a class.
  int polya_log_sum(int arg_class, const std::string& hint) {
    const int idx = fresh_class(hint, /*truncatable=*/true);
    std::vector<Monomial> terms;
    for (int j = 1; j <= core.truncation; ++j)
      terms.push_back(mono(1.0 / j, {class_factor(arg_class, j)}));
    core.classes[idx].terms = std::move(terms);
    return idx;
  }

  std::vector<Monomial> expand(const Expr& e, const std::string& cls) {
    switch (e.kind) {
      case ExprKind::Neutral: return {mono(1.0)};
      case ExprKind::AtomRef: {
        const int idx = core.atom_index(e.name);
        return {mono(1.0, {atom_factor(idx)})};
      }
      case ExprKind::ClassRef: {
        return {mono(1.0, {class_factor(class_index.at(e.name))})};
      }
      case ExprKind::NameRef: {
        fail(cls, "unresolved name survived validation");
        return {mono(1.0)};
      }
      case ExprKind::Weighted: {
        auto sum = expand(e.children[0], cls);
        for (auto& m : sum) m.weight *= e.weight;
        return sum;
      }
      case ExprKind::Union: {
        std::vector<Monomial> out;
        for (const auto& c : e.children) {
          auto sum = expand(c, cls);
          out.insert(out.end(), sum.begin(), sum.end());
        }
        return out;
      }
      case ExprKind::Product: {
        std::vector<Monomial> out{mono(1.0)};
        for (const auto& c : e.children) out = mul_sums(out, expand(c, cls));
        return out;
      }
      case ExprKind::Power: {
        auto base = expand(e.children[0], cls);
        if (base.size() == 1) {
          Monomial m = base[0];
          m.weight = std::pow(m.weight, e.power);
          for (auto& f : m.factors) f.power *= e.power;
          return {m};
        }
        std::vector<Monomial> out{mono(1.0)};
        for (int i = 0; i < e.power; ++i) out = mul_sums(out, base);
        return out;
      }
      case ExprKind::Seq: return expand_seq(e, cls);
      case ExprKind::Set: return expand_set(e, cls);
      case ExprKind::Cycle: return expand_cycle(e, cls);
      case ExprKind::MSet: return expand_mset(e, cls);
    }
    return {mono(1.0)};
  }

  std::vector<Monomial> expand_seq(const Expr& e, const std::string& cls) {
    auto arg = expand(e.children[0], cls);
    switch (e.restr.kind) {
      case RestrKind::None: {
        const int s = fresh_class(cls + ".seq");
        std::vector<Monomial> terms{mono(1.0)};
        for (const auto& m : arg)
          terms.push_back(mul(m, mono(1.0, {class_factor(s)})));
        core.classes[s].terms = std::move(terms);
        return {mono(1.0, {class_factor(s)})};
      }
      case RestrKind::Eq: {
        if (e.restr.k == 0) return {mono(1.0)};
        const int a = as_class(arg, cls + ".arg");
        return {mono(1.0, {class_factor(a, 1, e.restr.k)})};
      }
      case RestrKind::AtLeast: {
        const int s = fresh_class(cls + ".seq");
        std::vector<Monomial> terms{mono(1.0)};
        for (const auto& m : arg)
          terms.push_back(mul(m, mono(1.0, {class_factor(s)})));
        core.classes[s].terms = std::move(terms);
        if (e.restr.k == 0) return {mono(1.0, {class_factor(s)})};
        const int a = as_class(arg, cls + ".arg");
        return {mono(1.0, {class_factor(a, 1, e.restr.k), class_factor(s)})};
      }
      case RestrKind::AtMost: {
        std::vector<Monomial> out{mono(1.0)};
        if (e.restr.k == 0) return out;
        const int a = as_class(arg, cls + ".arg");
        for (int i = 1; i <= e.restr.k; ++i)
          out.push_back(mono(1.0, {class_factor(a, 1, i)}));
        return out;
      }
    }
    return {mono(1.0)};
  }

  std::vector<Monomial> expand_set(const Expr& e, const std::string& cls) {
    auto arg = expand(e.children[0], cls);
    switch (e.restr.kind) {
      case RestrKind::None: {
        const int a = as_class(arg, cls + ".arg");
        const int s = add_scalar(ScalarKind::Exp, a, 1);
        return {mono(1.0, {scalar_factor(s)})};
      }
      case RestrKind::Eq: {
        if (e.restr.k == 0) return {mono(1.0)};
        const int a = as_class(arg, cls + ".arg");
        return {mono(1.0 / factorial(e.restr.k),
                     {class_factor(a, 1, e.restr.k)})};
      }
      case RestrKind::AtMost: {
        std::vector<Monomial> out{mono(1.0)};
        if (e.restr.k == 0) return out;
        const int a = as_class(arg, cls + ".arg");
        for (int i = 1; i <= e.restr.k; ++i)
          out.push_back(mono(1.0 / factorial(i), {class_factor(a, 1, i)}));
        return out;
      }
      case RestrKind::AtLeast: {
        if (e.restr.k == 0) return expand_set_unrestricted(arg, cls);
        if (e.restr.k == 1) {
          const int a = as_class(arg, cls + ".arg");
          const int s = add_scalar(ScalarKind::ExpM1, a, 1);
          return {mono(1.0, {scalar_factor(s)})};
        }
        fail(cls, "Set[>=k] for k >= 2 is unsupported (DCCP-only, out of scope)");
        return {mono(1.0)};
      }
    }
    return {mono(1.0)};
  }

  std::vector<Monomial> expand_set_unrestricted(const std::vector<Monomial>& arg,
                                                const std::string& cls) {
    const int a = as_class(arg, cls + ".arg");
    const int s = add_scalar(ScalarKind::Exp, a, 1);
    return {mono(1.0, {scalar_factor(s)})};
  }

  std::vector<Monomial> expand_cycle(const Expr& e, const std::string& cls) {
    auto arg = expand(e.children[0], cls);
    const bool labelled = spec.kind == SpecKind::Labelled;
    switch (e.restr.kind) {
      case RestrKind::None: break;
      case RestrKind::Eq: {
        if (e.restr.k == 0) {
          fail(cls, "Cyc[=0] denotes the empty class");
          return {mono(1.0)};
        }
        const int a = as_class(arg, cls + ".arg");
        if (labelled)
          return {mono(1.0 / e.restr.k, {class_factor(a, 1, e.restr.k)})};
        // (1/k) sum_{d|k} phi(d) A(z^d)^{k/d}
        std::vector<Monomial> out;
        for (std::uint64_t d : divisors(e.restr.k)) {
          out.push_back(mono(static_cast<double>(totient(d)) / e.restr.k,
                             {class_factor(a, static_cast<int>(d),
                                           e.restr.k / static_cast<int>(d))}));
        }
        return out;
      }
      case RestrKind::AtMost: {
        if (e.restr.k == 0) {
          fail(cls, "Cyc[<=0] denotes the empty class");
          return {mono(1.0)};
        }
        std::vector<Monomial> out;
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          auto part = expand_cycle(tmp, cls);
          out.insert(out.end(), part.begin(), part.end());
        }
        return out;
      }
      case RestrKind::AtLeast: {
        if (e.restr.k <= 1) break;  // Cyc[>=1] == Cyc
        fail(cls, "Cyc[>=k] for k >= 2 is unsupported (DCCP-only, out of scope)");
        return {mono(1.0)};
      }
    }
    const int a = as_class(arg, cls + ".arg");
    if (labelled) {
      const int s = add_scalar(ScalarKind::LogInv, a, 1);
      return {mono(1.0, {scalar_factor(s)})};
    }
    // sum_{j<=K} (phi(j)/j) log 1/(1 - A(z^j)) as an auxiliary sum class
    const int idx = fresh_class(cls + ".cyc", /*truncatable=*/true);
    std::vector<Monomial> terms;
    for (int j = 1; j <= core.truncation; ++j) {
      const int s = add_scalar(ScalarKind::LogInv, a, j);
      terms.push_back(mono(static_cast<double>(totient(j)) / j,
                           {scalar_factor(s)}));
    }
    core.classes[idx].terms = std::move(terms);
    return {mono(1.0, {class_factor(idx)})};
  }

  std::vector<Monomial> expand_mset(const Expr& e, const std::string& cls) {
    auto arg = expand(e.children[0], cls);
    switch (e.restr.kind) {
      case RestrKind::None: {
        const int a = as_class(arg, cls + ".arg");
        const int sum = polya_log_sum(a, cls + ".msum");
        const int s = add_scalar(ScalarKind::Exp, sum, 1);
        return {mono(1.0, {scalar_factor(s)})};
      }
      case RestrKind::Eq: {
        if (e.restr.k == 0) return {mono(1.0)};
        const int a = as_class(arg, cls + ".arg");
        std::vector<Monomial> out;
        for (const auto& part : partition_sequences(e.restr.k)) {
          Monomial m = mono(1.0);
          for (std::size_t i = 0; i < part.size(); ++i) {
            if (part[i] == 0) continue;
            m.weight /= std::pow(static_cast<double>(i + 1), part[i]) *
                        factorial(part[i]);
            m.factors.push_back(
                class_factor(a, static_cast<int>(i + 1), part[i]));
          }
          out.push_back(std::move(m));
        }
        return out;
      }
      case RestrKind::AtMost: {
        std::vector<Monomial> out{mono(1.0)};
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          auto part = expand_mset(tmp, cls);
          out.insert(out.end(), part.begin(), part.end());
        }
        return out;
      }
      case RestrKind::AtLeast: {
        if (e.restr.k == 0) {
          Expr tmp = e;
          tmp.restr = {RestrKind::None, 0};
          return expand_mset(tmp, cls);
        }
        if (e.restr.k == 1) {
          const int a = as_class(arg, cls + ".arg");
          const int sum = polya_log_sum(a, cls + ".msum");
          const int s = add_scalar(ScalarKind::ExpM1, sum, 1);
          return {mono(1.0, {scalar_factor(s)})};
        }
        fail(cls, "MSet[>=k] for k >= 2 is unsupported (DCCP-only, out of scope)");
        return {mono(1.0)};
      }
    }
    return {mono(1.0)};
  }
};

}  // namespace

DesugarResult desugar(const Specification& spec, const DesugarOptions& opts) {
  DesugarResult result;
  DesugarContext ctx(spec);
  ctx.core.kind = spec.kind;
  ctx.core.atoms = spec.atoms;
  ctx.core.truncation = opts.truncation;
  ctx.core.size_kind = spec.size_kind;
  ctx.core.size_value = spec.size_value;
  ctx.core.tolerance = spec.tolerance;

  // User classes first so indices line up with source order.
  for (const auto& [name, body] : spec.classes) {
    CoreClass c;
    c.name = name;
    ctx.class_index[name] = static_cast<int>(ctx.core.classes.size());
    ctx.core.classes.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    auto terms = ctx.expand(spec.classes[i].second, spec.classes[i].first);
    if (ctx.error) break;
    for (auto& m : terms) DesugarContext::canonicalize(m);
    ctx.core.classes[i].terms = std::move(terms);
  }
  if (ctx.error) {
    result.error = ctx.error;
    return result;
  }
  for (auto& c : ctx.core.classes)
    for (auto& m : c.terms) DesugarContext::canonicalize(m);
  ctx.core.target_class = ctx.class_index.at(spec.target_class);
  result.core = std::move(ctx.core);
  return result;
}

// --- Combination operator ----------------------------------------------

std::string select_combination(Specification& spec,
                               const std::vector<std::string>& class_refs,
                               int k) {
  const int d = static_cast<int>(class_refs.size());
  if (k < 1 || k > d)
    throw std::invalid_argument("select_combination: k must be in [1, d]");
  for (const auto& name : class_refs)
    if (!spec.find_class(name))
      throw std::invalid_argument("select_combination: unknown class " + name);

  // Unique prefix per invocation.
  int tag = 0;
  auto row_name = [&](int kk, int m) {
    return "Sel" + std::to_string(tag) + ".P" + std::to_string(kk) + "." +
           std::to_string(m);
  };
  while (spec.find_class(row_name(1, 1))) ++tag;

  // P[1][m] = C_1 + ... + C_m;  P[j][m] = P[j][m-1] + C_m * P[j-1][m-1]
  for (int j = 1; j <= k; ++j) {
    for (int m = j; m <= d; ++m) {
      Expr body;
      if (j == 1) {
        if (m == 1) {
          body = Expr::cls(class_refs[0]);
        } else {
          body = Expr::sum(
              {Expr::cls(row_name(1, m - 1)), Expr::cls(class_refs[m - 1])});
        }
      } else if (m == j) {
        body = Expr::product(
            {Expr::cls(class_refs[m - 1]), Expr::cls(row_name(j - 1, m - 1))});
      } else {
        body = Expr::sum(
            {Expr::cls(row_name(j, m - 1)),
             Expr::product({Expr::cls(class_refs[m - 1]),
                            Expr::cls(row_name(j - 1, m - 1))})});
      }
      spec.classes.emplace_back(row_name(j, m), std::move(body));
    }
  }
  return row_name(k, d);
}

}  // namespace bsamp
