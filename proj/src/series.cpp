#include "bsamp/series.hpp"

#include <cmath>
#include <stdexcept>

#include "bsamp/numeric.hpp"

namespace bsamp {

TruncatedSeries TruncatedSeries::constant(std::vector<int> atom_sizes,
                                          int max_size, double c) {
  TruncatedSeries s(std::move(atom_sizes), max_size);
  if (c != 0.0) s.coeffs_[std::vector<int>(s.atom_sizes_.size(), 0)] = c;
  return s;
}

TruncatedSeries TruncatedSeries::atom(std::vector<int> atom_sizes,
                                      int max_size, int atom_index) {
  TruncatedSeries s(std::move(atom_sizes), max_size);
  std::vector<int> p(s.atom_sizes_.size(), 0);
  p[atom_index] = 1;
  if (s.total_size(p) <= max_size) s.coeffs_[p] = 1.0;
  return s;
}

int TruncatedSeries::total_size(const std::vector<int>& p) const {
  int n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) n += p[i] * atom_sizes_[i];
  return n;
}

double TruncatedSeries::coeff(const std::vector<int>& p) const {
  auto it = coeffs_.find(p);
  return it == coeffs_.end() ? 0.0 : it->second;
}

double TruncatedSeries::constant_term() const {
  return coeff(std::vector<int>(atom_sizes_.size(), 0));
}

void TruncatedSeries::set(const std::vector<int>& p, double v) {
  if (total_size(p) > max_size_) return;
  if (v == 0.0)
    coeffs_.erase(p);
  else
    coeffs_[p] = v;
}

void TruncatedSeries::add_to(const std::vector<int>& p, double v) {
  if (v == 0.0 || total_size(p) > max_size_) return;
  coeffs_[p] += v;
}

TruncatedSeries TruncatedSeries::operator+(const TruncatedSeries& o) const {
  TruncatedSeries out = *this;
  for (const auto& [p, v] : o.coeffs_) out.add_to(p, v);
  return out;
}

TruncatedSeries TruncatedSeries::operator*(const TruncatedSeries& o) const {
  TruncatedSeries out(atom_sizes_, max_size_);
  std::vector<int> q(atom_sizes_.size());
  for (const auto& [pa, va] : coeffs_) {
    const int sa = total_size(pa);
    for (const auto& [pb, vb] : o.coeffs_) {
      if (sa + o.total_size(pb) > max_size_) continue;
      for (std::size_t i = 0; i < q.size(); ++i) q[i] = pa[i] + pb[i];
      out.coeffs_[q] += va * vb;
    }
  }
  return out;
}

TruncatedSeries TruncatedSeries::scaled(double w) const {
  TruncatedSeries out = *this;
  for (auto& [p, v] : out.coeffs_) v *= w;
  return out;
}

TruncatedSeries TruncatedSeries::pow(int k) const {
  TruncatedSeries out = constant(atom_sizes_, max_size_, 1.0);
  for (int i = 0; i < k; ++i) out = out * *this;
  return out;
}

TruncatedSeries TruncatedSeries::diagonal(int k) const {
  TruncatedSeries out(atom_sizes_, max_size_);
  std::vector<int> q(atom_sizes_.size());
  for (const auto& [p, v] : coeffs_) {
    bool fits = true;
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[i] * k;
    if (out.total_size(q) > max_size_) fits = false;
    if (fits) out.coeffs_[q] = v;
  }
  return out;
}

namespace {

// Composition g(A) for g(x) = sum_m g_m x^m given through term weights,
// with the constant part of A handled by the caller.
TruncatedSeries compose_positive_part(
    const TruncatedSeries& a_pos, int max_terms,
    const std::function<double(int)>& term_weight) {
  TruncatedSeries out = a_pos.scaled(0.0);
  TruncatedSeries power = a_pos.scaled(0.0);
  power.add_to(std::vector<int>(static_cast<std::size_t>(power.dims()), 0),
               1.0);
  for (int m = 0; m <= max_terms; ++m) {
    const double w = term_weight(m);
    if (w != 0.0) {
      TruncatedSeries t = power.scaled(w);
      out = out + t;
    }
    if (m < max_terms) power = power * a_pos;
  }
  return out;
}

}  // namespace

TruncatedSeries TruncatedSeries::exp_series() const {
  const double a0 = constant_term();
  TruncatedSeries pos = *this;
  pos.set(std::vector<int>(atom_sizes_.size(), 0), 0.0);
  const double scale = std::exp(a0);
  // exp(a0 + P) = e^{a0} * sum P^m / m!
  TruncatedSeries out =
      compose_positive_part(pos, max_size_, [](int m) { return 1.0 / factorial(m); });
  return out.scaled(scale);
}

TruncatedSeries TruncatedSeries::log_inv_series() const {
  const double a0 = constant_term();
  if (a0 >= 1.0)
    throw std::runtime_error("log_inv_series: constant term >= 1");
  TruncatedSeries pos = *this;
  pos.set(std::vector<int>(atom_sizes_.size(), 0), 0.0);
  // log 1/(1-a0-P) = log 1/(1-a0) + sum_{m>=1} (P/(1-a0))^m / m
  TruncatedSeries b = pos.scaled(1.0 / (1.0 - a0));
  TruncatedSeries out = compose_positive_part(
      b, max_size_, [](int m) { return m == 0 ? 0.0 : 1.0 / m; });
  out.add_to(std::vector<int>(atom_sizes_.size(), 0),
             std::log(1.0 / (1.0 - a0)));
  return out;
}

std::vector<double> TruncatedSeries::by_total_size() const {
  std::vector<double> out(static_cast<std::size_t>(max_size_) + 1, 0.0);
  for (const auto& [p, v] : coeffs_) out[total_size(p)] += v;
  return out;
}

double TruncatedSeries::eval(const std::vector<double>& z) const {
  double sum = 0;
  for (const auto& [p, v] : coeffs_) {
    double term = v;
    for (std::size_t i = 0; i < p.size(); ++i)
      term *= std::pow(z[i], p[i]);
    sum += term;
  }
  return sum;
}

double TruncatedSeries::eval_slice(const std::vector<double>& z, int k) const {
  double sum = 0;
  for (const auto& [p, v] : coeffs_) {
    if (total_size(p) != k) continue;
    double term = v;
    for (std::size_t i = 0; i < p.size(); ++i)
      term *= std::pow(z[i], p[i]);
    sum += term;
  }
  return sum;
}

double TruncatedSeries::max_abs_diff(const TruncatedSeries& o) const {
  double d = 0;
  for (const auto& [p, v] : coeffs_)
    d = std::max(d, std::abs(v - o.coeff(p)));
  for (const auto& [p, v] : o.coeffs_)
    d = std::max(d, std::abs(v - coeff(p)));
  return d;
}

// --- Source-AST series semantics ------------------------------------------

namespace {

struct AstSeries {
  const Specification& spec;
  int max_size;
  std::vector<int> atom_sizes;
  std::map<std::string, int> atom_index;
  std::map<std::string, int> class_index;
  std::vector<TruncatedSeries> classes;
  bool labelled;

  AstSeries(const Specification& s, int n) : spec(s), max_size(n) {
    labelled = s.kind == SpecKind::Labelled;
    for (const auto& a : s.atoms) {
      atom_index[a.name] = static_cast<int>(atom_sizes.size());
      atom_sizes.push_back(a.size);
    }
    for (std::size_t i = 0; i < s.classes.size(); ++i)
      class_index[s.classes[i].first] = static_cast<int>(i);
    classes.assign(s.classes.size(),
                   TruncatedSeries(atom_sizes, max_size));
  }

  TruncatedSeries zero() const { return TruncatedSeries(atom_sizes, max_size); }
  TruncatedSeries one() const {
    return TruncatedSeries::constant(atom_sizes, max_size, 1.0);
  }

  TruncatedSeries eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Neutral: return one();
      case ExprKind::AtomRef:
        return TruncatedSeries::atom(atom_sizes, max_size,
                                     atom_index.at(e.name));
      case ExprKind::ClassRef: return classes[class_index.at(e.name)];
      case ExprKind::NameRef:
        throw std::runtime_error("series: unresolved name " + e.name);
      case ExprKind::Weighted: return eval(e.children[0]).scaled(e.weight);
      case ExprKind::Union: {
        TruncatedSeries s = zero();
        for (const auto& c : e.children) s = s + eval(c);
        return s;
      }
      case ExprKind::Product: {
        TruncatedSeries s = one();
        for (const auto& c : e.children) s = s * eval(c);
        return s;
      }
      case ExprKind::Power: return eval(e.children[0]).pow(e.power);
      case ExprKind::Seq: return eval_seq(e);
      case ExprKind::Set: return eval_set(e);
      case ExprKind::Cycle: return eval_cycle(e);
      case ExprKind::MSet: return eval_mset(e);
    }
    return zero();
  }

  TruncatedSeries eval_seq(const Expr& e) {
    TruncatedSeries a = eval(e.children[0]);
    const double a0 = a.constant_term();
    int extra = 0;
    if (a0 > 0) {
      if (a0 >= 1.0) throw std::runtime_error("Seq of nullable argument");
      extra = static_cast<int>(std::ceil(std::log(1e-18) / std::log(a0)));
    }
    const int terms = max_size + extra;
    auto geom = [&](int lo, int hi) {
      TruncatedSeries s = zero();
      TruncatedSeries p = a.pow(lo);
      for (int i = lo; i <= hi; ++i) {
        s = s + p;
        if (i < hi) p = p * a;
      }
      return s;
    };
    switch (e.restr.kind) {
      case RestrKind::None: return geom(0, terms);
      case RestrKind::Eq: return a.pow(e.restr.k);
      case RestrKind::AtMost: return geom(0, e.restr.k);
      case RestrKind::AtLeast: return geom(e.restr.k, terms + e.restr.k);
    }
    return zero();
  }

  TruncatedSeries eval_set(const Expr& e) {
    TruncatedSeries a = eval(e.children[0]);
    switch (e.restr.kind) {
      case RestrKind::None: return a.exp_series();
      case RestrKind::Eq: return a.pow(e.restr.k).scaled(1.0 / factorial(e.restr.k));
      case RestrKind::AtMost: {
        TruncatedSeries s = zero();
        for (int i = 0; i <= e.restr.k; ++i)
          s = s + a.pow(i).scaled(1.0 / factorial(i));
        return s;
      }
      case RestrKind::AtLeast: {
        TruncatedSeries s = a.exp_series();
        // subtract the first k terms; valid series-wise even though the
        // convex framework excludes it for k >= 2
        for (int i = 0; i < e.restr.k; ++i) {
          TruncatedSeries t = a.pow(i).scaled(-1.0 / factorial(i));
          s = s + t;
        }
        return s;
      }
    }
    return zero();
  }

  TruncatedSeries eval_cycle(const Expr& e) {
    TruncatedSeries a = eval(e.children[0]);
    if (labelled) {
      switch (e.restr.kind) {
        case RestrKind::None: return a.log_inv_series();
        case RestrKind::Eq: return a.pow(e.restr.k).scaled(1.0 / e.restr.k);
        case RestrKind::AtMost: {
          TruncatedSeries s = zero();
          for (int i = 1; i <= e.restr.k; ++i)
            s = s + a.pow(i).scaled(1.0 / i);
          return s;
        }
        case RestrKind::AtLeast: {
          TruncatedSeries s = a.log_inv_series();
          for (int i = 1; i < e.restr.k; ++i)
            s = s + a.pow(i).scaled(-1.0 / i);
          return s;
        }
      }
      return zero();
    }
    // Polya cycle
    if (a.constant_term() != 0.0)
      throw std::runtime_error("Cyc of nullable argument (unlabelled)");
    switch (e.restr.kind) {
      case RestrKind::None:
      case RestrKind::AtLeast: {
        TruncatedSeries s = zero();
        for (int j = 1; j <= max_size; ++j) {
          TruncatedSeries d = a.diagonal(j);
          s = s + d.log_inv_series().scaled(
                      static_cast<double>(totient(j)) / j);
        }
        if (e.restr.kind == RestrKind::AtLeast && e.restr.k > 1) {
          for (int i = 1; i < e.restr.k; ++i) {
            Expr tmp = e;
            tmp.restr = {RestrKind::Eq, i};
            s = s + eval_cycle(tmp).scaled(-1.0);
          }
        }
        return s;
      }
      case RestrKind::Eq: {
        TruncatedSeries s = zero();
        for (std::uint64_t d : divisors(e.restr.k)) {
          s = s + a.diagonal(static_cast<int>(d))
                      .pow(e.restr.k / static_cast<int>(d))
                      .scaled(static_cast<double>(totient(d)) / e.restr.k);
        }
        return s;
      }
      case RestrKind::AtMost: {
        TruncatedSeries s = zero();
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          s = s + eval_cycle(tmp);
        }
        return s;
      }
    }
    return zero();
  }

  TruncatedSeries eval_mset(const Expr& e) {
    TruncatedSeries a = eval(e.children[0]);
    if (a.constant_term() != 0.0)
      throw std::runtime_error("MSet of nullable argument");
    auto full_log = [&]() {
      TruncatedSeries s = zero();
      for (int j = 1; j <= max_size; ++j)
        s = s + a.diagonal(j).scaled(1.0 / j);
      return s;
    };
    switch (e.restr.kind) {
      case RestrKind::None: return full_log().exp_series();
      case RestrKind::Eq: {
        TruncatedSeries s = zero();
        for (const auto& part : partition_sequences(e.restr.k)) {
          TruncatedSeries term = one();
          double w = 1.0;
          for (std::size_t i = 0; i < part.size(); ++i) {
            if (part[i] == 0) continue;
            term = term * a.diagonal(static_cast<int>(i + 1)).pow(part[i]);
            w /= std::pow(static_cast<double>(i + 1), part[i]) *
                 factorial(part[i]);
          }
          s = s + term.scaled(w);
        }
        return s;
      }
      case RestrKind::AtMost: {
        TruncatedSeries s = one();
        for (int i = 1; i <= e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          s = s + eval_mset(tmp);
        }
        return s;
      }
      case RestrKind::AtLeast: {
        TruncatedSeries s = full_log().exp_series();
        TruncatedSeries sub = one();
        for (int i = 1; i < e.restr.k; ++i) {
          Expr tmp = e;
          tmp.restr = {RestrKind::Eq, i};
          sub = sub + eval_mset(tmp);
        }
        return s + sub.scaled(-1.0);
      }
    }
    return zero();
  }

  void run() {
    for (int sweep = 0; sweep < 4 * max_size + 200; ++sweep) {
      double delta = 0;
      for (std::size_t i = 0; i < spec.classes.size(); ++i) {
        TruncatedSeries next = eval(spec.classes[i].second);
        delta = std::max(delta, next.max_abs_diff(classes[i]));
        classes[i] = std::move(next);
      }
      for (const auto& s : classes)
        for (const auto& [p, v] : s.coeffs())
          if (!std::isfinite(v) || std::abs(v) > 1e60)
            throw std::runtime_error("series iteration diverged");
      if (delta < 1e-15) return;
    }
    throw std::runtime_error("series iteration did not converge");
  }
};

}  // namespace

TruncatedSeries truncated_series(const Specification& spec,
                                 const std::string& cls, int max_size) {
  AstSeries engine(spec, max_size);
  engine.run();
  auto it = engine.class_index.find(cls);
  if (it == engine.class_index.end())
    throw std::invalid_argument("truncated_series: unknown class " + cls);
  // For labelled systems the engine's formulas (exp/log/geometric over
  // plain convolution products) already yield EGF coefficients.
  return engine.classes[it->second];
}

// --- Core-system series -----------------------------------------------

namespace {

struct CoreSeries {
  const CoreSystem& core;
  int max_size;
  std::vector<int> atom_sizes;
  std::vector<TruncatedSeries> classes;

  CoreSeries(const CoreSystem& c, int n) : core(c), max_size(n) {
    for (const auto& a : c.atoms) atom_sizes.push_back(a.size);
    classes.assign(c.classes.size(), TruncatedSeries(atom_sizes, max_size));
  }

  TruncatedSeries scalar_series(const ScalarAtom& s, int scale) {
    TruncatedSeries arg = classes[s.arg_class].diagonal(s.arg_scale * scale);
    switch (s.kind) {
      case ScalarKind::Exp: return arg.exp_series();
      case ScalarKind::LogInv: return arg.log_inv_series();
      case ScalarKind::ExpM1: {
        TruncatedSeries e = arg.exp_series();
        e.add_to(std::vector<int>(atom_sizes.size(), 0), -1.0);
        return e;
      }
    }
    return TruncatedSeries(atom_sizes, max_size);
  }

  TruncatedSeries eval_class(int idx) {
    TruncatedSeries out(atom_sizes, max_size);
    for (const auto& m : core.classes[idx].terms) {
      TruncatedSeries term =
          TruncatedSeries::constant(atom_sizes, max_size, m.weight);
      for (const auto& f : m.factors) {
        TruncatedSeries base(atom_sizes, max_size);
        switch (f.kind) {
          case FactorKind::Atom:
            base = TruncatedSeries::atom(atom_sizes, max_size, f.index);
            break;
          case FactorKind::Class:
            base = classes[f.index].diagonal(f.scale);
            break;
          case FactorKind::Scalar:
            base = scalar_series(core.scalars[f.index], f.scale);
            break;
        }
        term = term * base.pow(f.power);
      }
      out = out + term;
    }
    return out;
  }

  void run() {
    for (int sweep = 0; sweep < 4 * max_size + 200; ++sweep) {
      double delta = 0;
      for (std::size_t i = 0; i < core.classes.size(); ++i) {
        TruncatedSeries next = eval_class(static_cast<int>(i));
        delta = std::max(delta, next.max_abs_diff(classes[i]));
        classes[i] = std::move(next);
      }
      if (delta < 1e-15) return;
    }
    throw std::runtime_error("core series iteration did not converge");
  }
};

}  // namespace

TruncatedSeries truncated_series(const CoreSystem& core, int class_index,
                                 int max_size) {
  CoreSeries engine(core, max_size);
  engine.run();
  return engine.classes[class_index];
}

double boltzmann_pmf(const TruncatedSeries& series,
                     const std::vector<double>& z, int k, double c_of_z) {
  const double denom = c_of_z > 0 ? c_of_z : series.eval(z);
  return series.eval_slice(z, k) / denom;
}

}  // namespace bsamp
