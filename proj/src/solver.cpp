#include "bsamp/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "bsamp/numeric.hpp"

namespace bsamp {

namespace {

constexpr double kDomainBeta2 = 100.0;  // beta = 10 for the L barrier

// --- scalar atom functions g(x) with derivatives ---------------------------

struct G3 {
  double v, d1, d2;
};

// exp
G3 g_exp(double x) {
  const double e = std::exp(x);
  return {e, e, e};
}

// L(x) = log log 1/(1-e^x), x < 0
G3 g_loginv(double x) {
  const double a = std::exp(x);
  // u = a / ell with ell = -log1p(-a); series for small a avoids
  // cancellation in (1 - u).
  double u, one_minus_u, ell;
  if (a < 0.5) {
    // s = sum_{k>=2} a^{k-1}/k
    double s = 0, pw = a;
    for (int k = 2; k < 200; ++k) {
      const double term = pw / k;
      s += term;
      pw *= a;
      if (term < 1e-20 * (1.0 + s)) break;
    }
    u = 1.0 / (1.0 + s);
    one_minus_u = s * u;
    ell = a * (1.0 + s);
  } else {
    ell = -std::log1p(-a);
    u = a / ell;
    one_minus_u = 1.0 - u;
  }
  G3 g;
  g.v = std::log(ell);
  g.d1 = u / (1.0 - a);
  g.d2 = u * one_minus_u / ((1.0 - a) * (1.0 - a));
  return g;
}

// E(x) = log(e^{e^x} - 1)
G3 g_expm1log(double x) {
  const double a = std::exp(x);
  G3 g;
  if (a > 30.0) {
    const double ea = std::exp(-a);
    g.v = a + std::log1p(-ea);
    const double v = a * ea / (1.0 - ea);  // a/m
    g.d1 = a / (1.0 - ea);
    g.d2 = g.d1 * (1.0 - v);
    return g;
  }
  const double m = std::expm1(a);
  g.v = std::log(m);
  g.d1 = a * std::exp(a) / m;
  // 1 - a/m computed stably: m - a = sum_{k>=2} a^k/k!
  double m_minus_a;
  if (a < 0.5) {
    double s = 0, pw = a * a / 2.0;
    for (int k = 2; k < 200; ++k) {
      s += pw;
      pw *= a / (k + 1);
      if (pw < 1e-20 * (1.0 + s)) break;
    }
    m_minus_a = s;
  } else {
    m_minus_a = m - a;
  }
  g.d2 = g.d1 * (m_minus_a / m);
  return g;
}

G3 eval_g(ScalarKind kind, double x) {
  switch (kind) {
    case ScalarKind::Exp: return g_exp(x);
    case ScalarKind::LogInv: return g_loginv(x);
    case ScalarKind::ExpM1: return g_expm1log(x);
  }
  return {0, 0, 0};
}

// --- local posynomial evaluation -------------------------------------------

// value of log sum_j w_j exp(a_j . x) with softmax weights out
double lse_value(const PosyConstraint& pc, const Eigen::VectorXd& x,
                 std::vector<double>* softmax) {
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents(pc.terms.size());
  for (std::size_t j = 0; j < pc.terms.size(); ++j) {
    double e = std::log(pc.terms[j].w);
    for (const auto& [v, c] : pc.terms[j].coeffs) e += c * x[v];
    exponents[j] = e;
    mx = std::max(mx, e);
  }
  double sum = 0;
  for (double e : exponents) sum += std::exp(e - mx);
  const double val = mx + std::log(sum);
  if (softmax) {
    softmax->resize(exponents.size());
    for (std::size_t j = 0; j < exponents.size(); ++j)
      (*softmax)[j] = std::exp(exponents[j] - val);
  }
  return val;
}

// --- increasing-tree integral ----------------------------------------------

struct IncTreeEval {
  double G;                 // log integral
  Eigen::VectorXd grad;     // over (phi, eta...)  -- local index space
  Eigen::MatrixXd hess;
  bool domain_error = false;
};

struct FPoly {
  const IncTreeConstraint& c;
  std::vector<double> uvals;  // e^{eta_j}

  double F(double t) const {
    double s = 0;
    for (const auto& term : c.f) {
      double v = term.w * std::pow(t, term.tpow);
      for (const auto& [j, p] : term.upows) v *= std::pow(uvals[j], p);
      s += v;
    }
    return s;
  }
  // A_j = dF/d eta_j, B_ij = d^2 F / d eta_i d eta_j
  double A(int j, double t) const {
    double s = 0;
    for (const auto& term : c.f) {
      double m = 0;
      for (const auto& [jj, p] : term.upows)
        if (jj == j) m = p;
      if (m == 0) continue;
      double v = m * term.w * std::pow(t, term.tpow);
      for (const auto& [jj, p] : term.upows) v *= std::pow(uvals[jj], p);
      s += v;
    }
    return s;
  }
  double B(int i, int j, double t) const {
    double s = 0;
    for (const auto& term : c.f) {
      double mi = 0, mj = 0;
      for (const auto& [jj, p] : term.upows) {
        if (jj == i) mi = p;
        if (jj == j) mj = p;
      }
      if (mi == 0 || mj == 0) continue;
      double v = mi * mj * term.w * std::pow(t, term.tpow);
      for (const auto& [jj, p] : term.upows) v *= std::pow(uvals[jj], p);
      s += v;
    }
    return s;
  }
};

IncTreeEval inctree_eval(const IncTreeConstraint& c, const Eigen::VectorXd& x) {
  const int d = static_cast<int>(c.eta_vars.size());
  IncTreeEval out;
  out.grad = Eigen::VectorXd::Zero(1 + d);
  out.hess = Eigen::MatrixXd::Zero(1 + d, 1 + d);

  FPoly fp{c, {}};
  fp.uvals.resize(d);
  for (int j = 0; j < d; ++j) fp.uvals[j] = std::exp(x[c.eta_vars[j]]);

  const double phi = x[c.phi_var];
  double T = std::exp(phi);
  if (!(T > c.t0)) {
    out.domain_error = true;
    return out;
  }
  if (T > 1e12) T = 1e12;  // tail is negligible for deg F >= 2

  const double quad_tol = 1e-12;
  auto integrate_fn = [&](const std::function<double(double)>& fn) {
    // split at 1 to help the adaptive rule on wide upper limits
    if (T <= c.t0 + 1.0 || T <= 2.0)
      return integrate(fn, c.t0, T, quad_tol);
    const double mid = std::max(c.t0 + 1.0, 1.0);
    return integrate(fn, c.t0, mid, quad_tol) +
           integrate(fn, mid, T, quad_tol);
  };

  bool pole = false;
  auto inv_f = [&](double t) {
    const double f = fp.F(t);
    if (!(f > 0)) {
      pole = true;
      return 0.0;
    }
    return 1.0 / f;
  };
  const double I = integrate_fn(inv_f);
  if (pole || !(I > 0) || !std::isfinite(I)) {
    out.domain_error = true;
    return out;
  }

  // dI/dphi = T / F(T); second derivative of I in phi likewise pointwise
  const double FT = fp.F(T);
  Eigen::VectorXd dI = Eigen::VectorXd::Zero(1 + d);
  Eigen::MatrixXd d2I = Eigen::MatrixXd::Zero(1 + d, 1 + d);
  dI[0] = T / FT;
  // dFt/dt at T
  double FTt = 0;
  for (const auto& term : c.f) {
    if (term.tpow == 0) continue;
    double v = term.w * term.tpow * std::pow(T, term.tpow - 1);
    for (const auto& [jj, p] : term.upows) v *= std::pow(fp.uvals[jj], p);
    FTt += v;
  }
  d2I(0, 0) = T / FT - T * T * FTt / (FT * FT);
  for (int j = 0; j < d; ++j) {
    dI[1 + j] = -integrate_fn([&](double t) {
      const double f = fp.F(t);
      return fp.A(j, t) / (f * f);
    });
    d2I(0, 1 + j) = d2I(1 + j, 0) = -T * fp.A(j, T) / (FT * FT);
    for (int i = j; i < d; ++i) {
      const double v = integrate_fn([&](double t) {
        const double f = fp.F(t);
        return 2.0 * fp.A(i, t) * fp.A(j, t) / (f * f * f) -
               fp.B(i, j, t) / (f * f);
      });
      d2I(1 + i, 1 + j) = v;
      d2I(1 + j, 1 + i) = v;
    }
  }

  out.G = std::log(I);
  out.grad = dI / I;
  out.hess = d2I / I - (dI / I) * (dI / I).transpose();
  return out;
}

// --- barrier assembly -------------------------------------------------

struct BarrierEval {
  double value = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  bool feasible = true;
  double min_slack = std::numeric_limits<double>::infinity();
};

double program_objective(const ConvexProgram& prog, const Eigen::VectorXd& x) {
  double v = 0;
  for (const auto& [var, c] : prog.objective.coeffs) v += c * x[var];
  return v;
}

// t * f0 + sum barriers, with gradient and Hessian. f0 is the
// minimization objective (negated when the program maximizes).
BarrierEval eval_barrier(const ConvexProgram& prog, const Eigen::VectorXd& x,
                         double t, bool need_derivatives) {
  const int n = prog.num_vars();
  BarrierEval out;
  out.grad = Eigen::VectorXd::Zero(need_derivatives ? n : 0);
  out.hess = Eigen::MatrixXd::Zero(need_derivatives ? n : 0,
                                   need_derivatives ? n : 0);

  const double sign = prog.objective.maximize ? -1.0 : 1.0;
  for (const auto& [var, c] : prog.objective.coeffs) {
    out.value += t * sign * c * x[var];
    if (need_derivatives) out.grad[var] += t * sign * c;
  }

  for (const auto& pc : prog.posy) {
    std::vector<double> p;
    const double lse = lse_value(pc, x, need_derivatives ? &p : nullptr);
    const double slack = x[pc.target_var] - lse;
    out.min_slack = std::min(out.min_slack, slack);
    if (!(slack > 0)) {
      out.feasible = false;
      return out;
    }
    out.value -= std::log(slack);
    if (!need_derivatives) continue;
    // grad lse over local vars; grad B = (grad lse - e_t)/slack
    // hess B = hess lse / slack + (grad lse - e_t)(...)^T / slack^2
    std::vector<int> localv;
    std::vector<double> dl;  // gradient of lse on locals
    {
      std::map<int, double> acc;
      for (std::size_t j = 0; j < pc.terms.size(); ++j)
        for (const auto& [v, c] : pc.terms[j].coeffs) acc[v] += p[j] * c;
      acc[pc.target_var] += 0.0;  // ensure presence
      for (const auto& [v, g] : acc) {
        localv.push_back(v);
        dl.push_back(g);
      }
    }
    const int m = static_cast<int>(localv.size());
    std::map<int, int> lidx;
    for (int i = 0; i < m; ++i) lidx[localv[i]] = i;
    // hess of lse: sum_j p_j a_j a_j^T - (sum p_j a_j)(...)^T
    Eigen::MatrixXd hl = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < pc.terms.size(); ++j) {
      // accumulate a_j in local coords
      Eigen::VectorXd aj = Eigen::VectorXd::Zero(m);
      for (const auto& [v, c] : pc.terms[j].coeffs) aj[lidx[v]] += c;
      hl += p[j] * aj * aj.transpose();
    }
    Eigen::VectorXd dlv = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) dlv[i] = dl[i];
    hl -= dlv * dlv.transpose();
    // gradient of constraint g = lse - x_t
    Eigen::VectorXd dg = dlv;
    dg[lidx[pc.target_var]] -= 1.0;
    for (int i = 0; i < m; ++i) {
      out.grad[localv[i]] += dg[i] / slack;
      for (int j2 = 0; j2 < m; ++j2) {
        out.hess(localv[i], localv[j2]) +=
            hl(i, j2) / slack + dg[i] * dg[j2] / (slack * slack);
      }
    }
  }

  for (const auto& sc : prog.scalars) {
    const double arg = x[sc.arg_var];
    if (sc.g == ScalarKind::LogInv && !(arg < 0)) {
      out.feasible = false;
      return out;
    }
    const G3 g = eval_g(sc.g, arg);
    const double slack = x[sc.target_var] - g.v;
    out.min_slack = std::min(out.min_slack, slack);
    if (!(slack > 0)) {
      out.feasible = false;
      return out;
    }
    out.value -= std::log(slack);
    if (sc.g == ScalarKind::LogInv) out.value -= kDomainBeta2 * std::log(-arg);
    if (!need_derivatives) continue;
    // B = -log(x_t - g(a))  [+ domain term]
    const double inv = 1.0 / slack;
    out.grad[sc.target_var] += -inv;
    out.grad[sc.arg_var] += g.d1 * inv;
    out.hess(sc.target_var, sc.target_var) += inv * inv;
    out.hess(sc.target_var, sc.arg_var) += -g.d1 * inv * inv;
    out.hess(sc.arg_var, sc.target_var) += -g.d1 * inv * inv;
    out.hess(sc.arg_var, sc.arg_var) +=
        g.d1 * g.d1 * inv * inv + g.d2 * inv;
    if (sc.g == ScalarKind::LogInv) {
      out.grad[sc.arg_var] += -kDomainBeta2 / arg;
      out.hess(sc.arg_var, sc.arg_var) += kDomainBeta2 / (arg * arg);
    }
  }

  if (prog.inctree) {
    const auto& c = *prog.inctree;
    IncTreeEval ev = inctree_eval(c, x);
    if (ev.domain_error) {
      out.feasible = false;
      return out;
    }
    const double slack = ev.G - x[c.zeta_var];
    out.min_slack = std::min(out.min_slack, slack);
    if (!(slack > 0)) {
      out.feasible = false;
      return out;
    }
    out.value -= std::log(slack);
    if (need_derivatives) {
      std::vector<int> localv{c.phi_var};
      for (int v : c.eta_vars) localv.push_back(v);
      const int m = static_cast<int>(localv.size());
      // constraint h = zeta - G <= 0; slack = G - zeta
      // B = -log(G - zeta): dB = (e_zeta - dG)/slack; plus curvature of G
      for (int i = 0; i < m; ++i) {
        out.grad[localv[i]] += -ev.grad[i] / slack;
        for (int j = 0; j < m; ++j)
          out.hess(localv[i], localv[j]) +=
              -ev.hess(i, j) / slack +
              ev.grad[i] * ev.grad[j] / (slack * slack);
      }
      out.grad[c.zeta_var] += 1.0 / slack;
      out.hess(c.zeta_var, c.zeta_var) += 1.0 / (slack * slack);
      for (int i = 0; i < m; ++i) {
        out.hess(localv[i], c.zeta_var) += ev.grad[i] / (slack * slack) * -1.0;
        out.hess(c.zeta_var, localv[i]) += ev.grad[i] / (slack * slack) * -1.0;
      }
    }
  }

  return out;
}

double total_barrier_weight(const ConvexProgram& prog) {
  double nu = static_cast<double>(prog.posy.size());
  for (const auto& sc : prog.scalars)
    nu += sc.g == ScalarKind::LogInv ? 1.0 + kDomainBeta2 : 2.0;
  if (prog.inctree) nu += 1.0;
  return nu;
}

}  // namespace

LseEval logsumexp_eval(const std::vector<LinTerm>& terms,
                       const std::vector<double>& x) {
  if (terms.empty())
    throw std::invalid_argument("logsumexp_eval: empty term list");
  const int n = static_cast<int>(x.size());
  PosyConstraint pc;
  pc.target_var = 0;
  pc.terms = terms;
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  std::vector<double> p;
  LseEval out;
  out.value = lse_value(pc, xv, &p);
  out.gradient.assign(n, 0.0);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    Eigen::VectorXd aj = Eigen::VectorXd::Zero(n);
    for (const auto& [v, c] : terms[j].coeffs) aj[v] += c;
    mean += p[j] * aj;
    h += p[j] * aj * aj.transpose();
  }
  h -= mean * mean.transpose();
  for (int i = 0; i < n; ++i) out.gradient[i] = mean[i];
  out.hessian.assign(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.hessian[i][j] = h(i, j);
  return out;
}

StartResult feasible_start(const ConvexProgram& prog) {
  StartResult result;
  const int n = prog.num_vars();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

  if (prog.inctree) {
    const auto& c = *prog.inctree;
    for (int v : c.eta_vars) x[v] = 0.0;
    x[c.phi_var] = std::log(c.t0 + 1.0);
    IncTreeEval ev = inctree_eval(c, x);
    if (ev.domain_error) {
      result.error = "increasing-tree start: integrand not positive";
      return result;
    }
    x[c.zeta_var] = ev.G - 1.0;
    result.x = std::vector<double>(x.data(), x.data() + n);
    return result;
  }

  double xi = std::log(1e-6);
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (prog.size_var >= 0) x[prog.size_var] = xi;
    for (int v : prog.atom_var)
      if (v >= 0) x[v] = xi;

    // Fixed-point pass on the class variables from a very low start,
    // using the posynomial right-hand sides directly.
    for (const auto& [pair, var] : prog.class_var) {
      (void)pair;
      x[var] = -60.0;
    }
    for (const auto& [pair, var] : prog.scalar_var) {
      (void)pair;
      x[var] = -60.0;
    }
    bool fp_ok = true;
    for (int iter = 0; iter < 20000 && fp_ok; ++iter) {
      double delta = 0;
      for (const auto& pc : prog.posy) {
        const double v = lse_value(pc, x, nullptr);
        delta = std::max(delta, std::abs(v - x[pc.target_var]));
        x[pc.target_var] = v;
        if (v > 60) fp_ok = false;  // divergence in log scale
      }
      for (const auto& sc : prog.scalars) {
        const double arg = x[sc.arg_var];
        if (sc.g == ScalarKind::LogInv && arg >= -1e-12) {
          fp_ok = false;
          break;
        }
        const double v = eval_g(sc.g, arg).v;
        delta = std::max(delta, std::abs(v - x[sc.target_var]));
        x[sc.target_var] = v;
      }
      if (delta < 1e-13) break;
    }
    if (!fp_ok) {
      xi -= 2.0;  // shrink z and retry
      continue;
    }

    // Unit slack on every epigraph variable, then repair until slacks
    // clear 0.5 (raising targets can disturb downstream constraints).
    for (const auto& pc : prog.posy) x[pc.target_var] += 1.0;
    for (const auto& sc : prog.scalars) x[sc.target_var] += 1.0;
    bool repaired = false;
    for (int pass = 0; pass < 500; ++pass) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& pc : prog.posy) {
        const double slack = x[pc.target_var] - lse_value(pc, x, nullptr);
        if (slack < 0.5) x[pc.target_var] += 1.0 - slack;
        worst = std::min(worst, slack);
      }
      for (const auto& sc : prog.scalars) {
        if (sc.g == ScalarKind::LogInv && x[sc.arg_var] >= -1e-9) {
          worst = -1;
          break;
        }
        const double slack = x[sc.target_var] - eval_g(sc.g, x[sc.arg_var]).v;
        if (slack < 0.5) x[sc.target_var] += 1.0 - slack;
        worst = std::min(worst, slack);
      }
      if (worst >= 0.5) {
        repaired = true;
        break;
      }
    }
    if (repaired) {
      BarrierEval ev = eval_barrier(prog, x, 1.0, false);
      if (ev.feasible) {
        result.x = std::vector<double>(x.data(), x.data() + n);
        return result;
      }
    }
    xi -= 2.0;
  }
  result.error =
      "no strictly feasible start found (ill-founded system escaped "
      "validation)";
  return result;
}

namespace {

Solution run_solver(const ConvexProgram& prog, const SolverOptions& opts) {
  Solution sol;
  StartResult start = feasible_start(prog);
  if (!start.ok()) {
    sol.status = SolveStatus::Infeasible;
    sol.message = start.error;
    return sol;
  }
  const int n = prog.num_vars();
  Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(start.x->data(), n);

  const double nu = total_barrier_weight(prog);
  double t = 1.0;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    sol.outer_iterations = outer + 1;
    int steps = 0;
    for (; steps < opts.max_newton_per_center; ++steps) {
      BarrierEval ev = eval_barrier(prog, x, t, true);
      if (!ev.feasible) {
        sol.status = SolveStatus::NumericalFailure;
        sol.message = "iterate left the feasible region";
        return sol;
      }
      // Newton direction with ridge fallback
      Eigen::VectorXd dir;
      bool solved = false;
      double ridge = 0.0;
      for (int tryi = 0; tryi < 4; ++tryi) {
        Eigen::MatrixXd h = ev.hess;
        if (ridge > 0) h.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() == Eigen::Success) {
          dir = llt.solve(-ev.grad);
          if (dir.allFinite()) {
            solved = true;
            break;
          }
        }
        ridge = ridge == 0 ? 1e-12 : ridge * 1e3;
      }
      if (!solved) {
        sol.status = SolveStatus::NumericalFailure;
        sol.message = "Hessian factorization failed";
        return sol;
      }
      const double decrement2 = -ev.grad.dot(dir);
      if (decrement2 / 2.0 <= opts.tol_newton) break;

      // Backtracking line search on the barrier merit
      double alpha = 1.0;
      const double slope = ev.grad.dot(dir);
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        Eigen::VectorXd cand = x + alpha * dir;
        BarrierEval cev = eval_barrier(prog, cand, t, false);
        if (cev.feasible &&
            cev.value <= ev.value + opts.ls_armijo * alpha * slope) {
          x = cand;
          moved = true;
          break;
        }
        alpha *= opts.ls_beta;
      }
      if (!moved) break;  // stalled; fall through to t update

      const double obj = program_objective(prog, x);
      if (std::abs(obj) > opts.unbounded_threshold) {
        sol.status = SolveStatus::Unbounded;
        sol.message = "objective escaped: tuning target unattainable";
        sol.x.assign(x.data(), x.data() + n);
        sol.objective = obj;
        return sol;
      }
    }
    sol.newton_steps += steps;
    sol.gap = nu / t;
    sol.final_t = t;
    if (opts.collect_trace)
      sol.trace.push_back({t, steps, program_objective(prog, x), sol.gap});
    if (sol.gap <= opts.tol_gap) {
      sol.status = SolveStatus::Optimal;
      break;
    }
    t *= opts.barrier_mu;
    if (outer == opts.max_outer - 1) sol.status = SolveStatus::MaxIter;
  }

  sol.x.assign(x.data(), x.data() + n);
  sol.objective = program_objective(prog, x);
  if (sol.status == SolveStatus::Optimal) {
    sol.message = "optimal";
  } else if (sol.status == SolveStatus::MaxIter) {
    sol.message = "outer iteration limit reached";
  }
  return sol;
}

}  // namespace

Solution solve(const ConvexProgram& prog, const SolverOptions& opts) {
  return run_solver(prog, opts);
}

Solution solve_increasing_tree(const ConvexProgram& prog,
                               const SolverOptions& opts) {
  if (!prog.inctree) {
    Solution sol;
    sol.status = SolveStatus::NumericalFailure;
    sol.message = "not an increasing-tree program";
    return sol;
  }
  return run_solver(prog, opts);
}

double kkt_residual(const ConvexProgram& prog, const std::vector<double>& x,
                    double t) {
  const int n = prog.num_vars();
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  BarrierEval ev = eval_barrier(prog, xv, t, true);
  if (!ev.feasible) return std::numeric_limits<double>::infinity();
  return ev.grad.cwiseAbs().maxCoeff() / t;
}

double max_constraint_violation(const ConvexProgram& prog,
                                const std::vector<double>& x) {
  const int n = prog.num_vars();
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  double viol = 0;
  for (const auto& pc : prog.posy)
    viol = std::max(viol, lse_value(pc, xv, nullptr) - xv[pc.target_var]);
  for (const auto& sc : prog.scalars)
    viol = std::max(viol, eval_g(sc.g, xv[sc.arg_var]).v - xv[sc.target_var]);
  if (prog.inctree) {
    IncTreeEval ev = inctree_eval(*prog.inctree, xv);
    if (!ev.domain_error)
      viol = std::max(viol, xv[prog.inctree->zeta_var] - ev.G);
  }
  return viol;
}

double max_constraint_slack(const ConvexProgram& prog,
                            const std::vector<double>& x) {
  const int n = prog.num_vars();
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  double slack = 0;
  for (const auto& pc : prog.posy)
    slack = std::max(slack, xv[pc.target_var] - lse_value(pc, xv, nullptr));
  for (const auto& sc : prog.scalars)
    slack =
        std::max(slack, xv[sc.target_var] - eval_g(sc.g, xv[sc.arg_var]).v);
  if (prog.inctree) {
    IncTreeEval ev = inctree_eval(*prog.inctree, xv);
    if (!ev.domain_error)
      slack = std::max(slack, ev.G - xv[prog.inctree->zeta_var]);
  }
  return slack;
}

}  // namespace bsamp
