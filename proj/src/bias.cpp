#include "bsamp/bias.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bsamp/numeric.hpp"

namespace bsamp {

namespace {

constexpr double kQuadTol = 1e-10;

// integral_0^{1-eps} w^alpha e^{-delta w} dw, with the endpoint
// singularity at 0 removed by the substitution w = v^p.
double head_integral(double eps, double alpha, double delta) {
  const double upper = 1.0 - eps;
  int p = 2;
  if (alpha < -0.5) p = std::max(2, static_cast<int>(std::ceil(1.01 / (alpha + 1.0))));
  const double vmax = std::pow(upper, 1.0 / p);
  auto f = [&](double v) {
    const double w = std::pow(v, p);
    return p * std::pow(v, p * (alpha + 1.0) - 1.0) * std::exp(-delta * w);
  };
  return integrate(f, 0.0, vmax, kQuadTol);
}

// (1+eps) integral_{1+eps}^inf w^{alpha-1} e^{-delta w} dw via w = (1+eps)/u.
double tail_integral(double eps, double alpha, double delta) {
  const double a = 1.0 + eps;
  auto f = [&](double u) {
    return std::pow(u, -alpha - 1.0) * std::exp(-delta * a / u);
  };
  return std::pow(a, alpha + 1.0) * integrate(f, 0.0, 1.0, kQuadTol);
}

double window_integral(double eps, double alpha, double delta) {
  auto f = [&](double w) {
    return std::pow(w, alpha - 1.0) * std::exp(-delta * w);
  };
  return integrate(f, 1.0 - eps, 1.0 + eps, kQuadTol);
}

}  // namespace

double kappa_flat(double eps, double alpha, double delta) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("kappa_flat: eps must lie in (0,1)");
  if (!(delta > 0.0)) throw std::invalid_argument("kappa_flat: delta <= 0");
  if (!(alpha > -1.0))
    throw std::invalid_argument("kappa_flat: divergent integral (alpha <= -1)");
  const double num = head_integral(eps, alpha, delta) +
                     tail_integral(eps, alpha, delta);
  return num / window_integral(eps, alpha, delta);
}

BiasReport optimal_delta_flat(double eps, double alpha) {
  BiasReport report;
  report.regime = BiasReport::Regime::Flat;
  report.eps = eps;
  report.alpha = alpha;

  // Coarse scan over (0, 50], then golden-section refinement around the
  // bracketed minimum. Unimodality is observed, not proven, hence the scan.
  const double step = 0.05;
  double best_d = step, best_k = kappa_flat(eps, alpha, step);
  for (double d = 2 * step; d <= 50.0 + 1e-12; d += step) {
    const double k = kappa_flat(eps, alpha, d);
    if (k < best_k) {
      best_k = k;
      best_d = d;
    }
  }
  if (best_d <= step + 1e-12 || best_d >= 50.0 - step) {
    report.boundary_warning = true;
    report.delta_min = best_d;
    report.kappa_min = best_k;
    return report;
  }
  auto [dmin, kmin] = golden_section_min(
      [&](double d) { return kappa_flat(eps, alpha, d); }, best_d - step,
      best_d + step, 1e-7);
  report.delta_min = dmin;
  report.kappa_min = kmin;
  return report;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kappa_concentrated(double eps, double delta) {
  if (!(eps > 0.0)) throw std::invalid_argument("kappa_concentrated: eps <= 0");
  const double hi = normal_cdf(eps - delta);
  const double lo = normal_cdf(-eps - delta);
  return (1.0 + lo - hi) / (hi - lo);
}

BiasReport optimal_delta_concentrated(double eps) {
  BiasReport report;
  report.regime = BiasReport::Regime::Concentrated;
  report.eps = eps;
  report.delta_min = 0.0;  // the symmetric window is optimal unbiased
  report.kappa_min = kappa_concentrated(eps, 0.0);
  return report;
}

double corrected_target(double n, double alpha, double delta_min) {
  if (!(n > 0 && alpha > 0 && delta_min > 0))
    throw std::invalid_argument("corrected_target: arguments must be positive");
  return alpha * n / delta_min;
}

std::string BiasReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"regime\":\""
     << (regime == Regime::Flat ? "flat" : "concentrated") << "\",\"eps\":"
     << eps;
  if (regime == Regime::Flat) os << ",\"alpha\":" << alpha;
  os << ",\"delta_min\":" << delta_min << ",\"kappa_min\":" << kappa_min;
  if (boundary_warning) os << ",\"boundary_warning\":true";
  os << "}";
  return os.str();
}

}  // namespace bsamp
