#include "bsamp/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace bsamp {

std::uint64_t totient(std::uint64_t k) {
  std::uint64_t result = k;
  std::uint64_t n = k;
  for (std::uint64_t p = 2; p * p <= n; ++p) {
    if (n % p == 0) {
      while (n % p == 0) n /= p;
      result -= result / p;
    }
  }
  if (n > 1) result -= result / n;
  return result;
}

std::vector<std::uint64_t> divisors(std::uint64_t k) {
  std::vector<std::uint64_t> small, large;
  for (std::uint64_t d = 1; d * d <= k; ++d) {
    if (k % d == 0) {
      small.push_back(d);
      if (d != k / d) large.push_back(k / d);
    }
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

namespace {

void partition_rec(int remaining, int max_part, std::vector<int>& current,
                   std::vector<std::vector<int>>& out) {
  if (remaining == 0) {
    out.push_back(current);
    return;
  }
  for (int part = std::min(remaining, max_part); part >= 1; --part) {
    current[part - 1] += 1;
    partition_rec(remaining - part, part, current, out);
    current[part - 1] -= 1;
  }
}

}  // namespace

std::vector<std::vector<int>> partition_sequences(int k) {
  if (k < 0) throw std::invalid_argument("partition_sequences: k < 0");
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(std::max(k, 1)), 0);
  if (k == 0) {
    out.push_back(current);
    return out;
  }
  partition_rec(k, k, current, out);
  return out;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

namespace {

// 15-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr int kGlPoints = 15;
constexpr double kGlNodes[kGlPoints] = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
    -0.7244177313601701, -0.5709721726085388, -0.3941513470775634,
    -0.2011940939974345, 0.0,                 0.2011940939974345,
    0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
constexpr double kGlWeights[kGlPoints] = {
    0.0307532419961173, 0.0703660474881081, 0.1071592204671719,
    0.1395706779261543, 0.1662692058169939, 0.1861610000155622,
    0.1984314853271116, 0.2025782419255613, 0.1984314853271116,
    0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
    0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

double gl15(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < kGlPoints; ++i)
    sum += kGlWeights[i] * f(mid + half * kGlNodes[i]);
  return half * sum;
}

double integrate_rec(const std::function<double(double)>& f, double a,
                     double b, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gl15(f, a, mid);
  const double right = gl15(f, mid, b);
  const double delta = left + right - whole;
  if (std::abs(delta) <= tol || depth >= 48) return left + right;
  return integrate_rec(f, a, mid, left, 0.5 * tol, depth + 1) +
         integrate_rec(f, mid, b, right, 0.5 * tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol) {
  if (!(abs_tol > 0)) throw std::invalid_argument("integrate: tol <= 0");
  if (a == b) return 0.0;
  return integrate_rec(f, a, b, gl15(f, a, b), abs_tol, 0);
}

namespace {

// Lower incomplete gamma P(a, x) via the power series.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper incomplete gamma Q(a, x) by Lentz continued fraction.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi2_sf(double x, int df) {
  if (df <= 0) throw std::invalid_argument("chi2_sf: df <= 0");
  if (x <= 0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

std::pair<double, double> golden_section_min(
    const std::function<double(double)>& f, double a, double b, double x_tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > x_tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  const double xm = 0.5 * (a + b);
  return {xm, f(xm)};
}

}  // namespace bsamp
