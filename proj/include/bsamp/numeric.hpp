#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace bsamp {

// Euler totient.
std::uint64_t totient(std::uint64_t k);

// Divisors of k in increasing order.
std::vector<std::uint64_t> divisors(std::uint64_t k);

// All multiplicity vectors (n_1,...,n_k) with sum i*n_i == k.
// Each entry of the result has length k; entry[i-1] = n_i.
std::vector<std::vector<int>> partition_sequences(int k);

double factorial(int n);

// Adaptive Gauss-Legendre quadrature of f over [a, b] to absolute
// tolerance tol. Endpoints are never evaluated.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with df degrees
// of freedom: P(X > x).
double chi2_sf(double x, int df);

// Minimize a unimodal function on [a, b] by golden-section search to the
// given x-tolerance. Returns (x_min, f(x_min)).
std::pair<double, double> golden_section_min(
    const std::function<double(double)>& f, double a, double b, double x_tol);

}  // namespace bsamp
