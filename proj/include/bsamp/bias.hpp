#pragma once

#include <string>
#include <utility>

namespace bsamp {

struct BiasReport {
  enum class Regime { Flat, Concentrated };
  Regime regime = Regime::Flat;
  double eps = 0.0;
  double alpha = 0.0;  // flat only
  double delta_min = 0.0;
  double kappa_min = 0.0;
  bool boundary_warning = false;
  std::string to_json() const;
};

// Asymptotic rejection-cost constant for the flat regime: the expected
// cumulative rejected size is kappa * n when the sampler is calibrated at
// x_n = rho (1 - delta/n) with tolerance window (1 +- eps) n and singular
// exponent alpha.
double kappa_flat(double eps, double alpha, double delta);

// Minimize kappa_flat over delta (coarse scan then golden section).
BiasReport optimal_delta_flat(double eps, double alpha);

// Gaussian distribution function, |error| < 1e-12.
double normal_cdf(double x);

// Rejection-cost constant for concentrated (Gaussian) size laws with a
// window of +- eps standard deviations; minimized at delta = 0.
double kappa_concentrated(double eps, double delta);
BiasReport optimal_delta_concentrated(double eps);

// The size target to feed the tuner so the calibration lands at
// x_n = rho(1 - delta_min/n): alpha * n / delta_min.
double corrected_target(double n, double alpha, double delta_min);

}  // namespace bsamp
