#pragma once

#include <map>
#include <string>
#include <vector>

#include "bsamp/ast.hpp"
#include "bsamp/core.hpp"

namespace bsamp {

// Multivariate power series truncated by total weighted size. Keys are
// composition vectors (occurrence counts per atom, in declaration order).
// For labelled systems coefficients are EGF coefficients, i.e. counts
// divided by (total size)!.
class TruncatedSeries {
 public:
  TruncatedSeries() = default;
  TruncatedSeries(std::vector<int> atom_sizes, int max_size)
      : atom_sizes_(std::move(atom_sizes)), max_size_(max_size) {}

  static TruncatedSeries constant(std::vector<int> atom_sizes, int max_size,
                                  double c);
  static TruncatedSeries atom(std::vector<int> atom_sizes, int max_size,
                              int atom_index);

  int max_size() const { return max_size_; }
  int dims() const { return static_cast<int>(atom_sizes_.size()); }
  int total_size(const std::vector<int>& p) const;
  double coeff(const std::vector<int>& p) const;
  double constant_term() const;
  const std::map<std::vector<int>, double>& coeffs() const { return coeffs_; }

  void set(const std::vector<int>& p, double v);
  void add_to(const std::vector<int>& p, double v);

  TruncatedSeries operator+(const TruncatedSeries& o) const;
  TruncatedSeries operator*(const TruncatedSeries& o) const;
  TruncatedSeries scaled(double w) const;
  TruncatedSeries pow(int k) const;
  // Substitute z -> z^k componentwise.
  TruncatedSeries diagonal(int k) const;

  // exp(A), log(1/(1-A)), exp(A)-1; constant terms are handled
  // analytically (log form requires A(0) < 1).
  TruncatedSeries exp_series() const;
  TruncatedSeries log_inv_series() const;

  // Coefficients aggregated by total size: out[n] = sum_{|p|=n} c_p.
  std::vector<double> by_total_size() const;

  // Evaluate at a point (per-atom values).
  double eval(const std::vector<double>& z) const;
  // sum over |p| = k of c_p z^p.
  double eval_slice(const std::vector<double>& z, int k) const;

  double max_abs_diff(const TruncatedSeries& o) const;

 private:
  std::vector<int> atom_sizes_;
  int max_size_ = 0;
  std::map<std::vector<int>, double> coeffs_;
};

// Ground-truth series of a class, computed directly from the source AST
// semantics (independent of desugaring). Throws std::runtime_error on
// ill-founded systems.
TruncatedSeries truncated_series(const Specification& spec,
                                 const std::string& cls, int max_size);

// Series of a desugared core class, for desugar-preservation checks.
TruncatedSeries truncated_series(const CoreSystem& core, int class_index,
                                 int max_size);

// Boltzmann size law P(total size = k) = (sum_{|p|=k} c_p z^p) / C(z).
// If c_of_z > 0 it is used as the exact denominator, otherwise the
// truncated series sum is used.
double boltzmann_pmf(const TruncatedSeries& series,
                     const std::vector<double>& z, int k, double c_of_z = -1);

}  // namespace bsamp
