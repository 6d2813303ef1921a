#pragma once

#include "singflow/piecewise_map.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

namespace singflow {

/// Row-stochastic Ulam discretization of a piecewise monotone interval map on
/// n uniform bins, stored row-wise sparse.
struct UlamOperator {
  int n = 0;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::vector<std::pair<int, double>>> rows;

  double bin_width() const { return (hi - lo) / n; }
  double midpoint(int i) const { return lo + (i + 0.5) * bin_width(); }
  std::size_t nonzeros() const;
  /// Largest |row sum - 1|.
  double row_sum_defect() const;
  /// Row vector times matrix.
  std::vector<double> left_multiply(const std::vector<double>& v) const;
  /// Matrix times column vector.
  std::vector<double> right_multiply(const std::vector<double>& h) const;
};

/// Entries below this are treated as round-off and dropped before the row is
/// renormalized.
inline constexpr double kUlamDropTol = 1e-13;

/// Exact interval-image assembly, rows distributed over OpenMP threads.
UlamOperator ulam_build(const PiecewiseMap1D& map, int n);
/// Single-threaded reference assembly; bitwise identical to ulam_build.
UlamOperator ulam_build_serial(const PiecewiseMap1D& map, int n);

struct UlamResult {
  int count = 0;
  /// One density per ergodic component, value per bin, integrating to 1.
  std::vector<std::vector<double>> densities;
  /// Bin indices of each component's support (a closed class of the chain).
  std::vector<std::vector<int>> supports;
  /// Largest |eigenvalue| of the operator on the complement of the fixed space.
  double subdominant_modulus = 0.0;
  /// Largest ||pP - p||_1 over the returned fixed vectors.
  double fixed_residual = 0.0;
};

UlamResult invariant_densities(const UlamOperator& op, double eig_tol = 1e-10);

/// Bin-midpoint quadrature of an observable against a density.
double density_mean(const UlamOperator& op, const std::vector<double>& density,
                    const std::function<double(double)>& observable);

/// CSV "component,bin_midpoint,density".
void write_density_csv(std::ostream& out, const UlamOperator& op, const UlamResult& result);

}  // namespace singflow
