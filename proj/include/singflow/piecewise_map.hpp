#pragma once

#include <functional>
#include <optional>
#include <vector>

namespace singflow {

/// Strictly monotone branch of a one-dimensional map on [lo, hi].
struct Branch {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> map;
  std::function<double(double)> derivative;
  /// Inverse on the branch image; bisection is used when left empty.
  std::function<double(double)> inverse;

  bool increasing() const { return map(hi) >= map(lo); }
  double image_lo() const;
  double image_hi() const;
  /// Preimage of y in [lo, hi]; y must lie in the branch image.
  double preimage(double y) const;
};

/// Piecewise monotone interval map. Branches are half-open [lo, hi) (the
/// right endpoint counts only when no branch starts there); points listed as
/// discontinuities have no image.
class PiecewiseMap1D {
 public:
  PiecewiseMap1D() = default;
  PiecewiseMap1D(double lo, double hi, std::vector<Branch> branches,
                 std::vector<double> discontinuities = {}, double expansion_floor = 1.0);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<double>& discontinuities() const { return discontinuities_; }
  double expansion_floor() const { return floor_; }

  std::optional<std::size_t> branch_index(double x) const;
  /// Image of x, or nullopt at a discontinuity / outside every branch.
  std::optional<double> try_eval(double x) const;
  /// Image of x; DomainError at a discontinuity.
  double operator()(double x) const;
  double derivative(double x) const;

  /// Smallest |f'| found by sampling each branch (endpoints nudged inward).
  double min_slope(int samples_per_branch = 257) const;
  /// ExpansionError when some sampled |f'| is below the expansion floor.
  void check_expansion() const;

 private:
  double lo_ = 0.0, hi_ = 1.0;
  std::vector<Branch> branches_;
  std::vector<double> discontinuities_;
  double floor_ = 1.0;
};

/// second o first, defined where first lands in a branch of second.
PiecewiseMap1D compose(const PiecewiseMap1D& first, const PiecewiseMap1D& second);

/// Full-branch affine map x -> k x mod 1 on each of `pieces` equal subintervals
/// of [lo, hi] (the doubling map for k = 2).
PiecewiseMap1D affine_expanding_map(double lo, double hi, int slope);

/// Disjoint union of maps on adjacent intervals (e.g. two decoupled blocks).
PiecewiseMap1D disjoint_union(const std::vector<PiecewiseMap1D>& maps);

}  // namespace singflow
