#pragma once

#include "singflow/field.hpp"
#include "singflow/types.hpp"

#include <vector>

namespace singflow {

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1] (C^2 ramp).
double smoothstep(double t);
double smoothstep_derivative(double t);

enum class CoverShape { ball, cylinder, box, rest };

/// One member of an open cover. The bump is identically 1 on the inner set
/// and identically 0 outside the outer set. A cylinder ignores coordinate
/// `axis` (its bump depends on the distance to the axis line only).
struct CoverRegion {
  CoverShape shape = CoverShape::rest;
  Vec3 center = Vec3::Zero();
  int axis = 2;
  double inner = 0.0;
  double outer = 0.0;
  Vec3 inner_half = Vec3::Zero();
  Vec3 outer_half = Vec3::Zero();

  static CoverRegion ball(const Vec3& center, double inner, double outer);
  static CoverRegion cylinder(const Vec3& center, int axis, double inner, double outer);
  static CoverRegion box(const Vec3& center, const Vec3& inner_half, const Vec3& outer_half);
  static CoverRegion rest();

  /// Bounding box of the outer set (unbounded for rest).
  Box outer_bounds() const;
};

/// Partition of unity subordinate to local regions with pairwise disjoint
/// outer sets plus at most one complementary `rest` member, whose weight is
/// 1 minus the sum of the local bumps.
class BumpPartition {
 public:
  explicit BumpPartition(std::vector<CoverRegion> regions);

  std::size_t size() const { return regions_.size(); }
  const std::vector<CoverRegion>& regions() const { return regions_; }

  std::vector<double> weights(const Vec3& p) const;
  /// Weights and their gradients.
  void evaluate(const Vec3& p, std::vector<double>& w, std::vector<Vec3>& grad) const;

 private:
  std::vector<CoverRegion> regions_;
  int rest_index_ = -1;
};

/// Pointwise convex combination sum_i psi_i F_i with product-rule Jacobian.
/// The result inherits domain and periodicity of the field paired with the
/// rest region (or of the first field when there is none).
Field3 blend(std::vector<Field3> fields, const BumpPartition& partition,
             std::string name = "blend");

}  // namespace singflow
