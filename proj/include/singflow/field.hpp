#pragma once

#include "singflow/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace singflow {

/// A smooth vector field on an axis-aligned box with analytic Jacobian.
///
/// Periodic axes are reduced into [lo, hi) before evaluation. An optional
/// membership predicate narrows the box (e.g. a cylinder); evaluating a
/// point outside the domain is a DomainError only for fields that install
/// such a predicate, the box itself is advisory for polynomial fields.
class Field3 {
 public:
  using EvalFn = std::function<Vec3(const Vec3&)>;
  using JacFn = std::function<Mat3(const Vec3&)>;
  using MemberFn = std::function<bool(const Vec3&)>;

  Field3() = default;
  Field3(std::string name, Box domain, EvalFn eval, JacFn jac,
         PeriodicMask periodic = {false, false, false}, MemberFn member = {});

  Vec3 eval(const Vec3& p) const;
  Mat3 jac(const Vec3& p) const;

  const std::string& name() const { return name_; }
  const Box& domain() const { return domain_; }
  const PeriodicMask& periodic() const { return periodic_; }
  bool is_periodic(int axis) const { return periodic_[axis]; }

  /// Reduce periodic coordinates into the fundamental domain.
  Vec3 wrap(const Vec3& p) const;
  /// True when p (after wrapping) is in the box and satisfies the predicate.
  bool contains(const Vec3& p) const;
  bool has_member_predicate() const { return static_cast<bool>(member_); }

 private:
  std::string name_;
  Box domain_;
  EvalFn eval_;
  JacFn jac_;
  PeriodicMask periodic_{false, false, false};
  MemberFn member_;
};

struct LorenzParams {
  double a = 10.0;
  double b = 8.0 / 3.0;
  double r = 28.0;
};

/// One-dimensional potential with phi(0)=phi(1)=0 and phi<0 on (0,1).
struct PotentialProfile {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;

  /// phi(u) = -u^2 (1-u)^2.
  static PotentialProfile quartic_well();
  /// Throws ParameterError unless the endpoint and negativity conditions hold.
  void validate() const;
};

Field3 lorenz_classic(const LorenzParams& p);
/// Radius of the trapping sphere centred at (0, 0, a + r).
double lorenz_trapping_radius(const LorenzParams& p);
/// Domain box used by lorenz_classic: the trapping sphere plus 20% margin.
Box lorenz_domain(const LorenzParams& p);

/// Planar Morse-Smale flow x' = -g'(x), y' = -y with g(x) = sin(pi x),
/// z' = 0, on [-1, 2k] x [-1, 1] x {0} extended constantly in z.
Field3 morse_smale_plane(int k);

/// The solid-torus field (-g'(x), -y, 1); z has period 1.
Field3 suspension_field(int k);

/// Spatial Morse-Smale field (h(x), y, -z) on [-10, 40k] x [-5, 5]^2 with
/// h(x) = cos(pi/4) - cos(pi x / 20), zero exactly at x = 40 i +- 5.
Field3 morse_smale_space(int k);

/// Tubular field on the unit-disk cylinder: planar gradient of
/// phi(40 (x^2 + y^2) - 1/2), axial component 1.
Field3 tube_field(double axis_len, const PotentialProfile& profile);

/// Linear field x' = diag(rates) x on the given box.
Field3 linear_diagonal(const Vec3& rates, const Box& domain);

/// Constant field.
Field3 constant_field(const Vec3& velocity, const Box& domain);

/// Planar disk dynamics used to suspend a disk map inside a solid torus.
/// velocity(u, theta) is the disk component at disk point u and phase theta.
struct DiskField {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> velocity;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&, double)> jacobian;

  /// Linear contraction u' = -rate (u - target); its time-1 map is the
  /// affine contraction toward target.
  static DiskField contraction(const Eigen::Vector2d& target, double rate);
};

/// Rescaled, translated suspension of a disk field around the column through
/// (center_x, center_y): velocity (radius * Y0((w - c) / radius, z), 1).
Field3 attached_disk_suspension(const DiskField& disk, double center_x,
                                double center_y, double radius,
                                const Box& domain);

/// Central finite-difference Jacobian (test oracle and diagnostics).
Mat3 finite_difference_jacobian(const Field3& f, const Vec3& p, double step);

}  // namespace singflow
