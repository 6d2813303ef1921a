#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>

namespace singflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Axis-aligned box in state space.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double diameter() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool contains(const Box& other) const {
    return (other.lo.array() >= lo.array()).all() &&
           (other.hi.array() <= hi.array()).all();
  }
};

/// Which coordinates are periodic (period = box extent along that axis).
using PeriodicMask = std::array<bool, 3>;

}  // namespace singflow
