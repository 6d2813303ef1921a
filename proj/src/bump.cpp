#include "singflow/bump.hpp"

#include "singflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace singflow {

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double smoothstep_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double s = t * (1.0 - t);
  return 30.0 * s * s;
}

CoverRegion CoverRegion::ball(const Vec3& center, double inner, double outer) {
  CoverRegion r;
  r.shape = CoverShape::ball;
  r.center = center;
  r.inner = inner;
  r.outer = outer;
  return r;
}

CoverRegion CoverRegion::cylinder(const Vec3& center, int axis, double inner, double outer) {
  CoverRegion r = ball(center, inner, outer);
  r.shape = CoverShape::cylinder;
  r.axis = axis;
  return r;
}

CoverRegion CoverRegion::box(const Vec3& center, const Vec3& inner_half,
                             const Vec3& outer_half) {
  CoverRegion r;
  r.shape = CoverShape::box;
  r.center = center;
  r.inner_half = inner_half;
  r.outer_half = outer_half;
  return r;
}

CoverRegion CoverRegion::rest() { return CoverRegion{}; }

Box CoverRegion::outer_bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (shape) {
    case CoverShape::ball:
      return {center.array() - outer, center.array() + outer};
    case CoverShape::cylinder: {
      Box b{center.array() - outer, center.array() + outer};
      b.lo[axis] = -inf;
      b.hi[axis] = inf;
      return b;
    }
    case CoverShape::box:
      return {center - outer_half, center + outer_half};
    case CoverShape::rest:
      break;
  }
  return {Vec3::Constant(-inf), Vec3::Constant(inf)};
}

namespace {

// Radial bump: 1 for d <= inner, 0 for d >= outer.
void radial_bump(const Vec3& offset, double inner, double outer, double& w, Vec3& grad) {
  const double d = offset.norm();
  grad.setZero();
  if (d >= outer) {
    w = 0.0;
    return;
  }
  if (d <= inner) {
    w = 1.0;
    return;
  }
  const double width = outer - inner;
  const double t = (outer - d) / width;
  w = smoothstep(t);
  grad = -smoothstep_derivative(t) / width * offset / d;
}

void evaluate_region(const CoverRegion& r, const Vec3& p, double& w, Vec3& grad) {
  switch (r.shape) {
    case CoverShape::ball:
      radial_bump(p - r.center, r.inner, r.outer, w, grad);
      return;
    case CoverShape::cylinder: {
      Vec3 off = p - r.center;
      off[r.axis] = 0.0;
      radial_bump(off, r.inner, r.outer, w, grad);
      return;
    }
    case CoverShape::box: {
      double s[3], ds[3];
      for (int i = 0; i < 3; ++i) {
        const double d = std::abs(p[i] - r.center[i]);
        const double width = r.outer_half[i] - r.inner_half[i];
        const double t = (r.outer_half[i] - d) / width;
        s[i] = smoothstep(t);
        const double sign = p[i] >= r.center[i] ? 1.0 : -1.0;
        ds[i] = -smoothstep_derivative(t) / width * sign;
      }
      w = s[0] * s[1] * s[2];
      grad = Vec3(ds[0] * s[1] * s[2], s[0] * ds[1] * s[2], s[0] * s[1] * ds[2]);
      return;
    }
    case CoverShape::rest:
      break;
  }
  w = 0.0;
  grad.setZero();
}

bool boxes_overlap(const Box& a, const Box& b) {
  return ((a.lo.array() < b.hi.array()) && (b.lo.array() < a.hi.array())).all();
}

}  // namespace

BumpPartition::BumpPartition(std::vector<CoverRegion> regions) : regions_(std::move(regions)) {
  if (regions_.empty()) throw CompositionError("partition needs at least one region");
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& r = regions_[i];
    if (r.shape == CoverShape::rest) {
      if (rest_index_ >= 0) throw CompositionError("partition has more than one rest region");
      rest_index_ = static_cast<int>(i);
      continue;
    }
    const bool radial = r.shape == CoverShape::ball || r.shape == CoverShape::cylinder;
    if (radial && !(r.inner > 0.0 && r.outer > r.inner)) {
      throw CompositionError("bump radii must satisfy 0 < inner < outer");
    }
    if (r.shape == CoverShape::box &&
        !((r.inner_half.array() > 0.0).all() && (r.outer_half.array() > r.inner_half.array()).all())) {
      throw CompositionError("box bump half-widths must satisfy 0 < inner < outer");
    }
  }
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    for (std::size_t j = i + 1; j < regions_.size(); ++j) {
      if (regions_[i].shape == CoverShape::rest || regions_[j].shape == CoverShape::rest) continue;
      if (boxes_overlap(regions_[i].outer_bounds(), regions_[j].outer_bounds())) {
        throw CompositionError("local cover regions must have disjoint outer sets");
      }
    }
  }
  if (rest_index_ < 0 && regions_.size() > 1) {
    throw CompositionError("several local regions need a rest region to sum to one");
  }
}

void BumpPartition::evaluate(const Vec3& p, std::vector<double>& w,
                             std::vector<Vec3>& grad) const {
  const std::size_t n = regions_.size();
  w.assign(n, 0.0);
  grad.assign(n, Vec3::Zero());
  if (n == 1 && rest_index_ < 0) {
    // A single local region is its own partition of unity only on its inner set.
    evaluate_region(regions_[0], p, w[0], grad[0]);
    return;
  }
  double sum = 0.0;
  Vec3 gsum = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) == rest_index_) continue;
    evaluate_region(regions_[i], p, w[i], grad[i]);
    sum += w[i];
    gsum += grad[i];
  }
  if (rest_index_ >= 0) {
    w[rest_index_] = 1.0 - sum;
    grad[rest_index_] = -gsum;
  }
}

std::vector<double> BumpPartition::weights(const Vec3& p) const {
  std::vector<double> w;
  std::vector<Vec3> g;
  evaluate(p, w, g);
  return w;
}

Field3 blend(std::vector<Field3> fields, const BumpPartition& partition, std::string name) {
  if (fields.size() != partition.size()) {
    throw CompositionError("blend: number of fields differs from number of cover regions");
  }
  std::size_t anchor = 0;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const auto& region = partition.regions()[i];
    if (region.shape == CoverShape::rest) {
      anchor = i;
      continue;
    }
    Box need = region.outer_bounds();
    const Box& have = fields[i].domain();
    for (int a = 0; a < 3; ++a) {
      if (fields[i].is_periodic(a) || std::isinf(need.lo[a])) continue;
      if (need.lo[a] < have.lo[a] - 1e-12 || need.hi[a] > have.hi[a] + 1e-12) {
        throw CompositionError("blend: field '" + fields[i].name() +
                               "' does not cover its region's outer set");
      }
    }
  }
  auto shared = std::make_shared<const std::vector<Field3>>(std::move(fields));
  auto part = std::make_shared<const BumpPartition>(partition);
  const Field3& base = (*shared)[anchor];

  auto eval = [shared, part](const Vec3& p) {
    thread_local std::vector<double> w;
    thread_local std::vector<Vec3> g;
    part->evaluate(p, w, g);
    Vec3 v = Vec3::Zero();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0) v += w[i] * (*shared)[i].eval(p);
    }
    return v;
  };
  auto jac = [shared, part](const Vec3& p) {
    thread_local std::vector<double> w;
    thread_local std::vector<Vec3> g;
    part->evaluate(p, w, g);
    Mat3 j = Mat3::Zero();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0 && g[i].isZero(0.0)) continue;
      const auto& f = (*shared)[i];
      j += w[i] * f.jac(p) + f.eval(p) * g[i].transpose();
    }
    return j;
  };
  return Field3(std::move(name), base.domain(), eval, jac, base.periodic());
}

}  // namespace singflow
