#include "singflow/piecewise_map.hpp"

#include "singflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

namespace singflow {

double Branch::image_lo() const { return std::min(map(lo), map(hi)); }
double Branch::image_hi() const { return std::max(map(lo), map(hi)); }

double Branch::preimage(double y) const {
  if (inverse) return std::clamp(inverse(y), lo, hi);
  const bool inc = increasing();
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    const double v = map(m);
    if ((v < y) == inc) {
      a = m;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

PiecewiseMap1D::PiecewiseMap1D(double lo, double hi, std::vector<Branch> branches,
                               std::vector<double> discontinuities, double expansion_floor)
    : lo_(lo),
      hi_(hi),
      branches_(std::move(branches)),
      discontinuities_(std::move(discontinuities)),
      floor_(expansion_floor) {
  if (!(hi_ > lo_)) throw ParameterError("piecewise map needs a nondegenerate interval");
  for (const auto& b : branches_) {
    if (!(b.hi > b.lo) || b.lo < lo_ || b.hi > hi_) {
      throw ParameterError("branch interval must be nondegenerate and inside the domain");
    }
    if (!b.map || !b.derivative) throw ParameterError("branch needs map and derivative");
  }
}

std::optional<std::size_t> PiecewiseMap1D::branch_index(double x) const {
  for (double d : discontinuities_) {
    if (x == d) return std::nullopt;
  }
  // Branches are half-open [lo, hi); a right endpoint belongs to its branch
  // only when no other branch starts there.
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (x >= branches_[i].lo && x < branches_[i].hi) return i;
  }
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (x == branches_[i].hi) return i;
  }
  return std::nullopt;
}

std::optional<double> PiecewiseMap1D::try_eval(double x) const {
  auto i = branch_index(x);
  if (!i) return std::nullopt;
  return branches_[*i].map(x);
}

double PiecewiseMap1D::operator()(double x) const {
  auto v = try_eval(x);
  if (!v) throw DomainError("piecewise map evaluated at a discontinuity or outside its branches");
  return *v;
}

double PiecewiseMap1D::derivative(double x) const {
  auto i = branch_index(x);
  if (!i) throw DomainError("derivative requested at a discontinuity");
  return branches_[*i].derivative(x);
}

double PiecewiseMap1D::min_slope(int samples) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : branches_) {
    const double w = b.hi - b.lo;
    for (int i = 0; i < samples; ++i) {
      const double t = (i + 0.5) / samples;
      m = std::min(m, std::abs(b.derivative(b.lo + t * w)));
    }
    // Near-endpoint samples catch monotone slopes attaining their minimum there.
    m = std::min(m, std::abs(b.derivative(b.lo + 1e-12 * w)));
    m = std::min(m, std::abs(b.derivative(b.hi - 1e-12 * w)));
  }
  return m;
}

void PiecewiseMap1D::check_expansion() const {
  const double m = min_slope();
  if (m < floor_ * (1.0 - 1e-9)) {
    throw ExpansionError("branch derivative " + std::to_string(m) + " below expansion floor " +
                         std::to_string(floor_));
  }
}

PiecewiseMap1D compose(const PiecewiseMap1D& first, const PiecewiseMap1D& second) {
  std::vector<Branch> out;
  for (const auto& b1 : first.branches()) {
    for (const auto& b2 : second.branches()) {
      const double ylo = std::max(b1.image_lo(), b2.lo);
      const double yhi = std::min(b1.image_hi(), b2.hi);
      if (!(yhi > ylo)) continue;
      double xa = b1.preimage(ylo), xb = b1.preimage(yhi);
      if (xa > xb) std::swap(xa, xb);
      if (!(xb > xa)) continue;
      Branch c;
      c.lo = xa;
      c.hi = xb;
      auto f1 = b1.map, d1 = b1.derivative, f2 = b2.map, d2 = b2.derivative;
      c.map = [f1, f2](double x) { return f2(f1(x)); };
      c.derivative = [f1, d1, d2](double x) { return d2(f1(x)) * d1(x); };
      auto p1 = std::make_shared<Branch>(b1);
      auto p2 = std::make_shared<Branch>(b2);
      c.inverse = [p1, p2](double y) { return p1->preimage(p2->preimage(y)); };
      out.push_back(std::move(c));
    }
  }
  std::sort(out.begin(), out.end(), [](const Branch& a, const Branch& b) { return a.lo < b.lo; });
  std::vector<double> disc = first.discontinuities();
  return PiecewiseMap1D(first.lo(), first.hi(), std::move(out), std::move(disc),
                        first.expansion_floor());
}

PiecewiseMap1D affine_expanding_map(double lo, double hi, int slope) {
  if (slope < 2) throw ParameterError("affine expanding map needs integer slope >= 2");
  const double w = (hi - lo) / slope;
  std::vector<Branch> branches;
  for (int i = 0; i < slope; ++i) {
    Branch b;
    b.lo = lo + i * w;
    b.hi = lo + (i + 1) * w;
    const double base = b.lo;
    const double k = slope;
    b.map = [lo, base, k](double x) { return lo + k * (x - base); };
    b.derivative = [k](double) { return k; };
    b.inverse = [lo, base, k](double y) { return base + (y - lo) / k; };
    branches.push_back(std::move(b));
  }
  return PiecewiseMap1D(lo, hi, std::move(branches), {}, 1.0);
}

PiecewiseMap1D disjoint_union(const std::vector<PiecewiseMap1D>& maps) {
  if (maps.empty()) throw ParameterError("disjoint union of no maps");
  std::vector<Branch> branches;
  std::vector<double> disc;
  double lo = maps.front().lo(), hi = maps.front().hi();
  double floor = maps.front().expansion_floor();
  for (const auto& m : maps) {
    lo = std::min(lo, m.lo());
    hi = std::max(hi, m.hi());
    floor = std::min(floor, m.expansion_floor());
    branches.insert(branches.end(), m.branches().begin(), m.branches().end());
    disc.insert(disc.end(), m.discontinuities().begin(), m.discontinuities().end());
  }
  return PiecewiseMap1D(lo, hi, std::move(branches), std::move(disc), floor);
}

}  // namespace singflow
