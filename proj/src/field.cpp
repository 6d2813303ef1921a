#include "singflow/field.hpp"

#include "singflow/errors.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace singflow {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_coordinate(double v, double lo, double hi) {
  const double period = hi - lo;
  double w = std::fmod(v - lo, period);
  if (w < 0.0) w += period;
  if (w >= period) w = 0.0;
  return lo + w;
}

}  // namespace

Field3::Field3(std::string name, Box domain, EvalFn eval, JacFn jac,
               PeriodicMask periodic, MemberFn member)
    : name_(std::move(name)),
      domain_(domain),
      eval_(std::move(eval)),
      jac_(std::move(jac)),
      periodic_(periodic),
      member_(std::move(member)) {}

Vec3 Field3::wrap(const Vec3& p) const {
  Vec3 q = p;
  for (int i = 0; i < 3; ++i) {
    if (periodic_[i]) q[i] = wrap_coordinate(p[i], domain_.lo[i], domain_.hi[i]);
  }
  return q;
}

bool Field3::contains(const Vec3& p) const {
  const Vec3 q = wrap(p);
  if (!domain_.contains(q)) return false;
  return !member_ || member_(q);
}

Vec3 Field3::eval(const Vec3& p) const {
  const Vec3 q = wrap(p);
  if (member_ && !member_(q)) {
    throw DomainError(name_ + ": evaluation outside the field domain");
  }
  return eval_(q);
}

Mat3 Field3::jac(const Vec3& p) const {
  const Vec3 q = wrap(p);
  if (member_ && !member_(q)) {
    throw DomainError(name_ + ": Jacobian outside the field domain");
  }
  return jac_(q);
}

PotentialProfile PotentialProfile::quartic_well() {
  PotentialProfile p;
  p.phi = [](double u) { return -u * u * (1.0 - u) * (1.0 - u); };
  p.dphi = [](double u) { return -2.0 * u * (1.0 - u) * (1.0 - 2.0 * u); };
  p.d2phi = [](double u) { return -2.0 * (1.0 - 6.0 * u + 6.0 * u * u); };
  return p;
}

void PotentialProfile::validate() const {
  if (!phi || !dphi || !d2phi) throw ParameterError("potential profile incomplete");
  if (phi(0.0) != 0.0 || phi(1.0) != 0.0) {
    throw ParameterError("potential must vanish at 0 and 1");
  }
  double min_value = 0.0;
  for (int i = 1; i < 1000; ++i) min_value = std::min(min_value, phi(i * 1e-3));
  if (!(min_value < 0.0)) throw ParameterError("potential must be negative on (0,1)");
}

double lorenz_trapping_radius(const LorenzParams& p) {
  // V = x^2 + y^2 + (z - c)^2 with c = a + r decreases along the flow outside
  // the ellipsoid a x^2 + y^2 + b (z - c/2)^2 = b c^2 / 4. The trapping sphere
  // must enclose that ellipsoid; sample its surface for max V.
  const double c = p.a + p.r;
  const double rhs = p.b * c * c / 4.0;
  const double ax = std::sqrt(rhs / p.a), ay = std::sqrt(rhs), az = std::sqrt(rhs / p.b);
  double vmax = 0.0;
  constexpr int n = 400;
  for (int i = 0; i <= n; ++i) {
    const double theta = kPi * i / n;
    for (int j = 0; j < 2 * n; ++j) {
      const double ph = kPi * j / n;
      const double x = ax * std::sin(theta) * std::cos(ph);
      const double y = ay * std::sin(theta) * std::sin(ph);
      const double z = c / 2.0 + az * std::cos(theta);
      vmax = std::max(vmax, x * x + y * y + (z - c) * (z - c));
    }
  }
  return 1.05 * std::sqrt(vmax);
}

Box lorenz_domain(const LorenzParams& p) {
  const double c = p.a + p.r;
  const double half = 1.2 * lorenz_trapping_radius(p);
  Box box;
  box.lo = Vec3(-half, -half, c - half);
  box.hi = Vec3(half, half, c + half);
  return box;
}

Field3 lorenz_classic(const LorenzParams& p) {
  if (!(p.a > 0.0) || !(p.b > 0.0) || !(p.r > 0.0)) {
    throw ParameterError("Lorenz parameters a, b, r must be positive");
  }
  const double a = p.a, b = p.b, r = p.r;
  auto eval = [a, b, r](const Vec3& s) {
    return Vec3(a * (s.y() - s.x()), r * s.x() - s.y() - s.x() * s.z(),
                s.x() * s.y() - b * s.z());
  };
  auto jac = [a, b, r](const Vec3& s) {
    Mat3 j;
    j << -a, a, 0.0,
         r - s.z(), -1.0, -s.x(),
         s.y(), s.x(), -b;
    return j;
  };
  return Field3("lorenz_classic", lorenz_domain(p), eval, jac);
}

namespace {

void require_k(int k) {
  if (k < 1) throw ParameterError("k must be a positive integer");
}

// -g'(x) for g(x) = sin(pi x), and its derivative.
double ms_velocity(double x) { return -kPi * std::cos(kPi * x); }
double ms_slope(double x) { return kPi * kPi * std::sin(kPi * x); }

}  // namespace

Field3 morse_smale_plane(int k) {
  require_k(k);
  Box box{Vec3(-1.0, -1.0, 0.0), Vec3(2.0 * k, 1.0, 0.0)};
  auto eval = [](const Vec3& s) { return Vec3(ms_velocity(s.x()), -s.y(), 0.0); };
  auto jac = [](const Vec3& s) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = ms_slope(s.x());
    j(1, 1) = -1.0;
    return j;
  };
  return Field3("morse_smale_plane", box, eval, jac);
}

Field3 suspension_field(int k) {
  require_k(k);
  Box box{Vec3(-1.0, -1.0, 0.0), Vec3(2.0 * k, 1.0, 1.0)};
  auto eval = [](const Vec3& s) { return Vec3(ms_velocity(s.x()), -s.y(), 1.0); };
  auto jac = [](const Vec3& s) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = ms_slope(s.x());
    j(1, 1) = -1.0;
    return j;
  };
  return Field3("suspension_field", box, eval, jac, {false, false, true});
}

Field3 morse_smale_space(int k) {
  require_k(k);
  Box box{Vec3(-10.0, -5.0, -5.0), Vec3(40.0 * k, 5.0, 5.0)};
  const double level = std::cos(kPi / 4.0);
  auto eval = [level](const Vec3& s) {
    return Vec3(level - std::cos(kPi * s.x() / 20.0), s.y(), -s.z());
  };
  auto jac = [](const Vec3& s) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = (kPi / 20.0) * std::sin(kPi * s.x() / 20.0);
    j(1, 1) = 1.0;
    j(2, 2) = -1.0;
    return j;
  };
  return Field3("morse_smale_space", box, eval, jac);
}

Field3 tube_field(double axis_len, const PotentialProfile& profile) {
  if (!(axis_len > 0.0)) throw ParameterError("tube axis length must be positive");
  profile.validate();
  Box box{Vec3(-1.0, -1.0, 0.0), Vec3(1.0, 1.0, axis_len)};
  auto dphi = profile.dphi;
  auto d2phi = profile.d2phi;
  // V(x,y) = phi(40 r^2 - 1/2); grad V = 80 phi'(u) (x, y).
  auto eval = [dphi](const Vec3& s) {
    const double u = 40.0 * (s.x() * s.x() + s.y() * s.y()) - 0.5;
    const double g = 80.0 * dphi(u);
    return Vec3(g * s.x(), g * s.y(), 1.0);
  };
  auto jac = [dphi, d2phi](const Vec3& s) {
    const double u = 40.0 * (s.x() * s.x() + s.y() * s.y()) - 0.5;
    const double g = 80.0 * dphi(u);
    const double gg = 80.0 * 80.0 * d2phi(u);
    Mat3 j = Mat3::Zero();
    j(0, 0) = g + gg * s.x() * s.x();
    j(0, 1) = gg * s.x() * s.y();
    j(1, 0) = gg * s.x() * s.y();
    j(1, 1) = g + gg * s.y() * s.y();
    return j;
  };
  auto member = [axis_len](const Vec3& s) {
    return s.x() * s.x() + s.y() * s.y() < 1.0 && s.z() > 0.0 && s.z() < axis_len;
  };
  return Field3("tube_field", box, eval, jac, {false, false, false}, member);
}

Field3 linear_diagonal(const Vec3& rates, const Box& domain) {
  auto eval = [rates](const Vec3& s) { return Vec3(rates.cwiseProduct(s)); };
  auto jac = [rates](const Vec3&) { return Mat3(rates.asDiagonal()); };
  return Field3("linear_diagonal", domain, eval, jac);
}

Field3 constant_field(const Vec3& velocity, const Box& domain) {
  auto eval = [velocity](const Vec3&) { return velocity; };
  auto jac = [](const Vec3&) { return Mat3::Zero().eval(); };
  return Field3("constant", domain, eval, jac);
}

DiskField DiskField::contraction(const Eigen::Vector2d& target, double rate) {
  if (!(rate > 0.0)) throw ParameterError("contraction rate must be positive");
  DiskField d;
  d.velocity = [target, rate](const Eigen::Vector2d& u, double) -> Eigen::Vector2d {
    return -rate * (u - target);
  };
  d.jacobian = [rate](const Eigen::Vector2d&, double) -> Eigen::Matrix2d {
    return -rate * Eigen::Matrix2d::Identity();
  };
  return d;
}

Field3 attached_disk_suspension(const DiskField& disk, double center_x,
                                double center_y, double radius,
                                const Box& domain) {
  if (!(radius > 0.0)) throw ParameterError("attachment radius must be positive");
  auto eval = [disk, center_x, center_y, radius](const Vec3& s) {
    const Eigen::Vector2d u((s.x() - center_x) / radius, (s.y() - center_y) / radius);
    const Eigen::Vector2d v = radius * disk.velocity(u, s.z());
    return Vec3(v.x(), v.y(), 1.0);
  };
  auto jac = [disk, center_x, center_y, radius](const Vec3& s) {
    const Eigen::Vector2d u((s.x() - center_x) / radius, (s.y() - center_y) / radius);
    Mat3 j = Mat3::Zero();
    j.topLeftCorner<2, 2>() = disk.jacobian(u, s.z());
    return j;
  };
  return Field3("attached_disk_suspension", domain, eval, jac, {false, false, true});
}

Mat3 finite_difference_jacobian(const Field3& f, const Vec3& p, double step) {
  Mat3 j;
  for (int c = 0; c < 3; ++c) {
    Vec3 e = Vec3::Zero();
    e[c] = step;
    j.col(c) = (f.eval(p + e) - f.eval(p - e)) / (2.0 * step);
  }
  return j;
}

}  // namespace singflow
