#include "singflow/integrator.hpp"

#include <ostream>

namespace singflow {

void validate_tolerance(double tol) {
  if (!(tol >= 1e-12 && tol <= 1e-4)) {
    throw ParameterError("integration tolerance must lie in [1e-12, 1e-4]");
  }
}

Vec3 Trajectory::at(double t) const {
  if (times.empty()) throw DomainError("empty trajectory");
  const bool forward = times.back() >= times.front();
  auto cmp = [forward](double a, double b) { return forward ? a < b : a > b; };
  if (cmp(t, times.front()) || cmp(times.back(), t)) {
    throw DomainError("interpolation time outside trajectory");
  }
  auto it = std::lower_bound(times.begin(), times.end(), t, cmp);
  std::size_t i = static_cast<std::size_t>(it - times.begin());
  if (i == 0) return states.front();
  DormandPrince<3>::Step s;
  s.t0 = times[i - 1];
  s.t1 = times[i];
  s.y0 = states[i - 1];
  s.y1 = states[i];
  s.f0 = derivatives[i - 1];
  s.f1 = derivatives[i];
  return s.dense(t);
}

namespace {

DormandPrince<3>::Rhs field_rhs(const Field3& field) {
  return [&field](const Vec3& y) { return field.eval(y); };
}

double min_step_for(double span) { return std::max(1e-14 * std::abs(span), 1e-300); }

}  // namespace

Trajectory integrate(const Field3& field, const Vec3& x0, double t_end, double tol) {
  validate_tolerance(tol);
  Trajectory traj;
  DormandPrince<3> dp(field_rhs(field), tol, 0.0, x0, t_end >= 0 ? 1.0 : -1.0);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.derivatives.push_back(dp.derivative());
  const double min_step = min_step_for(t_end);
  while (dp.time() != t_end) {
    auto step = dp.advance(t_end, min_step);
    traj.times.push_back(step.t1);
    traj.states.push_back(step.y1);
    traj.derivatives.push_back(step.f1);
    if (!field.domain().contains(field.wrap(step.y1))) {
      traj.exited_domain = true;
      break;
    }
  }
  return traj;
}

bool PlaneSection::in_bounds(const Vec3& p) const {
  int k = 0;
  for (int a = 0; a < 3; ++a) {
    if (a == axis) continue;
    if (p[a] < lo[k] || p[a] > hi[k]) return false;
    ++k;
  }
  return true;
}

std::optional<CrossingEvent> integrate_to_section(const Field3& field, const Vec3& x0,
                                                  const PlaneSection& section, double t_max,
                                                  double tol, const SectionOptions& opts) {
  validate_tolerance(tol);
  DormandPrince<3> dp(field_rhs(field), tol, 0.0, x0, t_max >= 0 ? 1.0 : -1.0);
  const double min_step = min_step_for(t_max);
  const double target = 1e-12 * std::max(1.0, field.domain().diameter());
  while (dp.time() != t_max) {
    DormandPrince<3> before = dp;
    auto step = dp.advance(t_max, min_step);
    const double g0 = section.signed_distance(step.y0);
    const double g1 = section.signed_distance(step.y1);
    const bool change = (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0) ||
                        (g0 == 0.0 && g1 != 0.0 && step.t0 >= opts.dead_time);
    if (change && std::abs(step.t1) >= opts.dead_time) {
      // Bracket on the Hermite interpolant, then polish by shooting single
      // steps from the start of the accepted step.
      double a = step.t0, b = step.t1;
      double ga = g0;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        const double gm = section.signed_distance(step.dense(m));
        if ((gm < 0.0) == (ga < 0.0) && gm != 0.0) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      double t_hit = 0.5 * (a + b);
      Vec3 y_hit = before.shoot(t_hit - step.t0);
      double g = section.signed_distance(y_hit);
      double lo = step.t0, hi = step.t1;
      double glo = g0;
      for (int it = 0; it < 200 && std::abs(g) > target; ++it) {
        if ((g < 0.0) == (glo < 0.0)) {
          lo = t_hit;
          glo = g;
        } else {
          hi = t_hit;
        }
        const double next = 0.5 * (lo + hi);
        if (next == lo || next == hi) break;
        t_hit = next;
        y_hit = before.shoot(t_hit - step.t0);
        g = section.signed_distance(y_hit);
      }
      if (std::abs(t_hit) < opts.dead_time) continue;
      if (!section.in_bounds(y_hit)) continue;
      const double vn = field.eval(y_hit)[section.axis];
      CrossingEvent ev;
      ev.time = t_hit;
      ev.state = y_hit;
      ev.section_id = section.id;
      ev.direction = vn >= 0.0 ? 1 : -1;
      ev.grazing = std::abs(vn) < opts.grazing_threshold;
      return ev;
    }
  }
  return std::nullopt;
}

TangentResult integrate_with_tangent(const Field3& field, const Vec3& x0,
                                     const Eigen::MatrixXd& frame, double t_end, double tol,
                                     double renorm_interval) {
  validate_tolerance(tol);
  if (frame.rows() != 3 || (frame.cols() != 1 && frame.cols() != 2)) {
    throw ParameterError("tangent frame must be 3x1 or 3x2");
  }
  if (!(renorm_interval > 0.0)) throw ParameterError("renormalization interval must be positive");
  const int m = static_cast<int>(frame.cols());
  auto measure = [m](const Eigen::Matrix<double, 9, 1>& s) {
    const Vec3 v1 = s.segment<3>(3);
    if (m == 1) return v1.norm();
    const Vec3 v2 = s.segment<3>(6);
    return v1.cross(v2).norm();
  };
  {
    const Vec3 v1 = frame.col(0);
    const double size = m == 1 ? v1.norm() : v1.cross(Vec3(frame.col(1))).norm();
    if (!(size > 0.0)) throw ParameterError("tangent frame must be nonzero with full rank");
  }

  using State = Eigen::Matrix<double, 9, 1>;
  auto rhs = [&field, m](const State& s) {
    State d = State::Zero();
    const Vec3 x = s.head<3>();
    d.head<3>() = field.eval(x);
    const Mat3 j = field.jac(x);
    d.segment<3>(3) = j * s.segment<3>(3);
    if (m == 2) d.segment<3>(6) = j * s.segment<3>(6);
    return d;
  };

  // Orthonormalize so every interval starts from unit length / unit area.
  auto normalize = [m](State& s) {
    Vec3 v1 = s.segment<3>(3);
    v1.normalize();
    s.segment<3>(3) = v1;
    if (m == 2) {
      Vec3 v2 = s.segment<3>(6);
      v2 -= v2.dot(v1) * v1;
      v2.normalize();
      s.segment<3>(6) = v2;
    }
  };

  State s = State::Zero();
  s.head<3>() = x0;
  s.segment<3>(3) = frame.col(0);
  if (m == 2) s.segment<3>(6) = frame.col(1);
  normalize(s);

  TangentResult out;
  out.trajectory.times.push_back(0.0);
  out.trajectory.states.push_back(x0);
  out.trajectory.derivatives.push_back(field.eval(x0));

  const double dir = t_end >= 0 ? 1.0 : -1.0;
  const double min_step = min_step_for(t_end);
  DormandPrince<9> dp(rhs, tol, 0.0, s, dir);
  double t = 0.0;
  while (t != t_end) {
    double next = t + dir * renorm_interval;
    if (dir * (next - t_end) > 0) next = t_end;
    while (dp.time() != next) {
      auto step = dp.advance(next, min_step);
      out.trajectory.times.push_back(step.t1);
      out.trajectory.states.push_back(step.y1.head<3>());
      out.trajectory.derivatives.push_back(step.f1.head<3>());
    }
    State cur = dp.state();
    const double grown = measure(cur);
    out.renorm_times.push_back(next);
    out.log_growth.push_back(std::log(grown));
    normalize(cur);
    dp.reset_state(cur);
    t = next;
    if (!field.domain().contains(field.wrap(cur.head<3>()))) {
      out.trajectory.exited_domain = true;
      break;
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double stride) {
  out << "t,x,y,z\n";
  if (traj.times.empty()) return;
  const double t0 = traj.times.front(), t1 = traj.times.back();
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const long n = static_cast<long>(std::floor(std::abs(t1 - t0) / stride + 1e-9));
  out.precision(17);
  for (long i = 0; i <= n; ++i) {
    const double t = t0 + dir * i * stride;
    const Vec3 p = traj.at(t);
    out << t << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
  }
}

}  // namespace singflow
