#pragma once

#include "singflow/errors.hpp"
#include "singflow/field.hpp"
#include "singflow/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace singflow {

/// Dormand-Prince 5(4) embedded pair for an autonomous system of size N.
/// The stepper keeps the FSAL derivative between accepted steps.
template <int N>
class DormandPrince {
 public:
  using State = Eigen::Matrix<double, N, 1>;
  using Rhs = std::function<State(const State&)>;

  struct Step {
    double t0 = 0.0, t1 = 0.0;
    State y0, y1, f0, f1;

    /// Cubic Hermite interpolant on [t0, t1].
    State dense(double t) const {
      const double h = t1 - t0;
      const double s = (t - t0) / h;
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
      const double h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s);
      const double h11 = s * s * (s - 1);
      return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1;
    }
  };

  DormandPrince(Rhs rhs, double tol, double t0, const State& y0, double direction = 1.0)
      : rhs_(std::move(rhs)), tol_(tol), t_(t0), y_(y0), dir_(direction >= 0 ? 1.0 : -1.0) {
    f_ = rhs_(y_);
    check_finite(f_);
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  const State& derivative() const { return f_; }
  double last_step() const { return h_; }

  /// Restart from a modified state at the current time (drops FSAL data).
  void reset_state(const State& y) {
    y_ = y;
    f_ = rhs_(y_);
    check_finite(f_);
  }

  /// One single step of signed size h from the current point without error
  /// control; used for event polishing.
  State shoot(double h) const {
    State k[7];
    return raw_step(y_, f_, h, k, nullptr);
  }

  /// Advance by one accepted step without passing t_limit.
  Step advance(double t_limit, double min_step) {
    if (h_ == 0.0) h_ = initial_step();
    for (;;) {
      double h = std::min(std::abs(h_), std::abs(t_limit - t_));
      bool clipped = h < std::abs(h_);
      if (h < min_step && !clipped) {
        throw StiffnessError("step size underflow at t = " + std::to_string(t_));
      }
      h *= dir_;
      State k[7];
      State err;
      State y1 = raw_step(y_, f_, h, k, &err);
      double en = 0.0;
      for (int i = 0; i < y_.size(); ++i) {
        const double sc = tol_ * (1.0 + std::max(std::abs(y_[i]), std::abs(y1[i])));
        en = std::max(en, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(en)) {
        if (std::abs(h) <= min_step) throw NumericError("non-finite state in integration");
        h_ = 0.2 * h;
        continue;
      }
      if (en <= 1.0) {
        Step s{t_, clipped ? t_limit : t_ + h, y_, y1, f_, k[6]};
        check_finite(y1);
        t_ = s.t1;
        y_ = y1;
        f_ = k[6];
        const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        if (!clipped) h_ = h * fac;
        return s;
      }
      h_ = h * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 1.0);
    }
  }

 private:
  State raw_step(const State& y, const State& f0, double h, State* k, State* err) const {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2; (void)c3; (void)c4; (void)c5;
    k[0] = f0;
    k[1] = rhs_(y + h * a21 * k[0]);
    k[2] = rhs_(y + h * (a31 * k[0] + a32 * k[1]));
    k[3] = rhs_(y + h * (a41 * k[0] + a42 * k[1] + a43 * k[2]));
    k[4] = rhs_(y + h * (a51 * k[0] + a52 * k[1] + a53 * k[2] + a54 * k[3]));
    k[5] = rhs_(y + h * (a61 * k[0] + a62 * k[1] + a63 * k[2] + a64 * k[3] + a65 * k[4]));
    State y1 = y + h * (b1 * k[0] + b3 * k[2] + b4 * k[3] + b5 * k[4] + b6 * k[5]);
    k[6] = rhs_(y1);
    if (err) {
      *err = h * (e1 * k[0] + e3 * k[2] + e4 * k[3] + e5 * k[4] + e6 * k[5] + e7 * k[6]);
    }
    return y1;
  }

  double initial_step() const {
    const double d0 = y_.norm(), d1 = f_.norm();
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, 0.1);
    State y1 = y_ + dir_ * h * f_;
    State f1 = rhs_(y1);
    const double d2 = (f1 - f_).norm() / h;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / m, 0.2);
    return std::min(100 * h, std::max(h1 * std::pow(tol_ / 1e-6, 0.2), 1e-10));
  }

  static void check_finite(const State& s) {
    if (!s.allFinite()) throw NumericError("non-finite value in integration");
  }

  Rhs rhs_;
  double tol_;
  double t_;
  State y_;
  State f_;
  double dir_;
  double h_ = 0.0;
};

/// Sampled solution with Hermite dense output between stored points.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec3> states;
  std::vector<Vec3> derivatives;
  bool dense = true;
  bool exited_domain = false;

  /// Interpolated state at t within [times.front(), times.back()].
  Vec3 at(double t) const;
};

void validate_tolerance(double tol);

/// Adaptive integration of x' = field(x) from x0 over [0, t_end] (t_end may
/// be negative). Stops early with exited_domain set when the state leaves
/// the field's domain box.
Trajectory integrate(const Field3& field, const Vec3& x0, double t_end, double tol);

/// Axis-aligned planar section: coordinate `axis` equals `offset`, the two
/// remaining coordinates (in increasing axis order) lie in the bounds.
struct PlaneSection {
  int id = 0;
  int axis = 2;
  double offset = 0.0;
  double lo[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  double hi[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};

  double signed_distance(const Vec3& p) const { return p[axis] - offset; }
  bool in_bounds(const Vec3& p) const;
};

struct CrossingEvent {
  double time = 0.0;
  Vec3 state = Vec3::Zero();
  int section_id = 0;
  int direction = 0;
  bool grazing = false;
};

struct SectionOptions {
  double dead_time = 1e-6;
  double grazing_threshold = 1e-9;
};

/// First transversal crossing of the section after the dead time, or nullopt
/// when none occurs before t_max.
std::optional<CrossingEvent> integrate_to_section(const Field3& field, const Vec3& x0,
                                                  const PlaneSection& section, double t_max,
                                                  double tol, const SectionOptions& opts = {});

struct TangentResult {
  Trajectory trajectory;
  /// Times at which the tangent data were renormalized.
  std::vector<double> renorm_times;
  /// log of the growth factor (vector norm or parallelogram area) over each
  /// renormalization interval.
  std::vector<double> log_growth;
};

/// Joint integration of the flow and the variational equation v' = J(x) v.
/// `frame` has one column (vector growth) or two (area growth).
TangentResult integrate_with_tangent(const Field3& field, const Vec3& x0,
                                     const Eigen::MatrixXd& frame, double t_end, double tol,
                                     double renorm_interval = 1.0);

/// "t,x,y,z" rows sampled every `stride` time units.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double stride);

}  // namespace singflow
