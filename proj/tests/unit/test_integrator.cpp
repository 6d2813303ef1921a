#include <doctest.h>

#include "singflow/errors.hpp"
#include "singflow/field.hpp"
#include "singflow/integrator.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace singflow;

namespace {
const Box kUnitish{Vec3(-10, -10, -10), Vec3(10, 10, 10)};
}

TEST_CASE("linear field matches closed form") {
  const Vec3 rates(0.5, -1.0, -2.0);
  const Field3 f = linear_diagonal(rates, kUnitish);
  const Vec3 x0(1.0, 2.0, -3.0);
  const Trajectory tr = integrate(f, x0, 2.0, 1e-10);
  CHECK(tr.states.front() == x0);
  const Vec3 end = tr.states.back();
  for (int i = 0; i < 3; ++i) {
    const double exact = x0[i] * std::exp(rates[i] * 2.0);
    CHECK(std::abs(end[i] - exact) <= 1e-8 * std::abs(exact));
  }
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
}

TEST_CASE("tolerance refinement does not increase error") {
  const Vec3 rates(0.7, -1.3, -0.4);
  const Field3 f = linear_diagonal(rates, kUnitish);
  const Vec3 x0(0.3, 1.0, 2.0);
  const Vec3 exact(x0[0] * std::exp(rates[0] * 3), x0[1] * std::exp(rates[1] * 3),
                   x0[2] * std::exp(rates[2] * 3));
  double prev = 1e300;
  for (double tol = 1e-5; tol >= 1e-11; tol *= 0.5) {
    const double err = (integrate(f, x0, 3.0, tol).states.back() - exact).norm();
    CHECK(err <= prev * 1.05);  // allow rounding-level jitter
    prev = err;
  }
}

TEST_CASE("Lorenz equilibrium stays put and orbits stay bounded") {
  const Field3 f = lorenz_classic({});
  const Trajectory fixed = integrate(f, Vec3::Zero(), 50.0, 1e-10);
  CHECK(fixed.states.back().norm() == 0.0);
  const Trajectory tr = integrate(f, Vec3(1, 1, 1), 100.0, 1e-12);
  CHECK_FALSE(tr.exited_domain);
  for (const auto& s : tr.states) CHECK(f.domain().contains(s));
}

TEST_CASE("time reversal returns to seed") {
  // Backward Lorenz expands volume like exp(13.67 T), so round-trip accuracy
  // at tol 1e-10 is only attainable for short horizons.
  const Field3 f = lorenz_classic({});
  const Vec3 x0(1.0, 2.0, 20.0);
  for (double T : {0.1, 0.25, 0.5}) {
    const Vec3 mid = integrate(f, x0, T, 1e-10).states.back();
    const Vec3 back = integrate(f, mid, -T, 1e-10).states.back();
    CHECK((back - x0).norm() <= 1e-5);
  }
  const Field3 lin = linear_diagonal(Vec3(0.5, -0.3, 0.2), kUnitish);
  const Vec3 y0(0.4, -0.7, 1.1);
  const Vec3 mid = integrate(lin, y0, 5.0, 1e-10).states.back();
  CHECK((integrate(lin, mid, -5.0, 1e-10).states.back() - y0).norm() <= 1e-5);
}

TEST_CASE("invalid inputs") {
  const Field3 f = lorenz_classic({});
  CHECK_THROWS_AS(integrate(f, Vec3::Zero(), 1.0, 1e-2), ParameterError);
  CHECK_THROWS_AS(integrate(f, Vec3::Zero(), 1.0, 1e-14), ParameterError);
}

TEST_CASE("section crossings") {
  SUBCASE("constant field") {
    const Field3 f = constant_field(Vec3(0, 0, 1), kUnitish);
    PlaneSection s;
    s.id = 4;
    s.axis = 2;
    s.offset = 1.0;
    const auto ev = integrate_to_section(f, Vec3::Zero(), s, 5.0, 1e-10);
    REQUIRE(ev.has_value());
    CHECK(ev->time == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((ev->state - Vec3(0, 0, 1)).norm() < 1e-10);
    CHECK(ev->direction == 1);
    CHECK(ev->section_id == 4);
    CHECK_FALSE(ev->grazing);
  }
  SUBCASE("linear saddle exit") {
    const Field3 f = linear_diagonal(Vec3(2, -6, -1), Box{Vec3(-2, -2, -2), Vec3(2, 2, 2)});
    PlaneSection s;
    s.axis = 0;
    s.offset = 1.0;
    const auto ev = integrate_to_section(f, Vec3(0.25, 0.5, 1.0), s, 5.0, 1e-12);
    REQUIRE(ev.has_value());
    CHECK(ev->time == doctest::Approx(std::log(4.0) / 2).epsilon(1e-9));
    CHECK(ev->state.y() == doctest::Approx(1.0 / 128).epsilon(1e-8));
    CHECK(ev->state.z() == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(s.signed_distance(ev->state)) <= 1e-10 * f.domain().diameter());
  }
  SUBCASE("dead time skips the start point") {
    const Field3 f = constant_field(Vec3(0, 0, 1), kUnitish);
    PlaneSection s;
    s.axis = 2;
    s.offset = 0.0;
    const auto ev = integrate_to_section(f, Vec3::Zero(), s, 3.0, 1e-10);
    CHECK_FALSE(ev.has_value());
  }
  SUBCASE("timeout") {
    const Field3 f = constant_field(Vec3(0, 0, 1), kUnitish);
    PlaneSection s;
    s.axis = 2;
    s.offset = 5.0;
    CHECK_FALSE(integrate_to_section(f, Vec3::Zero(), s, 1.0, 1e-10).has_value());
  }
}

TEST_CASE("tangent growth rates") {
  const Vec3 rates(2, -6, -1);
  const Field3 f = linear_diagonal(rates, Box{Vec3(-1e6, -1e6, -1e6), Vec3(1e6, 1e6, 1e6)});
  Eigen::MatrixXd v(3, 1);
  v << 0.3, 0.5, 0.2;
  const TangentResult tr = integrate_with_tangent(f, Vec3(1e-3, 0.1, 0.1), v, 6.0, 1e-11);
  REQUIRE(tr.log_growth.size() >= 5);
  CHECK(std::exp(tr.log_growth.back()) == doctest::Approx(std::exp(2.0)).epsilon(1e-6));
  Eigen::MatrixXd fr(3, 2);
  fr << 1, 0, 0, 0, 0, 1;
  const TangentResult ta = integrate_with_tangent(f, Vec3(1e-3, 0.1, 0.1), fr, 4.0, 1e-11);
  for (double g : ta.log_growth) CHECK(std::exp(g) == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
}

TEST_CASE("trajectory CSV") {
  const Field3 f = constant_field(Vec3(1, 0, 0), kUnitish);
  std::ostringstream os;
  write_trajectory_csv(os, integrate(f, Vec3::Zero(), 1.0, 1e-8), 0.25);
  const std::string s = os.str();
  CHECK(s.rfind("t,x,y,z\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 6);
}
