#include <doctest.h>

#include "singflow/errors.hpp"
#include "singflow/field.hpp"
#include "singflow/integrator.hpp"
#include "singflow/section_graph.hpp"

#include <cmath>
#include <random>

using namespace singflow;

TEST_CASE("linear passage closed form") {
  const LinearSaddleParams p{2.0, -6.0, -1.0};
  const PassageResult r = linear_passage(p, Vec3(0.25, 0.5, 1.0));
  CHECK(r.exit.x() == 1.0);
  CHECK(r.exit.y() == doctest::Approx(1.0 / 128));
  CHECK(r.exit.z() == doctest::Approx(0.5));
  CHECK(r.time == doctest::Approx(std::log(4.0) / 2));
  CHECK(r.side == Side::top);
  CHECK(linear_passage(p, Vec3(0.3, 0.0, 1.0)).exit.y() == 0.0);
  const PassageResult b = linear_passage(p, Vec3(0.25, 0.5, -1.0));
  CHECK(b.exit.z() == doctest::Approx(-0.5));
  CHECK(b.exit.y() == doctest::Approx(1.0 / 128));
  CHECK(b.side == Side::bottom);
  CHECK(linear_passage(p, Vec3(0.0, 0.5, 1.0)).absorbed);
  CHECK_THROWS_AS(LinearSaddleParams({2.0, -1.0, -6.0}).validate(), ParameterError);
}

TEST_CASE("passage agrees with the integrator") {
  const LinearSaddleParams p{2.0, -6.0, -1.5};
  const Field3 f = linear_diagonal(Vec3(p.lambda1, p.lambda2, p.lambda3),
                                   Box{Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5)});
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_pt = 0.0, worst_t = 0.0;
  for (int i = 0; i < 200; ++i) {
    double x = u(rng);
    if (std::abs(x) < 1e-3) x = 0.5;
    const Vec3 e(x, u(rng), i % 2 ? 1.0 : -1.0);
    const PassageResult r = linear_passage(p, e);
    PlaneSection s;
    s.axis = 0;
    s.offset = r.exit.x();
    const auto ev = integrate_to_section(f, e, s, 10.0, 1e-12);
    REQUIRE(ev.has_value());
    worst_pt = std::max(worst_pt, (ev->state - r.exit).norm());
    worst_t = std::max(worst_t, std::abs(ev->time - r.time));
  }
  CHECK(worst_pt <= 1e-8);
  CHECK(worst_t <= 1e-8);
}

TEST_CASE("quotient Lorenz map") {
  const PiecewiseMap1D f2 = quotient_lorenz_map(2.0, 0.75);
  CHECK(f2(1.0) == doctest::Approx(1.0));
  CHECK(f2(-1.0) == doctest::Approx(-1.0));
  CHECK(f2.derivative(1.0) == doctest::Approx(1.5));
  CHECK(f2.derivative(-1.0) == doctest::Approx(1.5));
  const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75, true);
  CHECK(f(1.0) == doctest::Approx(0.9));
  CHECK(f.min_slope() == doctest::Approx(1.425).epsilon(1e-6));
  CHECK(f(1e-14) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(f(-1e-14) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(f.try_eval(0.0).has_value());
  CHECK_THROWS_AS(f(0.0), DomainError);
  CHECK_THROWS_AS(quotient_lorenz_map(1.5, 0.75, true), ExpansionError);
  CHECK_THROWS_AS(quotient_lorenz_map(2.5, 0.75), ParameterError);
}

TEST_CASE("winding map values") {
  CHECK(winding_value(0.75, 3, 2.0) == doctest::Approx(0.5));
  CHECK(winding_value(0.1875, 3, 2.0) == doctest::Approx(0.5));
  CHECK(winding_value(0.0625, 3, 2.0) == doctest::Approx(0.5));
  CHECK(winding_slope(0.2, 3, 2.0) == doctest::Approx(8.0));
  const PiecewiseMap1D w = winding_map(8);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(w(v) == doctest::Approx(winding_value(v, 8, 2.0)).epsilon(1e-12));
  }
}
