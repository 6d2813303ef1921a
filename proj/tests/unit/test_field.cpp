#include <doctest.h>

#include "singflow/bump.hpp"
#include "singflow/errors.hpp"
#include "singflow/field.hpp"

#include <cmath>
#include <random>

using namespace singflow;

namespace {

double jac_rel_error(const Field3& f, const Vec3& p) {
  const double step = 1e-5 * f.domain().diameter();
  const Mat3 fd = finite_difference_jacobian(f, p, step);
  const Mat3 an = f.jac(p);
  const double scale = std::max(1.0, an.norm());
  return (fd - an).norm() / scale;
}

Vec3 random_interior(const Box& b, std::mt19937_64& rng, double margin = 0.02) {
  std::uniform_real_distribution<double> u(margin, 1.0 - margin);
  Vec3 p;
  for (int i = 0; i < 3; ++i) {
    const double w = b.hi[i] - b.lo[i];
    p[i] = w > 0 ? b.lo[i] + u(rng) * w : b.lo[i];
  }
  return p;
}

}  // namespace

TEST_CASE("lorenz_classic velocity oracles") {
  const Field3 f = lorenz_classic({10.0, 8.0 / 3.0, 28.0});
  CHECK(f.eval(Vec3::Zero()).norm() == 0.0);
  const Vec3 v = f.eval(Vec3(1, 1, 1));
  CHECK(v.x() == doctest::Approx(0.0));
  CHECK(v.y() == doctest::Approx(26.0));
  CHECK(v.z() == doctest::Approx(-5.0 / 3.0));
  const Field3 g = lorenz_classic({3.0, 1.0, 7.0});
  CHECK(g.eval(Vec3::Zero()).norm() == 0.0);
  CHECK_THROWS_AS(lorenz_classic({-1.0, 1.0, 1.0}), ParameterError);
}

TEST_CASE("morse_smale_plane zeros and sample velocity") {
  const Field3 f = morse_smale_plane(1);
  CHECK(f.eval(Vec3(-0.5, 0, 0)).norm() < 1e-15);
  CHECK(f.eval(Vec3(0.5, 0, 0)).norm() < 1e-15);
  const Vec3 v = f.eval(Vec3(0, 1, 0));
  // Gradient flow of sin(pi x): sinks at 2i - 1/2, saddles at 2i + 1/2.
  CHECK(v.x() == doctest::Approx(-M_PI));
  CHECK(v.y() == doctest::Approx(-1.0));
  CHECK(v.z() == 0.0);
  CHECK(f.jac(Vec3(-0.5, 0, 0))(0, 0) < 0);
  CHECK(f.jac(Vec3(0.5, 0, 0))(0, 0) > 0);
}

TEST_CASE("suspension field has unit third component") {
  const Field3 f = suspension_field(2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    CHECK(f.eval(random_interior(f.domain(), rng)).z() == 1.0);
  }
  const Vec3 v = f.eval(Vec3(-0.5, 0, 0.3));
  CHECK(v.x() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(v.y() == 0.0);
  CHECK(f.wrap(Vec3(0, 0, 1.25)).z() == doctest::Approx(0.25));
}

TEST_CASE("morse_smale_space equilibria locations") {
  const Field3 f = morse_smale_space(1);
  CHECK(f.eval(Vec3(-5, 0, 0)).norm() < 1e-14);
  CHECK(f.eval(Vec3(5, 0, 0)).norm() < 1e-14);
  CHECK(f.eval(Vec3(35, 0, 0)).norm() < 1e-14);
  const Vec3 v = f.eval(Vec3(-5, 1, 1));
  CHECK(v.x() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(v.y() == 1.0);
  CHECK(v.z() == -1.0);
}

TEST_CASE("tube field radial profile") {
  const Field3 f = tube_field(1.0, PotentialProfile::quartic_well());
  const Vec3 axis = f.eval(Vec3(0, 0, 0.4));
  CHECK(axis.x() == 0.0);
  CHECK(axis.y() == 0.0);
  CHECK(axis.z() == 1.0);
  const double r = std::sqrt(3.0 / 80.0);
  const Vec3 v = f.eval(Vec3(r, 0, 0.5));
  CHECK(std::abs(v.x()) < 1e-12);
  CHECK(v.z() == 1.0);
  CHECK_THROWS_AS(f.eval(Vec3(2.0, 0, 0.5)), DomainError);
}

TEST_CASE("potential profile validation") {
  PotentialProfile p = PotentialProfile::quartic_well();
  CHECK_NOTHROW(p.validate());
  CHECK(p.phi(0.0) == 0.0);
  CHECK(p.phi(1.0) == 0.0);
  PotentialProfile bad = p;
  bad.phi = [](double u) { return u * (1 - u); };
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("analytic Jacobians match finite differences") {
  std::vector<Field3> fields = {lorenz_classic({}), morse_smale_plane(2), suspension_field(1),
                                morse_smale_space(2),
                                tube_field(1.0, PotentialProfile::quartic_well()),
                                linear_diagonal(Vec3(2, -6, -1), Box{Vec3(-1, -1, -1), Vec3(1, 1, 1)})};
  std::mt19937_64 rng(7);
  for (const auto& f : fields) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Vec3 p = random_interior(f.domain(), rng);
      if (!f.contains(p)) continue;
      worst = std::max(worst, jac_rel_error(f, p));
    }
    INFO(f.name());
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("bump partition sums to one and is flat on inner sets") {
  BumpPartition part({CoverRegion::ball(Vec3(0, 0, 0), 0.5, 1.0),
                      CoverRegion::box(Vec3(3, 0, 0), Vec3(0.5, 0.5, 0.5), Vec3(1, 1, 1)),
                      CoverRegion::rest()});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p(u(rng), u(rng) * 0.5, u(rng) * 0.5);
    const auto w = part.weights(p);
    double s = 0.0;
    for (double x : w) {
      CHECK(x >= -1e-15);
      s += x;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK(part.weights(Vec3(0.1, 0.1, 0))[0] == 1.0);
  CHECK(part.weights(Vec3(1.2, 0, 0))[0] == 0.0);
  CHECK(part.weights(Vec3(3.2, 0.3, -0.2))[1] == 1.0);
  CHECK_THROWS_AS(BumpPartition({CoverRegion::ball(Vec3::Zero(), 0.5, 1.0),
                                 CoverRegion::ball(Vec3(1.5, 0, 0), 0.5, 1.0),
                                 CoverRegion::rest()}),
                  CompositionError);
}

TEST_CASE("blend reproduces convex combination") {
  const Box box{Vec3(-3, -3, -3), Vec3(6, 3, 3)};
  const Field3 a = constant_field(Vec3(1, 0.2, 0), box);
  const Field3 b = linear_diagonal(Vec3(-1, -2, -0.5), box);
  BumpPartition part({CoverRegion::ball(Vec3(0, 0, 0), 0.5, 1.5), CoverRegion::rest()});

  SUBCASE("single field") {
    BumpPartition one({CoverRegion::rest()});
    const Field3 f = blend({b}, one);
    CHECK((f.eval(Vec3(0.3, 0.4, 0.1)) - b.eval(Vec3(0.3, 0.4, 0.1))).norm() == 0.0);
  }
  SUBCASE("identical fields") {
    const Field3 f = blend({b, b}, part);
    const Vec3 p(0.9, 0.2, -0.3);
    CHECK((f.eval(p) - b.eval(p)).norm() < 1e-14);
  }
  SUBCASE("pointwise sum and Jacobian") {
    const Field3 f = blend({b, a}, part);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
      const Vec3 p = random_interior(Box{Vec3(-2, -2, -2), Vec3(2, 2, 2)}, rng);
      const auto w = part.weights(p);
      const Vec3 ref = w[0] * b.eval(p) + w[1] * a.eval(p);
      CHECK((f.eval(p) - ref).norm() <= 1e-14);
      CHECK(jac_rel_error(f, p) <= 1e-5);
    }
  }
  SUBCASE("acute fields never cancel") {
    const Field3 c = constant_field(Vec3(0.6, 0.8, 0), box);
    const Field3 f = blend({c, a}, part);
    std::mt19937_64 rng(5);
    double least = 1e300;
    for (int i = 0; i < 10000; ++i) {
      least = std::min(least, f.eval(random_interior(Box{Vec3(-2, -2, -2), Vec3(2, 2, 2)}, rng)).norm());
    }
    CHECK(least > 0.5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(blend({a}, part), CompositionError);
    const Field3 tiny = constant_field(Vec3(1, 0, 0), Box{Vec3(-0.1, -0.1, -0.1), Vec3(0.1, 0.1, 0.1)});
    CHECK_THROWS_AS(blend({tiny, a}, part), CompositionError);
  }
}
