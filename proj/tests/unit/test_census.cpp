#include <doctest.h>

#include "singflow/census.hpp"
#include "singflow/errors.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/ulam.hpp"
#include "singflow/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace singflow;

namespace {

CensusConfig quick_section() {
  CensusConfig c;
  c.horizon = 4000;
  c.burn_in = 200;
  c.per_node = 8;
  c.gap_tol = 0.02;
  return c;
}

}  // namespace

TEST_CASE("observables are scaled by the region box") {
  const ObservableSet obs(Box{Vec3(-2, -1, 0), Vec3(2, 1, 4)}, {Vec3::Zero()});
  const ObsVec v = obs(Vec3(1, 1, 2));
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[1] == doctest::Approx(0.5));
  CHECK(v[2] == doctest::Approx(0.5));
  CHECK(v[3] == doctest::Approx(1.0 / 4.0));
  CHECK(v[4] == doctest::Approx(2.0 / 8.0));
  CHECK(v[5] == doctest::Approx(std::sqrt(6.0) / std::sqrt(36.0)));
}

TEST_CASE("periodic coordinates are continuous across the seam") {
  const ObservableSet obs(Box{Vec3(0, 0, 0), Vec3(1, 1, 1)}, {}, {false, false, true});
  CHECK(obs(Vec3(0.5, 0.5, 1e-9))[2] == doctest::Approx(obs(Vec3(0.5, 0.5, 1.0 - 1e-9))[2]));
  CHECK(obs(Vec3(0.5, 0.5, 0.5))[2] == doctest::Approx(1.0));
}

TEST_CASE("seed at an equilibrium gives the Dirac averages") {
  const ZooEntry e = zoo_entry("lorenz_classic");
  const ObservableSet obs = ObservableSet::for_entry(e);
  const CensusConfig cfg = resolve_config(e, {});
  const BirkhoffVector bv = birkhoff(e, Vec3::Zero(), obs, cfg);
  CHECK(bv.status == SeedStatus::ok);
  CHECK((bv.averages - obs(Vec3::Zero())).norm() == 0.0);
  CHECK(bv.gap == 0.0);
}

TEST_CASE("single linkage chains within the radius") {
  std::vector<ObsVec> pts;
  for (double x : {0.0, 0.04, 0.08, 0.5, 0.53}) {
    ObsVec v = ObsVec::Zero();
    v[0] = x;
    pts.push_back(v);
  }
  const auto labels = single_linkage(pts, 0.05);
  CHECK(labels == std::vector<int>{0, 0, 0, 1, 1});
  CHECK(single_linkage({}, 0.05).empty());
}

TEST_CASE("bound verdicts") {
  CHECK(check_bound(2, 1) == Verdict::ok);
  CHECK(check_bound(2, 3) == Verdict::ok);
  CHECK(check_bound(3, 1) == Verdict::violation);
  CHECK(check_bound(3, 0) == Verdict::ok);
}

TEST_CASE("config validation") {
  const ZooEntry e = zoo_entry("sharp_1");
  CensusConfig c;
  c.horizon = 100;
  c.burn_in = 200;
  CHECK_THROWS_AS(resolve_config(e, c), ConfigError);
  c.burn_in = 20;
  CHECK_THROWS_AS(resolve_config(e, c), ConfigError);
  c.burn_in = 5;
  c.gap_tol = -1;
  CHECK_THROWS_AS(resolve_config(e, c), ConfigError);
}

TEST_CASE("geometric Lorenz census") {
  const MeasureCensus mc = census(zoo_entry("geometric_lorenz"), quick_section());
  REQUIRE(mc.s == 1);
  CHECK(support_contains_singularity(mc, 0, 0));
  CHECK(accumulation_sides(mc, 0, 0) == std::vector<Side>{Side::top});
  CHECK(mc.stable());
  double total = mc.discard_fraction;
  for (const auto& c : mc.clusters) total += c.fraction;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sharp model: two measures on opposite sides") {
  const MeasureCensus mc = census(zoo_entry("sharp_1"), quick_section());
  REQUIRE(mc.s == 2);
  std::set<Side> seen;
  for (int k = 0; k < 2; ++k) {
    CHECK(support_contains_singularity(mc, k, 0));
    const auto sides = accumulation_sides(mc, k, 0);
    REQUIRE(sides.size() == 1);
    seen.insert(sides[0]);
  }
  CHECK(seen == std::set<Side>{Side::top, Side::bottom});
  CHECK(check_bound(mc, 1) == Verdict::ok);
  CHECK(mc.clusters[0].piece != mc.clusters[1].piece);
}

TEST_CASE("one measure visiting both sides") {
  const MeasureCensus mc = census(zoo_entry("two_sided"), quick_section());
  REQUIRE(mc.s == 1);
  CHECK(accumulation_sides(mc, 0, 0) == std::vector<Side>{Side::top, Side::bottom});
}

TEST_CASE("violation fixture breaks the bound") {
  const MeasureCensus mc = census(zoo_entry("violation"), quick_section());
  CHECK(mc.singular_clusters() == 3);
  CHECK(check_bound(mc, mc.s_L) == Verdict::violation);
}

TEST_CASE("serial and parallel censuses agree") {
  CensusConfig c = quick_section();
  c.per_node = 4;
  const ZooEntry e = zoo_entry("chained_2");
  CHECK(to_json(census(e, c)).dump() == to_json(census_serial(e, c)).dump());
}

TEST_CASE("seed changes move the seeds but not the count") {
  CensusConfig c = quick_section();
  const ZooEntry e = zoo_entry("sharp_1");
  const auto a = census_seeds(e, c);
  c.seed = 7;
  const auto b = census_seeds(e, c);
  REQUIRE(a.size() == b.size());
  CHECK((a[0].point - b[0].point).norm() > 0.0);
  CHECK(census(e, c).s == 2);
}

TEST_CASE("glued suspension clusters avoid singularities") {
  CensusConfig c;
  c.grid = 6;
  const MeasureCensus mc = census(zoo_entry("glued_suspension_1"), c);
  CHECK(mc.s == 2);
  CHECK(mc.singular_clusters() == 0);
  for (const auto& k : mc.clusters) CHECK(k.support.contains.empty());
}

TEST_CASE("unreliable census is reported") {
  CensusConfig c;
  c.horizon = 20;
  c.burn_in = 1;
  c.grid = 3;
  c.gap_tol = 1e-9;
  CHECK_THROWS_AS(census(zoo_entry("lorenz_classic"), c), CensusUnreliable);
}

TEST_CASE("top Lyapunov exponent") {
  const Box box{Vec3::Constant(-10), Vec3::Constant(10)};
  const Field3 lin = linear_diagonal(Vec3(2, -6, -1), box);
  CHECK(lyapunov_top(lin, Vec3::Zero(), 50.0) == doctest::Approx(2.0).epsilon(1e-6));

  // Quotient orbit average of log|f'| against the Ulam integral.
  const ZooEntry g = zoo_entry("geometric_lorenz");
  const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75);
  const UlamResult u = invariant_densities(ulam_build(f, 4096));
  const double ref = density_mean(ulam_build(f, 4096), u.densities[0], [&f](double x) {
    return std::log(std::abs(f.derivative(x)));
  });
  CHECK(std::abs(lyapunov_top(*g.graph, 0, 0.3141, 2000000) - ref) < 0.01);

  // Periodic sink of the glued model.
  const ZooEntry s = zoo_entry("glued_suspension_1");
  CHECK(lyapunov_top(*s.field, Vec3(1.5, 0.1, 0.2), 40.0, 1e-8) < -0.1);
}

TEST_CASE("sectional expansion of a linear saddle") {
  const Box box{Vec3::Constant(-10), Vec3::Constant(10)};
  const Field3 lin = linear_diagonal(Vec3(2, -6, -1), box);
  Eigen::Matrix<double, 3, 2> e13;
  e13 << 1, 0, 0, 0, 0, 1;
  const auto a = sectional_expansion_estimate(lin, Vec3::Zero(), e13, 20.0);
  CHECK(a.theta == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(a.inconclusive);
  Eigen::Matrix<double, 3, 2> e23;
  e23 << 0, 0, 1, 0, 0, 1;
  const auto b = sectional_expansion_estimate(lin, Vec3::Zero(), e23, 20.0);
  CHECK(b.theta == doctest::Approx(-7.0).epsilon(1e-6));
}

TEST_CASE("report formats") {
  CensusConfig c = quick_section();
  c.per_node = 4;
  const MeasureCensus mc = census(zoo_entry("sharp_1"), c);
  const auto j = to_json(mc);
  CHECK(j["schema"] == 1);
  CHECK(j["s"] == 2);
  CHECK(j["verdict"] == "ok");
  CHECK(j["clusters"].size() == 2);
  std::ostringstream os;
  write_vectors_csv(os, mc);
  const std::string csv = os.str();
  CHECK(csv.rfind("index,node,seed_x", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(mc.vectors.size()));
}
