#include <doctest.h>

#include "singflow/errors.hpp"
#include "singflow/piecewise_map.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/ulam.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace singflow;

TEST_CASE("doubling map operator rows") {
  const PiecewiseMap1D d = affine_expanding_map(0.0, 1.0, 2);
  CHECK_THROWS_AS(ulam_build(d, 4), ParameterError);
  const UlamOperator op = ulam_build(d, 64);
  for (const auto& row : op.rows) {
    REQUIRE(row.size() == 2);
    CHECK(row[0].second == doctest::Approx(0.5));
    CHECK(row[1].second == doctest::Approx(0.5));
  }
  const UlamResult r = invariant_densities(op);
  CHECK(r.count == 1);
  double dev = 0.0;
  for (double v : r.densities[0]) dev = std::max(dev, std::abs(v - 1.0));
  CHECK(dev <= 1e-10);
}

TEST_CASE("two disjoint blocks give two components") {
  const PiecewiseMap1D m = disjoint_union(
      {affine_expanding_map(0.0, 0.5, 2), affine_expanding_map(0.5, 1.0, 2)});
  for (int n : {256, 2048}) {
    const UlamResult r = invariant_densities(ulam_build(m, n));
    CHECK(r.count == 2);
  }
}

TEST_CASE("Lorenz quotient map") {
  const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75);
  const UlamOperator op = ulam_build(f, 1024);
  CHECK(op.row_sum_defect() <= 1e-12);
  const UlamResult r = invariant_densities(op);
  CHECK(r.count == 1);
  double mass = 0.0;
  for (double v : r.densities[0]) {
    CHECK(v >= 0.0);
    mass += v * op.bin_width();
  }
  CHECK(std::abs(mass - 1.0) <= 1e-10);
  CHECK(r.subdominant_modulus < 1.0);
  CHECK(ulam_build(quotient_lorenz_map(2.0, 0.75), 1024).row_sum_defect() <= 1e-12);
}

TEST_CASE("serial and parallel assembly agree") {
  const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75);
  const UlamOperator a = ulam_build(f, 2048), b = ulam_build_serial(f, 2048);
  REQUIRE(a.rows.size() == b.rows.size());
  bool same = true;
  for (std::size_t i = 0; i < a.rows.size(); ++i) same = same && a.rows[i] == b.rows[i];
  CHECK(same);
}

TEST_CASE("winding map geometry and operator") {
  const PiecewiseMap1D w3 = winding_map(3);
  CHECK(w3.derivative(0.75) == doctest::Approx(2.0));
  CHECK(w3.derivative(0.2) == doctest::Approx(8.0));
  CHECK(w3(0.5) == doctest::Approx(0.0));
  CHECK_THROWS_AS(winding_map(3, 4.0), ExpansionError);
  const UlamOperator op = ulam_build(winding_map(8), 4096);
  // Dyadic branch ends align with bins, so every row is one contiguous block
  // and the row widths form one band per branch.
  std::set<std::size_t> widths;
  int max_blocks = 0;
  for (const auto& row : op.rows) {
    int blocks = 1;
    for (std::size_t k = 1; k < row.size(); ++k) blocks += row[k].first != row[k - 1].first + 1;
    max_blocks = std::max(max_blocks, blocks);
    widths.insert(row.size());
  }
  CHECK(max_blocks == 1);
  CHECK(widths.size() <= 9);
  CHECK(invariant_densities(op).count == 1);
}

TEST_CASE("expansion floor enforced") {
  Branch b;
  b.lo = 0.0;
  b.hi = 1.0;
  b.map = [](double x) { return 0.5 * x; };
  b.derivative = [](double) { return 0.5; };
  const PiecewiseMap1D weak(0.0, 1.0, {b});
  CHECK_THROWS_AS(ulam_build(weak, 64), ExpansionError);
}

TEST_CASE("density mean quadrature") {
  const UlamOperator op = ulam_build(affine_expanding_map(0.0, 1.0, 2), 4096);
  const UlamResult r = invariant_densities(op);
  CHECK(density_mean(op, r.densities[0], [](double x) { return x; }) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(density_mean(op, r.densities[0], [](double x) { return x * x; }) - 1.0 / 3) <= 1e-4);
  std::ostringstream os;
  write_density_csv(os, op, r);
  CHECK(os.str().rfind("component,bin_midpoint,density\n", 0) == 0);
}

TEST_CASE("Lorenz density mean reproduced by orbit average") {
  const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75);
  const UlamOperator op = ulam_build(f, 4096);
  const UlamResult r = invariant_densities(op);
  const double ref = density_mean(op, r.densities[0], [](double x) { return x; });
  // Batch means give a standard error for the correlated orbit.
  double x = 0.123456789;
  const int batches = 100, per = 100000;
  std::vector<double> means;
  for (int i = 0; i < 1000; ++i) x = f(x);
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (int i = 0; i < per; ++i) {
      x = f(x);
      s += x;
    }
    means.push_back(s / per);
  }
  double m = 0.0, v = 0.0;
  for (double e : means) m += e / batches;
  for (double e : means) v += (e - m) * (e - m) / (batches - 1);
  const double se = std::sqrt(v / batches);
  CHECK(std::abs(m - ref) <= 3 * se + 1e-3);
}
