// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include "singflow/census.hpp"
#include "singflow/equilibria.hpp"
#include "singflow/field.hpp"
#include "singflow/integrator.hpp"
#include "singflow/piecewise_map.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/ulam.hpp"
#include "singflow/zoo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace singflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Censuses at default settings, computed once and shared between criteria.
std::map<std::string, MeasureCensus> g_census;

const MeasureCensus& census_of(const std::string& label) {
  auto it = g_census.find(label);
  if (it == g_census.end()) it = g_census.emplace(label, census(zoo_entry(label))).first;
  return it->second;
}

double census_seconds(const std::vector<std::string>& labels) {
  double t = 0.0;
  for (const auto& l : labels) t += census_of(l).seconds;
  return t;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome equilibrium_oracle() {
  const auto t0 = Clock::now();
  const auto reps = find_equilibria(lorenz_classic({}), 1.0);
  bool ok = reps.size() == 3;
  double ev_err = 0.0;
  int foci = 0, origin = 0;
  const std::vector<double> expect{(-11 - std::sqrt(1201.0)) / 2, -8.0 / 3,
                                   (-11 + std::sqrt(1201.0)) / 2};
  for (const auto& r : reps) {
    if (r.location.norm() < 1e-8) {
      ++origin;
      std::vector<double> ev;
      for (const auto& z : r.eigenvalues) {
        ev.push_back(z.real());
        ev_err = std::max(ev_err, std::abs(z.imag()));
      }
      std::sort(ev.begin(), ev.end());
      for (int i = 0; i < 3; ++i) ev_err = std::max(ev_err, std::abs(ev[i] - expect[i]));
      ok = ok && r.kind == EquilibriumKind::lorenz_like;
    } else {
      foci += r.kind == EquilibriumKind::saddle_focus;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && origin == 1 && foci == 2 && ev_err <= 1e-6 && secs < 5.0;
  return {ok, std::to_string(reps.size()) + " equilibria, eigenvalue error " +
                  fmt("%.2e", ev_err) + ", " + fmt("%.2f s", secs)};
}

Outcome passage_oracle() {
  const auto t0 = Clock::now();
  const LinearSaddleParams p{2.0, -6.0, -1.5};
  const Field3 f = linear_diagonal(Vec3(p.lambda1, p.lambda2, p.lambda3),
                                   Box{Vec3::Constant(-1.5), Vec3::Constant(1.5)});
  std::mt19937_64 rng(20261018);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int missed = 0;
  for (int i = 0; i < 1000; ++i) {
    double x = u(rng);
    while (std::abs(x) < 1e-3) x = u(rng);
    const Vec3 entry(x, u(rng), i % 2 ? 1.0 : -1.0);
    const PassageResult r = linear_passage(p, entry);
    PlaneSection s;
    s.axis = 0;
    s.offset = r.exit.x();
    const auto ev = integrate_to_section(f, entry, s, 10.0, 1e-12);
    if (!ev) {
      ++missed;
      continue;
    }
    worst = std::max(worst, (ev->state - r.exit).norm());
  }
  const double secs = seconds_since(t0);
  return {missed == 0 && worst <= 1e-8 && secs < 10.0,
          "worst exit error " + fmt("%.2e", worst) + ", " + std::to_string(missed) +
              " missed, " + fmt("%.2f s", secs)};
}

const std::vector<std::pair<std::string, int>> kCensusTable{
    {"lorenz_classic", 1}, {"geometric_lorenz", 1}, {"double_lorenz", 2},
    {"sharp_1", 2},        {"chained_2", 4},        {"chained_3", 6},
    {"glued_suspension_2", 3}};

Outcome census_counts() {
  bool ok = true;
  std::ostringstream d;
  std::vector<std::string> labels;
  for (const auto& [label, s] : kCensusTable) {
    const MeasureCensus& mc = census_of(label);
    labels.push_back(label);
    bool row = mc.s == s && mc.stable();
    if (label == "glued_suspension_2") row = row && mc.singular_clusters() == 0;
    ok = ok && row;
    d << label << " s=" << mc.s << (mc.stable() ? "" : " (unstable)") << (row ? "" : " MISMATCH")
      << "; ";
  }
  const double secs = census_seconds(labels);
  d << fmt("%.0f s", secs);
  return {ok && secs < 1800.0, d.str()};
}

Outcome bound_verdicts() {
  bool ok = true;
  std::ostringstream d;
  for (const auto& e : zoo()) {
    const MeasureCensus& mc = census_of(e.label);
    const Verdict v = check_bound(mc, mc.s_L);
    ok = ok && v == Verdict::ok;
    if (v != Verdict::ok) d << e.label << " violation; ";
  }
  const MeasureCensus& bad = census_of("violation");
  const Verdict v = check_bound(bad, bad.s_L);
  ok = ok && v == Verdict::violation;
  d << "zoo entries " << (ok ? "ok" : "checked") << ", fixture " << to_string(v) << " ("
    << bad.singular_clusters() << " singular clusters, s_L=" << bad.s_L << ")";
  return {ok, d.str()};
}

// For every singularity the clusters accumulating on it must be exactly two,
// with side sets {top} and {bottom}.
bool side_dichotomy(const MeasureCensus& mc, std::ostringstream& d) {
  bool ok = true;
  for (std::size_t j = 0; j < mc.singular_points.size(); ++j) {
    std::multiset<std::vector<Side>> sets;
    for (std::size_t k = 0; k < mc.clusters.size(); ++k) {
      if (!support_contains_singularity(mc, static_cast<int>(k), static_cast<int>(j))) continue;
      sets.insert(accumulation_sides(mc, static_cast<int>(k), static_cast<int>(j)));
    }
    const std::multiset<std::vector<Side>> want{{Side::top}, {Side::bottom}};
    if (sets != want) {
      ok = false;
      d << mc.label << ":" << mc.singular_ids[j] << " wrong sides; ";
    }
  }
  return ok;
}

Outcome sides() {
  std::ostringstream d;
  bool ok = true;
  int checked = 0;
  for (const std::string label : {"sharp_1", "chained_2", "chained_3"}) {
    const MeasureCensus& mc = census_of(label);
    ok = side_dichotomy(mc, d) && ok;
    checked += static_cast<int>(mc.singular_points.size());
  }
  d << checked << " singularities with {top} and {bottom}";
  return {ok && checked == 6, d.str()};
}

Outcome supports() {
  const MeasureCensus& sharp = census_of("sharp_1");
  bool ok = sharp.clusters.size() == 2 && sharp.config.radius_tol == 0.05;
  for (std::size_t k = 0; k < sharp.clusters.size(); ++k)
    ok = ok && support_contains_singularity(sharp, static_cast<int>(k), 0);
  int glued_true = 0;
  for (const std::string label : {"glued_suspension_1", "glued_suspension_2"}) {
    const MeasureCensus& mc = census_of(label);
    for (const auto& c : mc.clusters) glued_true += static_cast<int>(c.support.contains.size());
  }
  ok = ok && glued_true == 0;
  return {ok, "sharp_1 clusters contain sigma0: " + std::string(ok ? "both" : "no") +
                  ", glued positives " + std::to_string(glued_true)};
}

Outcome ulam_agreement() {
  const auto t0 = Clock::now();
  struct Case {
    std::string name;
    PiecewiseMap1D map;
    int expect;
  };
  const std::vector<Case> cases{
      {"quotient_lorenz_map(1.9,3/4)", quotient_lorenz_map(1.9, 0.75), 1},
      {"winding_map(8)", winding_map(8), 1},
      {"two blocks",
       disjoint_union({affine_expanding_map(0.0, 0.5, 2), affine_expanding_map(0.5, 1.0, 2)}), 2}};
  bool ok = true;
  std::ostringstream d;
  for (const auto& c : cases) {
    std::vector<int> counts;
    for (int n : {2048, 4096, 8192}) counts.push_back(invariant_densities(ulam_build(c.map, n)).count);
    const bool row = std::all_of(counts.begin(), counts.end(), [&](int k) { return k == c.expect; });
    ok = ok && row;
    d << c.name << " " << counts[0] << "/" << counts[1] << "/" << counts[2] << "; ";
  }
  // Per-piece census clusters against the Ulam count of each piece quotient.
  int pieces = 0, agree = 0;
  for (const auto& e : zoo()) {
    if (e.kind != ModelKind::section_graph) continue;
    const MeasureCensus& mc = census_of(e.label);
    for (std::size_t p = 0; p < e.graph->pieces.size(); ++p) {
      const int ulam =
          invariant_densities(ulam_build(e.graph->piece_quotient(static_cast<int>(p)), 4096)).count;
      const auto in_piece = std::count_if(mc.clusters.begin(), mc.clusters.end(),
                                          [&](const Cluster& c) { return c.piece == int(p); });
      ++pieces;
      agree += in_piece == ulam;
    }
  }
  ok = ok && agree == pieces;
  const double secs = seconds_since(t0);
  d << agree << "/" << pieces << " pieces agree with the census, " << fmt("%.1f s", secs)
    << " excluding shared censuses";
  return {ok && secs < 120.0, d.str()};
}

Outcome sectional() {
  const Field3 lin = linear_diagonal(Vec3(2, -6, -1), Box{Vec3::Constant(-10), Vec3::Constant(10)});
  Eigen::Matrix<double, 3, 2> e13;
  e13 << 1, 0, 0, 0, 0, 1;
  const double theta_lin = sectional_expansion_estimate(lin, Vec3::Zero(), e13, 20.0).theta;
  bool ok = std::abs(theta_lin - 1.0) <= 1e-6;

  const Field3 lor = lorenz_classic({});
  const Trajectory orbit = integrate(lor, Vec3(1.0, 1.0, 20.0), 1100.0, 1e-9);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(100.0, orbit.times.back());
  int positive = 0, inconclusive = 0;
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix<double, 3, 2> frame;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c) frame(r, c) = g(rng);
    const auto est = sectional_expansion_estimate(lor, orbit.at(u(rng)), frame, 500.0);
    inconclusive += est.inconclusive;
    positive += est.theta > 0.0;
  }
  ok = ok && positive >= 95;
  return {ok, "linear theta " + fmt("%.9f", theta_lin) + ", Lorenz positive " +
                  std::to_string(positive) + "/100 (" + std::to_string(inconclusive) +
                  " inconclusive fits)"};
}

Outcome trapping_connectedness() {
  bool ok = true;
  std::ostringstream d;
  for (const auto& e : zoo()) {
    if (e.kind != ModelKind::ode) continue;
    const TrappingReport r = trapping_check(e);
    ok = ok && r.pass;
    d << e.label << " trap " << (r.pass ? "ok" : "FAIL") << "; ";
  }
  const auto conn = [&](const std::string& label, double T, double eps, bool want) {
    const ConnectednessReport r = connectedness_check(zoo_entry(label), T, eps);
    ok = ok && r.pass == want;
    d << label << " " << r.components << " component(s); ";
  };
  conn("lorenz_classic", 200.0, 1.0, true);
  conn("glued_suspension_1", 500.0, 0.2, true);
  conn("glued_suspension_2", 500.0, 0.2, true);
  conn("disjoint_lorenz", 200.0, 2.0, false);
  std::string text = d.str();
  text.resize(text.size() - 2);
  return {ok, text};
}

Outcome jacobians() {
  std::vector<Field3> fields;
  for (const auto& e : zoo()) {
    if (e.field) fields.push_back(*e.field);
    if (e.graph) {
      for (const auto& s : e.graph->singularities)
        fields.push_back(linear_diagonal(Vec3(s.params.lambda1, s.params.lambda2, s.params.lambda3),
                                         Box{s.location.array() - 1.5, s.location.array() + 1.5}));
    }
  }
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  double worst = 0.0;
  int points = 0;
  for (const auto& f : fields) {
    const Box& b = f.domain();
    for (int i = 0; i < 1000; ++i) {
      Vec3 p;
      for (int k = 0; k < 3; ++k) p[k] = b.lo[k] + u(rng) * (b.hi[k] - b.lo[k]);
      if (!f.contains(p)) continue;
      const Mat3 fd = finite_difference_jacobian(f, p, 1e-5 * b.diameter());
      const Mat3 an = f.jac(p);
      worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
      ++points;
    }
  }
  return {worst <= 1e-5, std::to_string(fields.size()) + " fields, " + std::to_string(points) +
                             " points, worst relative error " + fmt("%.2e", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"equilibrium oracle", equilibrium_oracle},
      {"closed-form passage vs integrator", passage_oracle},
      {"census counts and horizon stability", census_counts},
      {"bound verdicts", bound_verdicts},
      {"side dichotomy", sides},
      {"support diagnostics", supports},
      {"Ulam oracle agreement", ulam_agreement},
      {"sectional expansion", sectional},
      {"trapping and connectedness", trapping_connectedness},
      {"Jacobian consistency", jacobians}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
