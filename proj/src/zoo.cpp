#include "singflow/zoo.hpp"

#include "singflow/bump.hpp"
#include "singflow/errors.hpp"
#include "singflow/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace singflow {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

RegionPart RegionPart::make_box(const Box& b) {
  RegionPart p;
  p.shape = Shape::box;
  p.box = b;
  return p;
}

RegionPart RegionPart::make_sphere(const Vec3& c, double r) {
  if (!(r > 0.0)) throw ParameterError("sphere radius must be positive");
  RegionPart p;
  p.shape = Shape::sphere;
  p.center = c;
  p.radius = r;
  return p;
}

bool RegionPart::contains(const Vec3& p) const {
  if (shape == Shape::sphere) return (p - center).squaredNorm() <= radius * radius;
  return box.contains(p);
}

Box RegionPart::bounds() const {
  if (shape == Shape::box) return box;
  return Box{center - Vec3::Constant(radius), center + Vec3::Constant(radius)};
}

bool TrappingRegion::contains(const Vec3& p) const {
  for (const auto& part : parts) {
    Vec3 q = p;
    if (part.shape == RegionPart::Shape::box) {
      for (int a = 0; a < 3; ++a) {
        if (!periodic[a]) continue;
        const double w = part.box.hi[a] - part.box.lo[a];
        q[a] = part.box.lo[a] + std::fmod(std::fmod(q[a] - part.box.lo[a], w) + w, w);
      }
    }
    if (part.contains(q)) return true;
  }
  return false;
}

Box TrappingRegion::bounds() const {
  if (parts.empty()) throw ParameterError("empty trapping region");
  Box b = parts.front().bounds();
  for (const auto& p : parts) {
    const Box q = p.bounds();
    b.lo = b.lo.cwiseMin(q.lo);
    b.hi = b.hi.cwiseMax(q.hi);
  }
  return b;
}

std::vector<TrappingRegion::BoundarySample> TrappingRegion::boundary_samples(int n) const {
  std::vector<BoundarySample> out;
  // Split the budget across parts in proportion to boundary area.
  std::vector<double> areas;
  double total = 0.0;
  for (const auto& p : parts) {
    double a = 0.0;
    if (p.shape == RegionPart::Shape::sphere) {
      a = 4.0 * kPi * p.radius * p.radius;
    } else {
      const Vec3 e = p.box.extent();
      for (int ax = 0; ax < 3; ++ax) {
        if (!periodic[ax]) a += 2.0 * e[(ax + 1) % 3] * e[(ax + 2) % 3];
      }
    }
    areas.push_back(a);
    total += a;
  }
  auto covered_elsewhere = [&](const Vec3& q, std::size_t self) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (k == self) continue;
      const RegionPart& o = parts[k];
      // Strictly interior to another part.
      if (o.shape == RegionPart::Shape::sphere) {
        if ((q - o.center).norm() < o.radius * (1 - 1e-9)) return true;
      } else if ((q.array() > o.box.lo.array()).all() && (q.array() < o.box.hi.array()).all()) {
        return true;
      }
    }
    return false;
  };
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const RegionPart& p = parts[k];
    const int m = std::max(1, static_cast<int>(std::lround(n * areas[k] / total)));
    if (p.shape == RegionPart::Shape::sphere) {
      // Fibonacci lattice.
      const double golden = kPi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < m; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / m;
        const double r = std::sqrt(1.0 - z * z);
        const Vec3 nrm(r * std::cos(golden * i), r * std::sin(golden * i), z);
        const Vec3 q = p.center + p.radius * nrm;
        if (!covered_elsewhere(q, k)) out.push_back({q, nrm});
      }
      continue;
    }
    const Vec3 e = p.box.extent();
    double face_total = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      if (!periodic[ax]) face_total += 2.0 * e[(ax + 1) % 3] * e[(ax + 2) % 3];
    }
    for (int ax = 0; ax < 3; ++ax) {
      if (periodic[ax]) continue;
      const int u = (ax + 1) % 3, v = (ax + 2) % 3;
      const double fa = e[u] * e[v];
      const int per_face = std::max(1, static_cast<int>(std::lround(m * fa / face_total)));
      // Stratified grid with aspect-matched counts.
      const int nu = std::max(1, static_cast<int>(std::lround(std::sqrt(per_face * e[u] / std::max(e[v], 1e-300)))));
      const int nv = std::max(1, per_face / nu);
      for (int side = 0; side < 2; ++side) {
        for (int i = 0; i < nu; ++i) {
          for (int j = 0; j < nv; ++j) {
            Vec3 q;
            q[ax] = side ? p.box.hi[ax] : p.box.lo[ax];
            q[u] = p.box.lo[u] + (i + 0.5) / nu * e[u];
            q[v] = p.box.lo[v] + (j + 0.5) / nv * e[v];
            Vec3 nrm = Vec3::Zero();
            nrm[ax] = side ? 1.0 : -1.0;
            if (!covered_elsewhere(q, k)) out.push_back({q, nrm});
          }
        }
      }
    }
  }
  return out;
}

nlohmann::ordered_json TrappingRegion::to_json() const {
  nlohmann::ordered_json j;
  j["parts"] = nlohmann::ordered_json::array();
  for (const auto& p : parts) {
    nlohmann::ordered_json e;
    if (p.shape == RegionPart::Shape::sphere) {
      e["shape"] = "sphere";
      e["center"] = {p.center.x(), p.center.y(), p.center.z()};
      e["radius"] = p.radius;
    } else {
      e["shape"] = "box";
      e["lo"] = {p.box.lo.x(), p.box.lo.y(), p.box.lo.z()};
      e["hi"] = {p.box.hi.x(), p.box.hi.y(), p.box.hi.z()};
    }
    j["parts"].push_back(e);
  }
  j["periodic"] = {periodic[0], periodic[1], periodic[2]};
  return j;
}

std::string to_string(ModelKind k) { return k == ModelKind::ode ? "ode" : "section_graph"; }

int ZooEntry::s_L() const {
  if (kind == ModelKind::section_graph) return graph->lorenz_like_count();
  return count_lorenz_like(equilibria, [this](const Vec3& p) { return region.contains(p); });
}

std::vector<Vec3> ZooEntry::singular_points() const {
  std::vector<Vec3> pts;
  if (kind == ModelKind::section_graph) {
    for (const auto& s : graph->singularities) pts.push_back(s.location);
  } else {
    for (const auto& e : equilibria) pts.push_back(e.location);
  }
  return pts;
}

void ZooEntry::validate() const {
  if (s_L_expected > 0 && s_expected > 2 * s_L_expected) {
    throw ParameterError(label + ": declared census violates s <= 2 s_L");
  }
  const Box rb = region.bounds();
  if (kind == ModelKind::ode) {
    const Box& d = field->domain();
    if (!d.contains(rb)) throw ParameterError(label + ": trapping region leaves the domain");
  }
}

nlohmann::ordered_json ZooEntry::manifest() const {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["kind"] = to_string(kind);
  j["s_expected"] = s_expected;
  j["s_L_expected"] = s_L_expected;
  j["description"] = description;
  j["trapping_region"] = region.to_json();
  if (kind == ModelKind::section_graph) j["model"] = graph->to_json();
  return j;
}

// ---------------------------------------------------------------------------
// ODE entries

ZooEntry make_lorenz_classic(const LorenzParams& p) {
  ZooEntry e;
  e.label = "lorenz_classic";
  e.kind = ModelKind::ode;
  e.description = "Lorenz system (10, 8/3, 28); trapping sphere around the attractor";
  e.field = std::make_shared<Field3>(lorenz_classic(p));
  e.region.parts = {RegionPart::make_sphere(Vec3(0, 0, p.a + p.r), lorenz_trapping_radius(p))};
  e.s_expected = 1;
  e.s_L_expected = 1;
  e.defaults = {1000.0, 50.0, 1e-7};
  e.equilibria = find_equilibria(*e.field, 4.0);
  return e;
}

ZooEntry make_glued_suspension(int k, double radius) {
  if (k < 1) throw ParameterError("glued suspension needs k >= 1");
  if (!(radius > 0.0 && radius < 0.5)) throw ParameterError("attachment radius must lie in (0, 0.5)");
  const Field3 base = suspension_field(k);
  std::vector<Field3> fields;
  std::vector<CoverRegion> regions;
  const DiskField disk = DiskField::contraction(Eigen::Vector2d(0.25, 0.0), 1.0);
  for (int i = 0; i <= k; ++i) {
    const double cx = 2.0 * i - 0.5;
    fields.push_back(attached_disk_suspension(disk, cx, 0.0, radius, base.domain()));
    regions.push_back(CoverRegion::cylinder(Vec3(cx, 0.0, 0.5), 2, 0.5 * radius, radius));
  }
  fields.push_back(base);
  regions.push_back(CoverRegion::rest());
  ZooEntry e;
  e.label = "glued_suspension_" + std::to_string(k);
  e.kind = ModelKind::ode;
  e.description = "suspended Morse-Smale flow with " + std::to_string(k + 1) +
                  " attached disk-map suspensions glued by a partition of unity";
  e.field = std::make_shared<Field3>(blend(fields, BumpPartition(regions), e.label));
  e.region.parts = {RegionPart::make_box(base.domain())};
  e.region.periodic = {false, false, true};
  e.s_expected = k + 1;
  e.s_L_expected = 0;
  e.defaults = {60.0, 6.0, 1e-7};
  // Contraction toward the strip is slow (rate 1), so the box map needs
  // unit flow time to move points across a box.
  e.connectivity.tau = 1.0;
  e.equilibria = {};  // third component is 1 everywhere
  return e;
}

ZooEntry make_disjoint_lorenz_fixture() {
  const LorenzParams p;
  const Field3 l = lorenz_classic(p);
  const double R = lorenz_trapping_radius(p);
  const double shift = 4.0 * R;
  const Box d = lorenz_domain(p);
  Box dom{d.lo, d.hi + Vec3(shift, 0, 0)};
  auto which = [shift](const Vec3& s) { return s.x() < 0.5 * shift ? 0.0 : shift; };
  auto eval = [l, which](const Vec3& s) {
    return l.eval(s - Vec3(which(s), 0, 0));
  };
  auto jac = [l, which](const Vec3& s) { return l.jac(s - Vec3(which(s), 0, 0)); };
  ZooEntry e;
  e.label = "disjoint_lorenz";
  e.kind = ModelKind::ode;
  e.description = "two copies of the Lorenz system in separate trapping spheres";
  e.field = std::make_shared<Field3>("disjoint_lorenz", dom, eval, jac);
  const Vec3 c(0, 0, p.a + p.r);
  e.region.parts = {RegionPart::make_sphere(c, R), RegionPart::make_sphere(c + Vec3(shift, 0, 0), R)};
  e.s_expected = 2;
  e.s_L_expected = 2;
  e.defaults = {1000.0, 50.0, 1e-7};
  for (const auto& r : find_equilibria(l, 4.0)) {
    e.equilibria.push_back(r);
    EquilibriumReport t = r;
    t.location.x() += shift;
    e.equilibria.push_back(t);
  }
  return e;
}

ZooEntry make_untrapped_lorenz_fixture() {
  ZooEntry e = make_lorenz_classic();
  e.label = "untrapped_lorenz";
  e.description = "Lorenz system with a box that cuts through the attractor";
  e.region.parts = {RegionPart::make_box(Box{Vec3(-10, -10, 5), Vec3(10, 10, 40)})};
  return e;
}

// ---------------------------------------------------------------------------
// Section-graph entries

namespace {

struct Cell {
  std::string sing, S, Sm, Ep, Em;
};

SingularityRecord add_singularity(SectionGraphModel& m, const std::string& id, const Vec3& loc,
                                  const LinearSaddleParams& p) {
  SingularityRecord s{id, loc, p};
  m.singularities.push_back(s);
  return s;
}

SectionNode face_node(const std::string& id, const Vec3& loc, double dz, double ylo = -1.0,
                      double yhi = 1.0) {
  SectionNode n;
  n.id = id;
  n.axis = 2;
  n.offset = loc.z() + dz;
  n.origin = {loc.x(), loc.y()};
  n.lo = {-1.0, ylo};
  n.hi = {1.0, yhi};
  n.quotient_axis = 0;
  return n;
}

SectionNode exit_node(const std::string& id, const Vec3& loc, double dx) {
  SectionNode n;
  n.id = id;
  n.axis = 0;
  n.offset = loc.x() + dx;
  n.origin = {loc.y(), loc.z()};
  n.quotient_axis = 1;
  return n;
}

TransitionMap passage(const std::string& src, const std::string& tgt, const std::string& sing,
                      Side side, double xsign, double ylo = -1.0, double yhi = 1.0) {
  TransitionMap t;
  t.kind = TransitionKind::linear_passage;
  t.source = src;
  t.target = tgt;
  t.singularity = sing;
  t.side = side;
  t.dom_lo = {xsign > 0 ? 0.0 : -1.0, ylo};
  t.dom_hi = {xsign > 0 ? 1.0 : 0.0, yhi};
  return t;
}

TransitionMap reinjection(const std::string& src, const std::string& tgt, double sign, double c,
                          double fiber_offset, double zlo = -1.0, double zhi = 1.0,
                          double ylo = -1.0, double yhi = 1.0) {
  TransitionMap t;
  t.kind = TransitionKind::affine_reinjection;
  t.source = src;
  t.target = tgt;
  t.sign = sign;
  t.c = c;
  t.fiber_offset = fiber_offset;
  t.fiber_scale = 0.25;
  t.dom_lo = {ylo, zlo};
  t.dom_hi = {yhi, zhi};
  t.time = 1.0;
  return t;
}

TransitionMap winding(const std::string& src, const std::string& tgt, double sign, int N,
                      double fiber_offset, double zlo, double zhi) {
  TransitionMap t;
  t.kind = TransitionKind::winding_map;
  t.source = src;
  t.target = tgt;
  t.sign = sign;
  t.branches = N;
  t.base = 2.0;
  t.fiber_offset = fiber_offset;
  t.fiber_scale = 0.25;
  t.dom_lo = {-1.0, zlo};
  t.dom_hi = {1.0, zhi};
  t.time = 2.0;
  return t;
}

TransitionMap tube(const std::string& src, const std::string& tgt, double ylo, double yhi,
                   double yshift) {
  TransitionMap t;
  t.kind = TransitionKind::tube_routing;
  t.source = src;
  t.target = tgt;
  t.dom_lo = {-1.0, ylo};
  t.dom_hi = {1.0, yhi};
  t.scale = {0.9, 2.0};
  t.shift = {0.0, yshift};
  t.time = 3.0;
  return t;
}

// Sharp cell: an upper boundary-repeller Lorenz piece on S (top passages)
// and a lower winding piece on S- (bottom passages); the wandering strips
// |y| > 0.8 of S- are routed to `route_to`.
Cell add_sharp_cell(SectionGraphModel& m, const std::string& tag, const Vec3& loc,
                    const LinearSaddleParams& p, const std::string& route_to_self_or_next) {
  Cell c{"sigma" + tag, "S" + tag, "Sm" + tag, "Ep" + tag, "Em" + tag};
  add_singularity(m, c.sing, loc, p);
  m.nodes.push_back(face_node(c.S, loc, 1.0));
  m.nodes.push_back(face_node(c.Sm, loc, -1.0));
  m.nodes.push_back(exit_node(c.Ep, loc, 1.0));
  m.nodes.push_back(exit_node(c.Em, loc, -1.0));
  m.transitions.push_back(passage(c.S, c.Ep, c.sing, Side::top, 1));
  m.transitions.push_back(passage(c.S, c.Em, c.sing, Side::top, -1));
  m.transitions.push_back(passage(c.Sm, c.Ep, c.sing, Side::bottom, 1, -0.8, 0.8));
  m.transitions.push_back(passage(c.Sm, c.Em, c.sing, Side::bottom, -1, -0.8, 0.8));
  const std::string dest = route_to_self_or_next.empty() ? c.S : route_to_self_or_next;
  m.transitions.push_back(tube(c.Sm, dest, 0.8, 1.0, -1.6));
  m.transitions.push_back(tube(c.Sm, dest, -1.0, -0.8, 1.6));
  m.transitions.push_back(reinjection(c.Ep, c.S, 1.0, 2.0, 0.5, 0.0, 1.0));
  m.transitions.push_back(winding(c.Ep, c.Sm, 1.0, 8, 0.5, -1.0, 0.0));
  m.transitions.push_back(reinjection(c.Em, c.S, -1.0, 2.0, -0.5, 0.0, 1.0));
  m.transitions.push_back(winding(c.Em, c.Sm, -1.0, 8, -0.5, -1.0, 0.0));
  m.pieces.push_back({"upper" + tag, c.S, {c.S, c.Ep, c.Em}});
  m.pieces.push_back({"lower" + tag, c.Sm, {c.Sm, c.Ep, c.Em}});
  return c;
}

}  // namespace

ZooEntry make_section_entry(const SectionGraphModel& model, int s_expected, int s_L_expected) {
  ZooEntry e;
  e.label = model.label;
  e.kind = ModelKind::section_graph;
  auto g = std::make_shared<SectionGraphModel>(model);
  g->finalize();
  e.graph = g;
  e.region.parts = {RegionPart::make_box(g->bounding_box())};
  e.s_expected = s_expected;
  e.s_L_expected = s_L_expected;
  e.defaults = {20000.0, 1000.0, 0.0};
  return e;
}

ZooEntry make_geometric_lorenz(double c, const LinearSaddleParams& p) {
  SectionGraphModel m;
  m.label = "geometric_lorenz";
  const Vec3 o = Vec3::Zero();
  add_singularity(m, "sigma0", o, p);
  m.nodes = {face_node("S", o, 1.0), exit_node("Ep", o, 1.0), exit_node("Em", o, -1.0)};
  m.transitions = {passage("S", "Ep", "sigma0", Side::top, 1),
                   passage("S", "Em", "sigma0", Side::top, -1),
                   reinjection("Ep", "S", 1.0, c, 0.5), reinjection("Em", "S", -1.0, c, -0.5)};
  m.pieces = {{"attractor", "S", {"S", "Ep", "Em"}}};
  ZooEntry e = make_section_entry(m, 1, 1);
  e.description = "geometric Lorenz model: linear saddle passage plus affine reinjection";
  return e;
}

ZooEntry make_double_lorenz() {
  const LinearSaddleParams p;
  SectionGraphModel m;
  m.label = "double_lorenz";
  const Vec3 mid(0, 0, 0), up(0, 0, 4), dn(0, 0, -4);
  add_singularity(m, "sigma_mid", mid, p);
  add_singularity(m, "sigma_up", up, p);
  add_singularity(m, "sigma_dn", dn, p);
  SectionNode s1 = face_node("S1", mid, 2.0), s2 = face_node("S2", mid, -2.0);
  m.nodes = {s1, s2, exit_node("Em_mid", mid, -1.0), exit_node("Ep_mid", mid, 1.0),
             exit_node("Ep_up", up, 1.0), exit_node("Em_dn", dn, -1.0)};
  m.transitions = {
      passage("S1", "Em_mid", "sigma_mid", Side::top, -1),
      passage("S1", "Ep_up", "sigma_up", Side::bottom, 1),
      passage("S2", "Ep_mid", "sigma_mid", Side::bottom, 1),
      passage("S2", "Em_dn", "sigma_dn", Side::top, -1),
      reinjection("Em_mid", "S1", -1.0, 1.9, -0.5),
      reinjection("Ep_up", "S1", 1.0, 1.9, 0.5),
      reinjection("Ep_mid", "S2", 1.0, 1.9, 0.5),
      reinjection("Em_dn", "S2", -1.0, 1.9, -0.5),
  };
  m.pieces = {{"upper", "S1", {"S1", "Em_mid", "Ep_up"}},
              {"lower", "S2", {"S2", "Ep_mid", "Em_dn"}}};
  ZooEntry e = make_section_entry(m, 2, 3);
  e.description = "two geometric Lorenz pieces sharing the middle singularity";
  return e;
}

ZooEntry make_sharp(const LinearSaddleParams& p) {
  SectionGraphModel m;
  m.label = "sharp_1";
  add_sharp_cell(m, "0", Vec3::Zero(), p, "");
  ZooEntry e = make_section_entry(m, 2, 1);
  e.description = "one Lorenz-like singularity accumulated by two measures from opposite sides";
  return e;
}

ZooEntry make_chained(int k, const LinearSaddleParams& p) {
  if (k < 1) throw ParameterError("chained model needs k >= 1");
  SectionGraphModel m;
  m.label = "chained_" + std::to_string(k);
  for (int i = 0; i < k; ++i) {
    const std::string next = i + 1 < k ? "S" + std::to_string(i + 1) : "";
    add_sharp_cell(m, std::to_string(i), Vec3(40.0 * i - 5.0, 0, 0), p, next);
  }
  ZooEntry e = make_section_entry(m, 2 * k, k);
  e.description = std::to_string(k) + " sharp cells chained by connecting tubes";
  return e;
}

ZooEntry make_two_sided_fixture() {
  const LinearSaddleParams p;
  SectionGraphModel m;
  m.label = "two_sided";
  const Vec3 o = Vec3::Zero();
  add_singularity(m, "sigma0", o, p);
  m.nodes = {face_node("S", o, 1.0), face_node("Sm", o, -1.0), exit_node("Ep", o, 1.0),
             exit_node("Em", o, -1.0)};
  m.transitions = {passage("S", "Ep", "sigma0", Side::top, 1),
                   passage("S", "Em", "sigma0", Side::top, -1),
                   passage("Sm", "Ep", "sigma0", Side::bottom, 1),
                   passage("Sm", "Em", "sigma0", Side::bottom, -1),
                   reinjection("Ep", "Sm", 1.0, 1.9, 0.5, 0.0, 1.0),
                   reinjection("Ep", "S", 1.0, 1.9, 0.5, -1.0, 0.0),
                   reinjection("Em", "Sm", -1.0, 1.9, -0.5, 0.0, 1.0),
                   reinjection("Em", "S", -1.0, 1.9, -0.5, -1.0, 0.0)};
  m.pieces = {{"alternating", "S", {"S", "Sm", "Ep", "Em"}}};
  ZooEntry e = make_section_entry(m, 1, 1);
  e.description = "one measure whose orbits alternate between both sides of the singularity";
  return e;
}

ZooEntry make_violation_fixture() {
  const LinearSaddleParams p;
  SectionGraphModel m;
  m.label = "violation";
  const Vec3 o = Vec3::Zero();
  add_singularity(m, "sigma0", o, p);
  m.nodes = {face_node("Sup", o, 1.0, 0.0, 1.0), face_node("Sdn", o, 1.0, -1.0, 0.0),
             face_node("Sm", o, -1.0), exit_node("Ep", o, 1.0), exit_node("Em", o, -1.0)};
  for (const char* s : {"Sup", "Sdn"}) {
    const double ylo = std::string(s) == "Sup" ? 0.0 : -1.0;
    m.transitions.push_back(passage(s, "Ep", "sigma0", Side::top, 1, ylo, ylo + 1.0));
    m.transitions.push_back(passage(s, "Em", "sigma0", Side::top, -1, ylo, ylo + 1.0));
  }
  m.transitions.push_back(passage("Sm", "Ep", "sigma0", Side::bottom, 1));
  m.transitions.push_back(passage("Sm", "Em", "sigma0", Side::bottom, -1));
  for (double sg : {1.0, -1.0}) {
    const std::string ex = sg > 0 ? "Ep" : "Em";
    m.transitions.push_back(reinjection(ex, "Sup", sg, 1.9, 0.5, 0.0, 1.0, 0.0, 1.0));
    m.transitions.push_back(reinjection(ex, "Sdn", sg, 1.9, -0.5, 0.0, 1.0, -1.0, 0.0));
    m.transitions.push_back(reinjection(ex, "Sm", sg, 1.9, 0.5 * sg, -1.0, 0.0));
  }
  m.pieces = {{"up", "Sup", {"Sup", "Ep", "Em"}},
              {"down", "Sdn", {"Sdn", "Ep", "Em"}},
              {"below", "Sm", {"Sm", "Ep", "Em"}}};
  ZooEntry e = make_section_entry(m, 3, 1);
  e.description = "three singular pieces through one singularity (negative control)";
  return e;
}

std::vector<ZooEntry> zoo(const ZooOptions& opts) {
  std::vector<ZooEntry> z;
  z.push_back(make_lorenz_classic());
  z.push_back(make_geometric_lorenz());
  z.push_back(make_double_lorenz());
  z.push_back(make_sharp());
  for (int k = 2; k <= opts.chained_max; ++k) z.push_back(make_chained(k));
  for (int k = 1; k <= opts.glued_max; ++k) z.push_back(make_glued_suspension(k));
  for (const auto& e : z) e.validate();
  return z;
}

ZooEntry zoo_entry(const std::string& label) {
  auto suffix_int = [&](const std::string& prefix) -> int {
    if (label.rfind(prefix, 0) != 0) return -1;
    try {
      std::size_t used = 0;
      const int k = std::stoi(label.substr(prefix.size()), &used);
      return used == label.size() - prefix.size() ? k : -1;
    } catch (const std::exception&) {
      return -1;
    }
  };
  if (label == "lorenz_classic") return make_lorenz_classic();
  if (label == "geometric_lorenz") return make_geometric_lorenz();
  if (label == "double_lorenz") return make_double_lorenz();
  if (label == "sharp_1") return make_sharp();
  if (const int k = suffix_int("chained_"); k >= 1) return make_chained(k);
  if (const int k = suffix_int("glued_suspension_"); k >= 1) return make_glued_suspension(k);
  if (label == "violation") return make_violation_fixture();
  if (label == "two_sided") return make_two_sided_fixture();
  if (label == "disjoint_lorenz") return make_disjoint_lorenz_fixture();
  if (label == "untrapped_lorenz") return make_untrapped_lorenz_fixture();
  throw ConfigError("unknown model label: " + label);
}

nlohmann::ordered_json zoo_manifest(const std::vector<ZooEntry>& entries) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) j["entries"].push_back(e.manifest());
  return j;
}

// ---------------------------------------------------------------------------
// Checks

TrappingReport trapping_check(const ZooEntry& entry, int samples) {
  if (entry.kind != ModelKind::ode) throw ParameterError("trapping check needs an ODE entry");
  TrappingReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (const auto& s : entry.region.boundary_samples(samples)) {
    const Vec3 v = entry.field->eval(s.point);
    const double nv = v.norm();
    const double m = nv > 0.0 ? v.dot(s.normal) / nv : 0.0;
    ++rep.samples;
    if (m < 0.0) ++rep.inward;
    if (m > 0.0) ++rep.outward;
    if (m > rep.worst_margin) {
      rep.worst_margin = m;
      rep.worst_point = s.point;
    }
  }
  rep.pass = rep.samples > 0 && rep.outward == 0 && rep.inward >= 0.999 * rep.samples;
  return rep;
}

namespace {

struct CellKey {
  std::int64_t i, j, k;
  bool operator==(const CellKey& o) const { return i == o.i && j == o.j && k == o.k; }
};
struct CellHash {
  std::size_t operator()(const CellKey& c) const {
    std::uint64_t h = static_cast<std::uint64_t>(c.i) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(c.j) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.k) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};
using CellSet = std::unordered_set<CellKey, CellHash>;

}  // namespace

ConnectednessReport connectedness_check(const ZooEntry& entry, double T, double eps,
                                        const ConnectednessOptions& opts) {
  if (entry.kind != ModelKind::ode) throw ParameterError("connectedness check needs an ODE entry");
  if (!(eps > 0.0) || !(T > 0.0)) throw ParameterError("connectedness needs positive T and eps");
  const Field3& f = *entry.field;
  const Box root = entry.region.bounds();
  const Vec3 ext = root.extent();
  const PeriodicMask per = entry.region.periodic;

  // Bisection depth per axis so that all edges end up <= eps.
  std::array<int, 3> depth{};
  for (int a = 0; a < 3; ++a) {
    depth[a] = ext[a] > eps ? static_cast<int>(std::ceil(std::log2(ext[a] / eps))) : 0;
  }
  std::array<int, 3> lvl{0, 0, 0};
  CellSet cells{{0, 0, 0}};

  auto edge = [&](int a) { return ext[a] / std::ldexp(1.0, lvl[a]); };
  auto flow = [&](const Vec3& x0) -> std::optional<Vec3> {
    using DP = DormandPrince<3>;
    DP dp([&f](const Vec3& y) { return f.eval(y); }, opts.tol, 0.0, x0);
    while (dp.time() < opts.tau) {
      dp.advance(opts.tau, 1e-12);
      if (!entry.region.contains(dp.state())) return std::nullopt;
    }
    return dp.state();
  };

  double flow_time = 0.0;
  // Outer image of a box: every cell meeting the bounding box of the images
  // of a corner-inclusive test grid.
  auto select = [&]() {
    std::vector<CellKey> list(cells.begin(), cells.end());
    const int m = std::max(2, opts.points_per_axis);
    std::vector<std::vector<CellKey>> hits(list.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t b = 0; b < list.size(); ++b) {
      const CellKey& c = list[b];
      const std::int64_t id[3] = {c.i, c.j, c.k};
      Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
      Vec3 hi = -lo;
      bool any = false;
      auto probe = [&](int mm, bool center) {
        bool sampled = false;
        const int total = mm * mm * mm + (center ? 1 : 0);
        for (int s = 0; s < total; ++s) {
          Vec3 p;
          for (int a = 0; a < 3; ++a) {
            const int t = s / (a == 0 ? 1 : a == 1 ? mm : mm * mm) % mm;
            const double frac = s == mm * mm * mm ? 0.5 : static_cast<double>(t) / (mm - 1);
            p[a] = root.lo[a] + (id[a] + frac) * edge(a);
          }
          if (!entry.region.contains(p)) continue;
          sampled = true;
          try {
            const auto img = flow(p);
            if (!img) continue;
            Vec3 q = *img;
            for (int a = 0; a < 3; ++a) {
              // Keep periodic images next to the box they came from.
              if (per[a]) {
                const double ref = root.lo[a] + (id[a] + 0.5) * edge(a);
                q[a] -= ext[a] * std::round((q[a] - ref) / ext[a]);
              }
            }
            lo = lo.cwiseMin(q);
            hi = hi.cwiseMax(q);
            any = true;
          } catch (const Error&) {
          }
        }
        return sampled;
      };
      // Boxes that only graze the region get a denser probe.
      if (!probe(m, true)) probe(5, false);
      if (!any) continue;
      std::int64_t a0[3], a1[3];
      bool ok = true;
      for (int a = 0; a < 3; ++a) {
        const std::int64_t n = std::int64_t{1} << lvl[a];
        a0[a] = static_cast<std::int64_t>(std::floor((lo[a] - root.lo[a]) / edge(a)));
        a1[a] = static_cast<std::int64_t>(std::floor((hi[a] - root.lo[a]) / edge(a)));
        if (!per[a]) {
          a0[a] = std::max<std::int64_t>(a0[a], 0);
          a1[a] = std::min<std::int64_t>(a1[a], n - 1);
          ok = ok && a0[a] <= a1[a];
        } else if (a1[a] - a0[a] >= n) {
          a0[a] = 0;
          a1[a] = n - 1;
        }
      }
      if (!ok) continue;
      for (std::int64_t i = a0[0]; i <= a1[0]; ++i)
        for (std::int64_t j = a0[1]; j <= a1[1]; ++j)
          for (std::int64_t k = a0[2]; k <= a1[2]; ++k) {
            std::int64_t id2[3] = {i, j, k};
            for (int a = 0; a < 3; ++a) {
              const std::int64_t n = std::int64_t{1} << lvl[a];
              if (per[a]) id2[a] = (id2[a] % n + n) % n;
            }
            const CellKey key{id2[0], id2[1], id2[2]};
            if (cells.count(key)) hits[b].push_back(key);
          }
    }
    CellSet next;
    for (const auto& h : hits) next.insert(h.begin(), h.end());
    flow_time += opts.tau;
    const bool changed = next.size() != cells.size();
    cells.swap(next);
    return changed;
  };

  // Subdivide the axis whose edge is largest relative to its target.
  for (;;) {
    int axis = -1;
    double worst = 1.0;
    for (int a = 0; a < 3; ++a) {
      if (lvl[a] >= depth[a]) continue;
      const double r = edge(a) / eps;
      if (axis < 0 || r > worst) {
        axis = a;
        worst = r;
      }
    }
    if (axis < 0) break;
    CellSet finer;
    for (const auto& c : cells) {
      CellKey a = c, b = c;
      std::int64_t* pa = axis == 0 ? &a.i : axis == 1 ? &a.j : &a.k;
      std::int64_t* pb = axis == 0 ? &b.i : axis == 1 ? &b.j : &b.k;
      *pa = 2 * *pa;
      *pb = 2 * *pb + 1;
      finer.insert(a);
      finer.insert(b);
    }
    ++lvl[axis];
    cells.swap(finer);
    select();
    if (cells.empty()) break;
  }
  while (flow_time < T && !cells.empty()) {
    if (!select()) break;
  }

  ConnectednessReport rep;
  rep.boxes = static_cast<int>(cells.size());
  rep.flow_time = flow_time;
  rep.box_edge = std::max({edge(0), edge(1), edge(2)});
  // Components of the touching-box graph (26-neighborhood, periodic wrap).
  CellSet seen;
  for (const auto& start : cells) {
    if (seen.count(start)) continue;
    ++rep.components;
    Vec3 center;
    const std::int64_t sid[3] = {start.i, start.j, start.k};
    for (int a = 0; a < 3; ++a) center[a] = root.lo[a] + (sid[a] + 0.5) * edge(a);
    rep.representatives.push_back(center);
    std::deque<CellKey> q{start};
    seen.insert(start);
    while (!q.empty()) {
      const CellKey c = q.front();
      q.pop_front();
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          for (int dk = -1; dk <= 1; ++dk) {
            std::int64_t id[3] = {c.i + di, c.j + dj, c.k + dk};
            for (int a = 0; a < 3; ++a) {
              const std::int64_t n = std::int64_t{1} << lvl[a];
              if (per[a]) id[a] = (id[a] % n + n) % n;
            }
            const CellKey nb{id[0], id[1], id[2]};
            if (cells.count(nb) && seen.insert(nb).second) q.push_back(nb);
          }
    }
  }
  rep.pass = rep.components == 1;
  return rep;
}

ConnectednessReport connectedness_check(const ZooEntry& entry, double T, double eps) {
  return connectedness_check(entry, T, eps, entry.connectivity);
}

}  // namespace singflow
