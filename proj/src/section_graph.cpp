#include "singflow/section_graph.hpp"

#include "singflow/equilibria.hpp"
#include "singflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

namespace singflow {

void LinearSaddleParams::validate() const {
  const double m = 1e-10;
  if (!(lambda2 < lambda3 - m && lambda3 < -m && -lambda3 < lambda1 - m)) {
    throw ParameterError("linear saddle needs lambda2 < lambda3 < 0 < -lambda3 < lambda1");
  }
}

std::string to_string(Side s) {
  switch (s) {
    case Side::top: return "top";
    case Side::bottom: return "bottom";
    default: return "none";
  }
}

Side side_from_string(const std::string& s) {
  if (s == "top") return Side::top;
  if (s == "bottom") return Side::bottom;
  if (s == "none") return Side::none;
  throw ParameterError("unknown side tag: " + s);
}

std::string to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::linear_passage: return "linear_passage";
    case TransitionKind::affine_reinjection: return "affine_reinjection";
    case TransitionKind::winding_map: return "winding_map";
    case TransitionKind::tube_routing: return "tube_routing";
  }
  return "?";
}

TransitionKind transition_kind_from_string(const std::string& s) {
  if (s == "linear_passage") return TransitionKind::linear_passage;
  if (s == "affine_reinjection") return TransitionKind::affine_reinjection;
  if (s == "winding_map") return TransitionKind::winding_map;
  if (s == "tube_routing") return TransitionKind::tube_routing;
  throw ParameterError("unknown transition kind: " + s);
}

PassageResult linear_passage(const LinearSaddleParams& p, const Vec3& entry) {
  p.validate();
  const double x = entry.x(), y = entry.y(), face = entry.z();
  if (std::abs(x) > 1.0 || std::abs(y) > 1.0 || std::abs(std::abs(face) - 1.0) > 1e-12) {
    throw DomainError("passage entry must lie on the z = +-1 face of the unit cube");
  }
  PassageResult r;
  r.side = face > 0 ? Side::top : Side::bottom;
  if (x == 0.0) {
    r.absorbed = true;
    r.time = std::numeric_limits<double>::infinity();
    return r;
  }
  const double ax = std::abs(x);
  r.exit = Vec3(x > 0 ? 1.0 : -1.0, y * std::pow(ax, p.beta()),
                (face > 0 ? 1.0 : -1.0) * std::pow(ax, p.alpha()));
  r.time = std::log(1.0 / ax) / p.lambda1;
  return r;
}

PiecewiseMap1D quotient_lorenz_map(double c, double alpha, bool require_expansion) {
  if (!(c > 1.0 && c <= 2.0)) throw ParameterError("quotient map needs c in (1, 2]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("quotient map needs alpha in (0, 1)");
  if (require_expansion && !(c * alpha > kExpansionFloor)) {
    throw ExpansionError("c * alpha must exceed sqrt(2) for uniform expansion");
  }
  Branch left, right;
  left.lo = -1.0;
  left.hi = 0.0;
  left.map = [c, alpha](double x) { return 1.0 - c * std::pow(-x, alpha); };
  left.derivative = [c, alpha](double x) { return c * alpha * std::pow(-x, alpha - 1.0); };
  left.inverse = [c, alpha](double y) {
    return -std::pow(std::max(0.0, (1.0 - y) / c), 1.0 / alpha);
  };
  right.lo = 0.0;
  right.hi = 1.0;
  right.map = [c, alpha](double x) { return c * std::pow(x, alpha) - 1.0; };
  right.derivative = [c, alpha](double x) { return c * alpha * std::pow(x, alpha - 1.0); };
  right.inverse = [c, alpha](double y) {
    return std::pow(std::max(0.0, (y + 1.0) / c), 1.0 / alpha);
  };
  return PiecewiseMap1D(-1.0, 1.0, {left, right}, {0.0}, 1.0);
}

namespace {

void check_winding(int N, double base) {
  if (N < 1) throw ParameterError("winding map needs at least one branch");
  if (!(base > 1.0)) throw ParameterError("winding map base must exceed 1");
  // Branch k has slope base^(k+1)/(base-1); the smallest is k = 0, the
  // remainder has slope base^N.
  const double smallest = std::min(base / (base - 1.0), std::pow(base, N));
  if (smallest < kExpansionFloor) {
    throw ExpansionError("winding map branch slope " + std::to_string(smallest) +
                         " below expansion floor sqrt(2)");
  }
}

}  // namespace

double winding_value(double v, int N, double base) {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  const double rem = std::pow(base, -N);
  if (v < rem) return v / rem;
  int k = static_cast<int>(std::floor(-std::log(v) / std::log(base)));
  k = std::clamp(k, 0, N - 1);
  double a = std::pow(base, -k - 1), b = std::pow(base, -k);
  // Guard the floor against round-off at branch endpoints.
  if (v < a && k + 1 < N) {
    ++k;
    b = a;
    a = std::pow(base, -k - 1);
  } else if (v >= b && k > 0) {
    --k;
    a = b;
    b = std::pow(base, -k);
  }
  return (v - a) / (b - a);
}

double winding_slope(double v, int N, double base) {
  const double rem = std::pow(base, -N);
  if (v < rem) return 1.0 / rem;
  int k = static_cast<int>(std::floor(-std::log(std::min(v, 1.0 - 1e-16)) / std::log(base)));
  k = std::clamp(k, 0, N - 1);
  return std::pow(base, k + 1) / (base - 1.0);
}

PiecewiseMap1D winding_map(int N, double base, double lo, double hi) {
  check_winding(N, base);
  if (!(hi > lo)) throw ParameterError("winding map needs a nondegenerate interval");
  const double len = hi - lo;
  std::vector<Branch> branches;
  auto affine_onto = [&](double a, double b) {
    Branch br;
    br.lo = lo + a * len;
    br.hi = lo + b * len;
    const double s = 1.0 / (b - a);
    const double x0 = br.lo;
    br.map = [lo, x0, s](double x) { return lo + s * (x - x0); };
    br.derivative = [s](double) { return s; };
    br.inverse = [lo, x0, s](double y) { return x0 + (y - lo) / s; };
    return br;
  };
  branches.push_back(affine_onto(0.0, std::pow(base, -N)));
  for (int k = N - 1; k >= 0; --k) {
    branches.push_back(affine_onto(std::pow(base, -k - 1), std::pow(base, -k)));
  }
  return PiecewiseMap1D(lo, hi, std::move(branches), {}, kExpansionFloor);
}

Vec3 SectionNode::embed(const Vec2& local) const {
  Vec3 p;
  p[axis] = offset;
  int j = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == axis) continue;
    p[i] = origin[j] + local[j];
    ++j;
  }
  return p;
}

bool SectionNode::contains(const Vec2& q, double slack) const {
  return q[0] >= lo[0] - slack && q[0] <= hi[0] + slack && q[1] >= lo[1] - slack &&
         q[1] <= hi[1] + slack;
}

bool TransitionMap::in_domain(const Vec2& p) const {
  return p[0] >= dom_lo[0] && p[0] <= dom_hi[0] && p[1] >= dom_lo[1] && p[1] <= dom_hi[1];
}

int SectionGraphModel::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  throw ParameterError("unknown section node: " + id);
}

int SectionGraphModel::singularity_index(const std::string& id) const {
  for (std::size_t i = 0; i < singularities.size(); ++i) {
    if (singularities[i].id == id) return static_cast<int>(i);
  }
  throw ParameterError("unknown singularity record: " + id);
}

int SectionGraphModel::piece_of_node(int node) const { return piece_of_.at(node); }

void SectionGraphModel::finalize() {
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) throw ParameterError("duplicate node id " + n.id);
    if (n.axis < 0 || n.axis > 2) throw ParameterError("node axis out of range");
    if (!(n.hi[0] > n.lo[0] && n.hi[1] > n.lo[1])) {
      throw ParameterError("node " + n.id + " has degenerate bounds");
    }
    if (n.quotient_axis < 0 || n.quotient_axis > 1) throw ParameterError("bad quotient axis");
  }
  for (const auto& s : singularities) s.params.validate();
  outgoing_.assign(nodes.size(), {});
  target_.assign(transitions.size(), -1);
  sing_.assign(transitions.size(), -1);
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const auto& tr = transitions[t];
    const int s = node_index(tr.source);
    target_[t] = node_index(tr.target);
    outgoing_[s].push_back(static_cast<int>(t));
    if (tr.kind == TransitionKind::linear_passage) {
      sing_[t] = singularity_index(tr.singularity);
      if (tr.side == Side::none) throw ParameterError("linear passage needs a side tag");
    }
    if (tr.kind == TransitionKind::winding_map) check_winding(tr.branches, tr.base);
    if (!(tr.dom_hi[0] >= tr.dom_lo[0] && tr.dom_hi[1] >= tr.dom_lo[1])) {
      throw ParameterError("transition domain is inverted");
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (outgoing_[i].empty()) throw ParameterError("node " + nodes[i].id + " has no transition");
  }
  piece_of_.assign(nodes.size(), -1);
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    std::set<int> members;
    for (const auto& id : pieces[p].nodes) members.insert(node_index(id));
    const int base = node_index(pieces[p].base);
    if (!members.count(base)) throw ParameterError("piece base must be one of its nodes");
    for (int m : members) {
      if (piece_of_[m] < 0) piece_of_[m] = static_cast<int>(p);
    }
    piece_of_[base] = static_cast<int>(p);
    // Strong connectivity of the restricted graph: every member reaches the
    // base and is reached from it.
    auto reach = [&](bool forward) {
      std::set<int> seen{base};
      std::vector<int> todo{base};
      while (!todo.empty()) {
        const int v = todo.back();
        todo.pop_back();
        for (std::size_t t = 0; t < transitions.size(); ++t) {
          const int a = node_index(transitions[t].source), b = target_[t];
          if (!members.count(a) || !members.count(b)) continue;
          const int from = forward ? a : b, to = forward ? b : a;
          if (from == v && seen.insert(to).second) todo.push_back(to);
        }
      }
      return seen;
    };
    if (reach(true) != members || reach(false) != members) {
      throw ParameterError("piece " + pieces[p].id + " is not strongly connected");
    }
  }
  finalized_ = true;
}

Hop SectionGraphModel::step(int node, const Vec2& p) const {
  Hop h;
  for (int t : outgoing_[node]) {
    const auto& tr = transitions[t];
    if (!tr.in_domain(p)) continue;
    h.transition = t;
    h.target = target_[t];
    switch (tr.kind) {
      case TransitionKind::linear_passage: {
        const auto& sp = singularities[sing_[t]].params;
        h.singularity = sing_[t];
        h.side = tr.side;
        h.passage_distance = std::abs(p[0]);
        if (p[0] == 0.0) {
          h.status = HopStatus::absorbed;
          h.time = std::numeric_limits<double>::infinity();
          return h;
        }
        const double ax = std::abs(p[0]);
        const double face = tr.side == Side::top ? 1.0 : -1.0;
        h.point = Vec2(p[1] * std::pow(ax, sp.beta()), face * std::pow(ax, sp.alpha()));
        h.time = std::log(1.0 / ax) / sp.lambda1;
        break;
      }
      case TransitionKind::affine_reinjection:
        h.point = Vec2(tr.sign * (tr.c * std::abs(p[1]) - 1.0),
                       tr.fiber_offset + tr.fiber_scale * p[0]);
        h.time = tr.time;
        break;
      case TransitionKind::winding_map:
        h.point = Vec2(tr.sign * (2.0 * winding_value(std::abs(p[1]), tr.branches, tr.base) - 1.0),
                       tr.fiber_offset + tr.fiber_scale * p[0]);
        h.time = tr.time;
        break;
      case TransitionKind::tube_routing:
        h.point = Vec2(tr.scale[0] * p[0] + tr.shift[0], tr.scale[1] * p[1] + tr.shift[1]);
        h.time = tr.time;
        break;
    }
    h.status = HopStatus::moved;
    return h;
  }
  h.status = HopStatus::stranded;
  return h;
}

int SectionGraphModel::lorenz_like_count() const {
  int n = 0;
  for (const auto& s : singularities) {
    Mat3 J = Mat3::Zero();
    J(0, 0) = s.params.lambda1;
    J(1, 1) = s.params.lambda2;
    J(2, 2) = s.params.lambda3;
    if (classify(s.location, J).kind == EquilibriumKind::lorenz_like) ++n;
  }
  return n;
}

Box SectionGraphModel::bounding_box() const {
  Box b;
  b.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  b.hi = -b.lo;
  for (const auto& n : nodes) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const Vec3 q = n.embed(Vec2(i ? n.hi[0] : n.lo[0], j ? n.hi[1] : n.lo[1]));
        b.lo = b.lo.cwiseMin(q);
        b.hi = b.hi.cwiseMax(q);
      }
    }
  }
  for (const auto& s : singularities) {
    b.lo = b.lo.cwiseMin(s.location);
    b.hi = b.hi.cwiseMax(s.location);
  }
  return b;
}

std::vector<std::string> SectionGraphModel::check_images(int m) const {
  std::vector<std::string> bad;
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const auto& tr = transitions[t];
    const int src = node_index(tr.source);
    const auto& tgt = nodes[target_[t]];
    int worst = 0;
    for (int i = 0; i < m && !worst; ++i) {
      for (int j = 0; j < m; ++j) {
        const Vec2 p(tr.dom_lo[0] + (i + 0.5) / m * (tr.dom_hi[0] - tr.dom_lo[0]),
                     tr.dom_lo[1] + (j + 0.5) / m * (tr.dom_hi[1] - tr.dom_lo[1]));
        const Hop h = step(src, p);
        if (h.transition != static_cast<int>(t)) continue;  // shadowed by an earlier domain
        if (h.status == HopStatus::moved && !tgt.contains(h.point, 1e-12)) {
          worst = 1;
          bad.push_back(to_string(tr.kind) + " " + tr.source + "->" + tr.target +
                        " leaves target at (" + std::to_string(p[0]) + ", " +
                        std::to_string(p[1]) + ")");
          break;
        }
      }
    }
  }
  return bad;
}

std::vector<std::string> SectionGraphModel::check_coverage(int m) const {
  std::vector<std::string> bad;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const auto& nd = nodes[n];
    int missing = 0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const Vec2 p(nd.lo[0] + (i + 0.5) / m * (nd.hi[0] - nd.lo[0]),
                     nd.lo[1] + (j + 0.5) / m * (nd.hi[1] - nd.lo[1]));
        bool hit = false;
        for (int t : outgoing_[n]) hit = hit || transitions[t].in_domain(p);
        if (!hit) ++missing;
      }
    }
    if (missing) bad.push_back("node " + nd.id + ": " + std::to_string(missing) + " uncovered cells");
  }
  return bad;
}

namespace {

// Branch t -> outer(|t|) on the part of [lo, hi] where t has sign s.
void add_abs_branches(std::vector<Branch>& out, double lo, double hi,
                      const PiecewiseMap1D& outer) {
  for (int s : {1, -1}) {
    const double a = s > 0 ? std::max(lo, 0.0) : lo;
    const double b = s > 0 ? hi : std::min(hi, 0.0);
    if (!(b > a)) continue;
    for (const auto& ob : outer.branches()) {
      // |t| in [ob.lo, ob.hi]  <=>  t in s * [ob.lo, ob.hi]
      double ta = s > 0 ? ob.lo : -ob.hi;
      double tb = s > 0 ? ob.hi : -ob.lo;
      ta = std::max(ta, a);
      tb = std::min(tb, b);
      if (!(tb > ta)) continue;
      Branch br;
      br.lo = ta;
      br.hi = tb;
      auto f = ob.map, d = ob.derivative;
      auto inv = std::make_shared<Branch>(ob);
      const double sd = s;
      br.map = [f](double t) { return f(std::abs(t)); };
      br.derivative = [d, sd](double t) { return sd * d(std::abs(t)); };
      br.inverse = [inv, sd](double y) { return sd * inv->preimage(y); };
      out.push_back(std::move(br));
    }
  }
}

PiecewiseMap1D affine_map(double lo, double hi, double a, double b) {
  Branch br;
  br.lo = lo;
  br.hi = hi;
  br.map = [a, b](double t) { return a * t + b; };
  br.derivative = [a](double) { return a; };
  br.inverse = [a, b](double y) { return (y - b) / a; };
  return PiecewiseMap1D(lo, hi, {br}, {}, 0.0);
}

}  // namespace

PiecewiseMap1D SectionGraphModel::transition_quotient(int t) const {
  const auto& tr = transitions[t];
  const auto& src = nodes[node_index(tr.source)];
  const int qa = src.quotient_axis;
  const double lo = std::max(src.lo[qa], tr.dom_lo[qa]);
  const double hi = std::min(src.hi[qa], tr.dom_hi[qa]);
  std::vector<Branch> branches;
  switch (tr.kind) {
    case TransitionKind::linear_passage: {
      const double alpha = singularities[sing_[t]].params.alpha();
      const double face = tr.side == Side::top ? 1.0 : -1.0;
      Branch pw;
      pw.lo = 0.0;
      pw.hi = 1.0;
      pw.map = [alpha, face](double r) { return face * std::pow(r, alpha); };
      pw.derivative = [alpha, face](double r) {
        return face * alpha * std::pow(std::max(r, 1e-300), alpha - 1.0);
      };
      pw.inverse = [alpha, face](double y) { return std::pow(std::abs(y), 1.0 / alpha); };
      add_abs_branches(branches, lo, hi, PiecewiseMap1D(0.0, 1.0, {pw}, {}, 0.0));
      break;
    }
    case TransitionKind::affine_reinjection:
      add_abs_branches(branches, lo, hi,
                       affine_map(0.0, 1.0, tr.sign * tr.c, -tr.sign));
      break;
    case TransitionKind::winding_map: {
      const PiecewiseMap1D w = winding_map(tr.branches, tr.base);
      const PiecewiseMap1D outer =
          compose(w, affine_map(0.0, 1.0, 2.0 * tr.sign, -tr.sign));
      add_abs_branches(branches, lo, hi, outer);
      break;
    }
    case TransitionKind::tube_routing: {
      if (!(hi > lo)) break;
      const PiecewiseMap1D a = affine_map(lo, hi, tr.scale[qa], tr.shift[qa]);
      branches = a.branches();
      break;
    }
  }
  return PiecewiseMap1D(src.lo[qa], src.hi[qa], std::move(branches), {}, 0.0);
}

PiecewiseMap1D SectionGraphModel::piece_quotient(int piece) const {
  const Piece& pc = pieces.at(piece);
  const int base = node_index(pc.base);
  std::set<int> members;
  for (const auto& id : pc.nodes) members.insert(node_index(id));
  const auto& bn = nodes[base];
  const int qa = bn.quotient_axis;
  std::vector<Branch> collected;
  std::function<void(int, const PiecewiseMap1D&, int)> dfs = [&](int node,
                                                                 const PiecewiseMap1D& prefix,
                                                                 int depth) {
    if (depth > 8) return;
    for (int t : outgoing_[node]) {
      const int tgt = target_[t];
      if (!members.count(tgt) || transitions[t].kind == TransitionKind::tube_routing) continue;
      PiecewiseMap1D next = compose(prefix, transition_quotient(t));
      if (next.branches().empty()) continue;
      if (tgt == base) {
        collected.insert(collected.end(), next.branches().begin(), next.branches().end());
      } else {
        dfs(tgt, next, depth + 1);
      }
    }
  };
  dfs(base, affine_map(bn.lo[qa], bn.hi[qa], 1.0, 0.0), 0);
  std::sort(collected.begin(), collected.end(),
            [](const Branch& a, const Branch& b) { return a.lo < b.lo; });
  std::vector<double> disc;
  for (std::size_t i = 1; i < collected.size(); ++i) {
    if (collected[i].lo == collected[i - 1].hi) disc.push_back(collected[i].lo);
  }
  return PiecewiseMap1D(bn.lo[qa], bn.hi[qa], std::move(collected), std::move(disc), 1.0);
}

nlohmann::ordered_json SectionGraphModel::to_json() const {
  using oj = nlohmann::ordered_json;
  oj j;
  j["label"] = label;
  j["singularities"] = oj::array();
  for (const auto& s : singularities) {
    oj e;
    e["id"] = s.id;
    e["location"] = {s.location.x(), s.location.y(), s.location.z()};
    e["lambda"] = {s.params.lambda1, s.params.lambda2, s.params.lambda3};
    j["singularities"].push_back(e);
  }
  j["nodes"] = oj::array();
  for (const auto& n : nodes) {
    oj e;
    e["id"] = n.id;
    e["axis"] = n.axis;
    e["offset"] = n.offset;
    e["origin"] = n.origin;
    e["lo"] = n.lo;
    e["hi"] = n.hi;
    e["quotient_axis"] = n.quotient_axis;
    j["nodes"].push_back(e);
  }
  j["transitions"] = oj::array();
  for (const auto& t : transitions) {
    oj e;
    e["kind"] = to_string(t.kind);
    e["source"] = t.source;
    e["target"] = t.target;
    e["side"] = to_string(t.side);
    e["domain_lo"] = t.dom_lo;
    e["domain_hi"] = t.dom_hi;
    switch (t.kind) {
      case TransitionKind::linear_passage:
        e["singularity"] = t.singularity;
        break;
      case TransitionKind::affine_reinjection:
        e["time"] = t.time;
        e["sign"] = t.sign;
        e["c"] = t.c;
        e["fiber_offset"] = t.fiber_offset;
        e["fiber_scale"] = t.fiber_scale;
        break;
      case TransitionKind::winding_map:
        e["time"] = t.time;
        e["sign"] = t.sign;
        e["branches"] = t.branches;
        e["base"] = t.base;
        e["fiber_offset"] = t.fiber_offset;
        e["fiber_scale"] = t.fiber_scale;
        break;
      case TransitionKind::tube_routing:
        e["time"] = t.time;
        e["scale"] = t.scale;
        e["shift"] = t.shift;
        break;
    }
    j["transitions"].push_back(e);
  }
  j["pieces"] = oj::array();
  for (const auto& p : pieces) {
    oj e;
    e["id"] = p.id;
    e["base"] = p.base;
    e["nodes"] = p.nodes;
    j["pieces"].push_back(e);
  }
  return j;
}

SectionGraphModel SectionGraphModel::from_json(const nlohmann::json& j) {
  SectionGraphModel m;
  try {
    m.label = j.at("label").get<std::string>();
    for (const auto& e : j.at("singularities")) {
      SingularityRecord s;
      s.id = e.at("id").get<std::string>();
      const auto loc = e.at("location").get<std::vector<double>>();
      const auto lam = e.at("lambda").get<std::vector<double>>();
      if (loc.size() != 3 || lam.size() != 3) throw ParameterError("singularity needs 3-vectors");
      s.location = Vec3(loc[0], loc[1], loc[2]);
      s.params = {lam[0], lam[1], lam[2]};
      m.singularities.push_back(s);
    }
    for (const auto& e : j.at("nodes")) {
      SectionNode n;
      n.id = e.at("id").get<std::string>();
      n.axis = e.at("axis").get<int>();
      n.offset = e.at("offset").get<double>();
      n.origin = e.value("origin", n.origin);
      n.lo = e.at("lo").get<std::array<double, 2>>();
      n.hi = e.at("hi").get<std::array<double, 2>>();
      n.quotient_axis = e.value("quotient_axis", 0);
      m.nodes.push_back(n);
    }
    for (const auto& e : j.at("transitions")) {
      TransitionMap t;
      t.kind = transition_kind_from_string(e.at("kind").get<std::string>());
      t.source = e.at("source").get<std::string>();
      t.target = e.at("target").get<std::string>();
      t.side = side_from_string(e.value("side", std::string("none")));
      t.dom_lo = e.value("domain_lo", t.dom_lo);
      t.dom_hi = e.value("domain_hi", t.dom_hi);
      t.singularity = e.value("singularity", std::string());
      t.time = e.value("time", t.time);
      t.sign = e.value("sign", t.sign);
      t.c = e.value("c", t.c);
      t.fiber_offset = e.value("fiber_offset", t.fiber_offset);
      t.fiber_scale = e.value("fiber_scale", t.fiber_scale);
      t.branches = e.value("branches", t.branches);
      t.base = e.value("base", t.base);
      t.scale = e.value("scale", t.scale);
      t.shift = e.value("shift", t.shift);
      m.transitions.push_back(t);
    }
    for (const auto& e : j.at("pieces")) {
      Piece p;
      p.id = e.at("id").get<std::string>();
      p.base = e.at("base").get<std::string>();
      p.nodes = e.at("nodes").get<std::vector<std::string>>();
      m.pieces.push_back(p);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed section-graph model: ") + ex.what());
  }
  m.finalize();
  return m;
}

ReturnMap::ReturnMap(const SectionGraphModel& model, const std::string& node_id, int max_hops)
    : model_(&model), node_(model.node_index(node_id)), max_hops_(max_hops) {
  piece_ = -1;
  for (std::size_t p = 0; p < model.pieces.size(); ++p) {
    for (const auto& id : model.pieces[p].nodes) {
      if (id == node_id && piece_ < 0) piece_ = static_cast<int>(p);
    }
  }
  if (piece_ < 0) throw ParameterError("node " + node_id + " belongs to no transitive piece");
}

ReturnResult ReturnMap::operator()(const Vec2& p0) const {
  std::set<int> members;
  for (const auto& id : model_->pieces[piece_].nodes) members.insert(model_->node_index(id));
  ReturnResult r;
  int node = node_;
  Vec2 p = p0;
  for (int hop = 0; hop < max_hops_; ++hop) {
    const Hop h = model_->step(node, p);
    if (h.status == HopStatus::stranded) {
      r.status = ReturnStatus::stranded;
      r.point = p;
      return r;
    }
    if (h.singularity >= 0) r.sides.emplace_back(h.singularity, h.side);
    if (h.status == HopStatus::absorbed) {
      r.status = ReturnStatus::absorbed;
      r.time = h.time;
      r.point = p;
      return r;
    }
    r.time += h.time;
    r.itinerary.push_back(h.target);
    node = h.target;
    p = h.point;
    if (!members.count(node)) {
      r.status = ReturnStatus::routed;
      r.routed_to = node;
      r.point = p;
      return r;
    }
    if (node == node_) {
      r.status = ReturnStatus::returned;
      r.point = p;
      return r;
    }
  }
  r.status = ReturnStatus::stranded;
  r.point = p;
  return r;
}

ReturnMap build_return_map(const SectionGraphModel& model, const std::string& node_id) {
  return ReturnMap(model, node_id);
}

}  // namespace singflow
