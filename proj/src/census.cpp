#include "singflow/census.hpp"

#include "singflow/equilibria.hpp"
#include "singflow/errors.hpp"
#include "singflow/integrator.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

namespace singflow {

const std::array<std::string, kObservableCount>& observable_names() {
  static const std::array<std::string, kObservableCount> names{"x", "y", "z", "x2", "absxz",
                                                               "dist"};
  return names;
}

ObservableSet::ObservableSet(const Box& bounds, std::vector<Vec3> singular_points,
                             const PeriodicMask& periodic)
    : singular_(std::move(singular_points)), bounds_(bounds), periodic_(periodic) {
  const Vec3 ext = bounds.extent();
  const double mx = std::max(std::abs(bounds.lo.x()), std::abs(bounds.hi.x()));
  const double mz = std::max(std::abs(bounds.lo.z()), std::abs(bounds.hi.z()));
  diameter_ = bounds.diameter();
  scale_ << ext.x(), ext.y(), ext.z(), mx * mx, mx * mz, diameter_;
  for (int i = 0; i < kObservableCount; ++i) {
    if (!(scale_[i] > 0.0)) scale_[i] = 1.0;
  }
}

ObservableSet ObservableSet::for_entry(const ZooEntry& entry) {
  return ObservableSet(entry.region.bounds(), entry.singular_points(), entry.region.periodic);
}

ObsVec ObservableSet::raw(const Vec3& q) const {
  Vec3 p = q;
  for (int a = 0; a < 3; ++a) {
    if (!periodic_[a]) continue;
    const double L = bounds_.hi[a] - bounds_.lo[a];
    p[a] = bounds_.lo[a] + 0.5 * L * (1.0 - std::cos(2.0 * std::numbers::pi * (q[a] - bounds_.lo[a]) / L));
  }
  double d = 0.0;
  if (!singular_.empty()) {
    d = std::numeric_limits<double>::infinity();
    for (const auto& s : singular_) d = std::min(d, (p - s).norm());
  }
  ObsVec v;
  v << p.x(), p.y(), p.z(), p.x() * p.x(), std::abs(p.x()) * std::abs(p.z()), d;
  return v;
}

ObsVec ObservableSet::operator()(const Vec3& p) const { return raw(p).cwiseQuotient(scale_); }

void CensusConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(horizon, "horizon");
  positive(gap_tol, "gap_tol");
  positive(cluster_tol, "cluster_tol");
  positive(radius_tol, "radius_tol");
  if (!(burn_in >= 0.0)) throw ConfigError("burn_in must be non-negative");
  if (!(horizon > burn_in)) throw ConfigError("horizon must exceed burn_in");
  if (horizon < 10.0 * burn_in) throw ConfigError("horizon must be at least 10 x burn_in");
  if (grid < 1 || per_node < 1) throw ConfigError("seed grid must be positive");
  if (workers < 0) throw ConfigError("workers must be non-negative");
  if (!(side_floor >= 0.0 && side_floor < 1.0)) throw ConfigError("side_floor must be in [0, 1)");
  if (min_approaches < 1 || log_cap < 0) throw ConfigError("bad approach settings");
}

CensusConfig resolve_config(const ZooEntry& entry, const CensusConfig& cfg) {
  CensusConfig r = cfg;
  if (r.horizon == 0.0) r.horizon = entry.defaults.horizon;
  if (r.burn_in == 0.0) r.burn_in = std::min(entry.defaults.burn_in, r.horizon / 10.0);
  if (r.tol == 0.0) r.tol = entry.defaults.tol > 0.0 ? entry.defaults.tol : 1e-7;
  if (r.grid == 0) r.grid = entry.seeds.grid;
  if (r.per_node == 0) r.per_node = entry.seeds.per_node;
  r.validate();
  return r;
}

std::string to_string(SeedStatus s) {
  switch (s) {
    case SeedStatus::ok: return "ok";
    case SeedStatus::exited: return "exited";
    case SeedStatus::absorbed: return "absorbed";
    case SeedStatus::failed: return "failed";
  }
  return "?";
}

namespace {

constexpr double kQuadratureStep = 0.05;

double linf(const ObsVec& a, const ObsVec& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Coordinates in the eigenframe (e_u, e_s, e_ss) of a Lorenz-like
// equilibrium; the sign of the weak-stable coefficient gives the side.
struct SideFrame {
  bool valid = false;
  Mat3 inverse = Mat3::Identity();
};

std::vector<SideFrame> side_frames(const ZooEntry& entry) {
  std::vector<SideFrame> out;
  for (const auto& e : entry.equilibria) {
    SideFrame f;
    if (e.kind == EquilibriumKind::lorenz_like) {
      const Mat3 j = entry.field->jac(e.location);
      Mat3 v;
      v.col(0) = real_eigenvector(j, e.lambda_u);
      v.col(1) = real_eigenvector(j, e.lambda_s);
      v.col(2) = real_eigenvector(j, e.lambda_ss);
      const Eigen::FullPivLU<Mat3> lu(v);
      if (lu.isInvertible()) {
        f.valid = true;
        f.inverse = lu.inverse();
      }
    }
    out.push_back(f);
  }
  return out;
}

// Tracks entries into the radius balls around singular points.
class ApproachTracker {
 public:
  ApproachTracker(const std::vector<Vec3>& pts, std::vector<SideFrame> frames, double radius,
                  int cap, BirkhoffVector& out)
      : pts_(pts), frames_(std::move(frames)), radius_(radius), cap_(cap), out_(out),
        inside_(pts.size(), false), best_(pts.size(), 0.0), side_(pts.size(), Side::none) {
    out_.tallies.assign(pts.size(), {});
  }

  void observe(const Vec3& p) {
    for (std::size_t j = 0; j < pts_.size(); ++j) {
      const Vec3 d = p - pts_[j];
      const double r = d.norm();
      if (r < radius_) {
        if (!inside_[j] || r < best_[j]) {
          best_[j] = r;
          side_[j] = side_of(j, d);
        }
        inside_[j] = true;
      } else if (inside_[j]) {
        close(j);
      }
    }
  }

  void finish() {
    for (std::size_t j = 0; j < pts_.size(); ++j) {
      if (inside_[j]) close(j);
    }
  }

 private:
  Side side_of(std::size_t j, const Vec3& d) const {
    if (j >= frames_.size() || !frames_[j].valid) return Side::none;
    const double c = (frames_[j].inverse * d)[1];
    return c > 0.0 ? Side::top : c < 0.0 ? Side::bottom : Side::none;
  }

  void close(std::size_t j) {
    inside_[j] = false;
    auto& t = out_.tallies[j];
    ++t.entries;
    if (side_[j] == Side::top) ++t.top;
    if (side_[j] == Side::bottom) ++t.bottom;
    if (static_cast<int>(out_.approaches.size()) < cap_) {
      out_.approaches.push_back({static_cast<int>(j), best_[j], side_[j]});
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<SideFrame> frames_;
  double radius_;
  int cap_;
  BirkhoffVector& out_;
  std::vector<bool> inside_;
  std::vector<double> best_;
  std::vector<Side> side_;
};

}  // namespace

BirkhoffVector birkhoff(const ZooEntry& entry, const Vec3& seed, const ObservableSet& obs,
                        const CensusConfig& cfg) {
  if (entry.kind != ModelKind::ode) throw ParameterError("birkhoff(seed) needs an ODE entry");
  const Field3& f = *entry.field;
  BirkhoffVector bv;
  bv.seed = seed;
  bv.horizon = cfg.horizon;
  if (!entry.region.contains(seed)) {
    bv.status = SeedStatus::exited;
    return bv;
  }
  auto psi = [&](const Vec3& p) { return obs(f.wrap(p)); };

  // Seeds at an equilibrium carry the Dirac measure there.
  if (f.eval(seed).norm() == 0.0) {
    bv.half = bv.averages = psi(seed);
    if (cfg.doubling) bv.doubled = bv.averages;
    bv.gap = 0.0;
    bv.gap_doubled = cfg.doubling ? 0.0 : kNaN;
    bv.tallies.assign(obs.singular_points().size(), {});
    return bv;
  }

  ApproachTracker tracker(obs.singular_points(), side_frames(entry),
                          cfg.radius_tol * obs.diameter(), cfg.log_cap, bv);
  using DP = DormandPrince<3>;
  DP dp([&f](const Vec3& y) { return f.eval(y); }, cfg.tol, 0.0, seed);
  const double t0 = cfg.burn_in;
  const std::vector<double> marks = cfg.doubling
                                        ? std::vector<double>{t0 + 0.5 * cfg.horizon,
                                                              t0 + cfg.horizon,
                                                              t0 + 2.0 * cfg.horizon}
                                        : std::vector<double>{t0 + 0.5 * cfg.horizon,
                                                              t0 + cfg.horizon};
  ObsVec acc = ObsVec::Zero();
  ObsVec prev = psi(seed);
  std::size_t next = 0;
  try {
    while (dp.time() < t0) {
      dp.advance(t0, 1e-12);
      if (!entry.region.contains(dp.state())) {
        bv.status = SeedStatus::exited;
        return bv;
      }
    }
    prev = psi(dp.state());
    while (next < marks.size()) {
      // Cap the step so Simpson resolves the observables, not just the state.
      const auto st = dp.advance(std::min(marks[next], dp.time() + kQuadratureStep), 1e-12);
      if (!entry.region.contains(st.y1)) {
        bv.status = SeedStatus::exited;
        return bv;
      }
      const double h = st.t1 - st.t0;
      const ObsVec end = psi(st.y1);
      acc += (h / 6.0) * (prev + 4.0 * psi(st.dense(st.t0 + 0.5 * h)) + end);
      prev = end;
      tracker.observe(st.y1);
      if (dp.time() >= marks[next]) {
        const ObsVec avg = acc / (dp.time() - t0);
        if (next == 0) bv.half = avg;
        if (next == 1) bv.averages = avg;
        if (next == 2) bv.doubled = avg;
        ++next;
      }
    }
  } catch (const Error&) {
    bv.status = SeedStatus::failed;
    return bv;
  }
  tracker.finish();
  bv.gap = linf(bv.half, bv.averages);
  if (cfg.doubling) bv.gap_doubled = linf(bv.averages, bv.doubled);
  return bv;
}

BirkhoffVector birkhoff_section(const ZooEntry& entry, int node, const Vec2& local,
                                const ObservableSet& obs, const CensusConfig& cfg) {
  if (entry.kind != ModelKind::section_graph) {
    throw ParameterError("birkhoff_section needs a section-graph entry");
  }
  const SectionGraphModel& g = *entry.graph;
  BirkhoffVector bv;
  bv.node = node;
  bv.local = local;
  bv.seed = g.nodes[node].embed(local);
  bv.horizon = cfg.horizon;
  bv.tallies.assign(g.singularities.size(), {});

  std::vector<char> base(g.nodes.size(), 0);
  for (const auto& pc : g.pieces) base[g.node_index(pc.base)] = 1;
  auto is_base = [&base](int n) { return base[n] != 0; };
  const long burn = std::lround(cfg.burn_in);
  const long H = std::max(2L, std::lround(cfg.horizon));
  std::vector<long> marks{burn + H / 2, burn + H};
  if (cfg.doubling) marks.push_back(burn + 2 * H);

  int cur = node;
  Vec2 p = local;
  // Visits are counted at base nodes; the seed itself starts on a base.
  long visits = is_base(cur) ? 1 : 0;
  Vec3 last = bv.seed;
  double pending = 0.0;
  ObsVec acc = ObsVec::Zero();
  double wsum = 0.0;
  std::size_t next = 0;
  long since_base = 0;
  while (next < marks.size()) {
    const Hop h = g.step(cur, p);
    if (h.status == HopStatus::stranded) {
      bv.status = SeedStatus::failed;
      return bv;
    }
    if (h.status == HopStatus::absorbed) {
      // The orbit ends on a stable manifold: Dirac measure at the singularity.
      bv.status = SeedStatus::absorbed;
      const ObsVec d = obs(g.singularities[h.singularity].location);
      bv.half = bv.averages = d;
      if (cfg.doubling) bv.doubled = d;
      bv.gap = 0.0;
      bv.gap_doubled = cfg.doubling ? 0.0 : kNaN;
      bv.piece = g.piece_of_node(cur);
      return bv;
    }
    const bool counting = visits > burn;
    if (h.singularity >= 0 && counting && h.passage_distance < cfg.radius_tol) {
      auto& t = bv.tallies[h.singularity];
      ++t.entries;
      if (h.side == Side::top) ++t.top;
      if (h.side == Side::bottom) ++t.bottom;
      if (static_cast<int>(bv.approaches.size()) < cfg.log_cap) {
        bv.approaches.push_back({h.singularity, h.passage_distance, h.side});
      }
    }
    pending += h.time;
    cur = h.target;
    p = h.point;
    if (!is_base(cur)) {
      if (++since_base > 100000) {
        bv.status = SeedStatus::failed;
        return bv;
      }
      continue;
    }
    since_base = 0;
    if (counting) {
      acc += pending * obs(last);
      wsum += pending;
    }
    ++visits;
    pending = 0.0;
    last = g.nodes[cur].embed(p);
    bv.piece = g.piece_of_node(cur);
    if (visits - 1 == marks[next]) {
      const ObsVec avg = acc / wsum;
      if (next == 0) bv.half = avg;
      if (next == 1) bv.averages = avg;
      if (next == 2) bv.doubled = avg;
      ++next;
    }
  }
  bv.gap = linf(bv.half, bv.averages);
  if (cfg.doubling) bv.gap_doubled = linf(bv.averages, bv.doubled);
  return bv;
}

std::vector<SeedPoint> census_seeds(const ZooEntry& entry, const CensusConfig& cfg) {
  std::vector<SeedPoint> seeds;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (entry.kind == ModelKind::ode) {
    const Box b = entry.region.bounds();
    const Vec3 h = b.extent() / cfg.grid;
    for (int i = 0; i < cfg.grid; ++i)
      for (int j = 0; j < cfg.grid; ++j)
        for (int k = 0; k < cfg.grid; ++k) {
          Vec3 p;
          p << b.lo.x() + (i + u01(rng)) * h.x(), b.lo.y() + (j + u01(rng)) * h.y(),
              b.lo.z() + (k + u01(rng)) * h.z();
          if (entry.region.contains(p)) seeds.push_back({p, -1, Vec2::Zero()});
        }
    return seeds;
  }
  const SectionGraphModel& g = *entry.graph;
  const int m = cfg.per_node;
  for (const auto& piece : g.pieces) {
    const int n = g.node_index(piece.base);
    const SectionNode& node = g.nodes[n];
    const double hu = (node.hi[0] - node.lo[0]) / m, hv = (node.hi[1] - node.lo[1]) / m;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const Vec2 loc(node.lo[0] + (i + u01(rng)) * hu, node.lo[1] + (j + u01(rng)) * hv);
        seeds.push_back({node.embed(loc), n, loc});
      }
  }
  return seeds;
}

bool ClusterSupport::singular() const {
  return std::any_of(contains.begin(), contains.end(), [](bool b) { return b; });
}

int MeasureCensus::singular_clusters() const {
  return static_cast<int>(std::count_if(clusters.begin(), clusters.end(),
                                        [](const Cluster& c) { return c.support.singular(); }));
}

bool MeasureCensus::stable() const {
  return s_doubled == s && std::isfinite(centroid_drift) &&
         centroid_drift < 0.5 * config.cluster_tol;
}

std::vector<int> single_linkage(const std::vector<ObsVec>& points, double tol) {
  const std::size_t n = points.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (linf(points[a], points[b]) <= tol) {
        const std::size_t ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::vector<int> labels(n, -1);
  std::map<std::size_t, int> ids;
  for (std::size_t a = 0; a < n; ++a) {
    const auto r = find(a);
    auto it = ids.find(r);
    if (it == ids.end()) it = ids.emplace(r, static_cast<int>(ids.size())).first;
    labels[a] = it->second;
  }
  return labels;
}

namespace {

MeasureCensus run_census(const ZooEntry& entry, const CensusConfig& user, bool parallel) {
  const auto start = std::chrono::steady_clock::now();
  const CensusConfig cfg = resolve_config(entry, user);
  const ObservableSet obs = ObservableSet::for_entry(entry);
  const auto seeds = census_seeds(entry, cfg);

  MeasureCensus mc;
  mc.label = entry.label;
  mc.s_L = entry.s_L();
  mc.config = cfg;
  mc.seeds = static_cast<int>(seeds.size());
  mc.singular_points = obs.singular_points();
  if (entry.kind == ModelKind::section_graph) {
    for (const auto& s : entry.graph->singularities) mc.singular_ids.push_back(s.id);
  } else {
    for (std::size_t i = 0; i < entry.equilibria.size(); ++i) {
      mc.singular_ids.push_back("eq" + std::to_string(i) + "_" +
                                to_string(entry.equilibria[i].kind));
    }
  }
  if (seeds.empty()) throw CensusUnreliable(entry.label + ": no seeds in the region");

  mc.vectors.resize(seeds.size());
  auto one = [&](std::size_t i) {
    BirkhoffVector bv;
    try {
      bv = entry.kind == ModelKind::ode
               ? birkhoff(entry, seeds[i].point, obs, cfg)
               : birkhoff_section(entry, seeds[i].node, seeds[i].local, obs, cfg);
    } catch (const Error&) {
      bv.status = SeedStatus::failed;
      bv.seed = seeds[i].point;
    }
    bv.index = static_cast<int>(i);
    mc.vectors[i] = std::move(bv);
  };
  const long n = static_cast<long>(seeds.size());
  if (parallel) {
    const int workers = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  }

  std::vector<int> kept;
  for (std::size_t i = 0; i < mc.vectors.size(); ++i) {
    const auto& v = mc.vectors[i];
    if (v.status == SeedStatus::exited) ++mc.exited;
    const bool usable = v.status == SeedStatus::ok || v.status == SeedStatus::absorbed;
    if (usable && std::isfinite(v.gap) && v.gap <= cfg.gap_tol) kept.push_back(static_cast<int>(i));
  }
  mc.discard_fraction = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(n);
  if (mc.discard_fraction > 0.5) {
    throw CensusUnreliable(entry.label + ": discard fraction " +
                           std::to_string(mc.discard_fraction) + " exceeds 0.5; raise the horizon");
  }

  std::vector<ObsVec> pts;
  for (int i : kept) pts.push_back(mc.vectors[i].averages);
  const auto labels = single_linkage(pts, cfg.cluster_tol);
  const int s = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  mc.s = s;
  mc.clusters.resize(s);
  mc.labels.assign(mc.vectors.size(), -1);
  for (std::size_t a = 0; a < kept.size(); ++a) {
    mc.clusters[labels[a]].members.push_back(kept[a]);
    mc.labels[kept[a]] = labels[a];
  }

  const std::size_t ns = mc.singular_points.size();
  const int npieces = entry.kind == ModelKind::section_graph
                          ? static_cast<int>(entry.graph->pieces.size())
                          : 0;
  for (auto& c : mc.clusters) {
    c.fraction = static_cast<double>(c.members.size()) / static_cast<double>(n);
    c.centroid.setZero();
    for (int i : c.members) c.centroid += mc.vectors[i].averages;
    c.centroid /= static_cast<double>(c.members.size());
    auto& sup = c.support;
    sup.contains.assign(ns, false);
    sup.sides.assign(ns, {});
    sup.entries.assign(ns, 0);
    sup.top.assign(ns, 0);
    sup.bottom.assign(ns, 0);
    for (std::size_t j = 0; j < ns; ++j) {
      std::size_t frequent = 0;
      for (int i : c.members) {
        const auto& v = mc.vectors[i];
        if (j >= v.tallies.size()) continue;
        const auto& t = v.tallies[j];
        sup.entries[j] += t.entries;
        sup.top[j] += t.top;
        sup.bottom[j] += t.bottom;
        if (t.entries >= cfg.min_approaches) ++frequent;
      }
      // Most members must return to the ball repeatedly; transients and
      // Dirac members do not count.
      sup.contains[j] = 2 * frequent > c.members.size();
      const double sided = static_cast<double>(sup.top[j] + sup.bottom[j]);
      if (sup.contains[j] && sided > 0.0) {
        if (sup.top[j] / sided > cfg.side_floor) sup.sides[j].push_back(Side::top);
        if (sup.bottom[j] / sided > cfg.side_floor) sup.sides[j].push_back(Side::bottom);
      }
    }
    if (npieces > 0) {
      std::vector<int> votes(npieces, 0);
      for (int i : c.members) {
        if (mc.vectors[i].piece >= 0) ++votes[mc.vectors[i].piece];
      }
      c.piece = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  }

  if (cfg.doubling && !kept.empty()) {
    std::vector<ObsVec> dbl;
    bool finite = true;
    for (int i : kept) {
      dbl.push_back(mc.vectors[i].doubled);
      finite = finite && mc.vectors[i].doubled.allFinite();
    }
    if (finite) {
      const auto l2 = single_linkage(dbl, cfg.cluster_tol);
      mc.s_doubled = *std::max_element(l2.begin(), l2.end()) + 1;
      double drift = 0.0;
      for (auto& c : mc.clusters) {
        c.centroid_doubled.setZero();
        for (int i : c.members) c.centroid_doubled += mc.vectors[i].doubled;
        c.centroid_doubled /= static_cast<double>(c.members.size());
        drift = std::max(drift, linf(c.centroid, c.centroid_doubled));
      }
      mc.centroid_drift = drift;
    }
  }
  mc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return mc;
}

}  // namespace

MeasureCensus census(const ZooEntry& entry, const CensusConfig& cfg) {
  return run_census(entry, cfg, true);
}

MeasureCensus census_serial(const ZooEntry& entry, const CensusConfig& cfg) {
  return run_census(entry, cfg, false);
}

bool support_contains_singularity(const MeasureCensus& c, int cluster, int singularity) {
  return c.clusters.at(cluster).support.contains.at(singularity);
}

std::vector<Side> accumulation_sides(const MeasureCensus& c, int cluster, int singularity) {
  return c.clusters.at(cluster).support.sides.at(singularity);
}

double lyapunov_top(const Field3& field, const Vec3& seed, double horizon, double tol) {
  if (!(horizon >= 2.0)) throw ParameterError("lyapunov_top needs a horizon of at least 2");
  validate_tolerance(tol);
  using DP = DormandPrince<6>;
  using S6 = DP::State;
  auto rhs = [&field](const S6& s) {
    const Vec3 x = s.head<3>();
    S6 d;
    d.head<3>() = field.eval(x);
    d.tail<3>() = field.jac(x) * s.tail<3>();
    return d;
  };
  auto project = [&field](const Vec3& x, Vec3 v) {
    const Vec3 fx = field.eval(x);
    const double n = fx.norm();
    if (n > 1e-12) v -= v.dot(fx / n) * (fx / n);
    return v;
  };
  Vec3 v0 = project(seed, Vec3(1.0, 1.0, 1.0).normalized());
  if (v0.norm() < 1e-8) v0 = project(seed, Vec3(1.0, -2.0, 0.5).normalized());
  S6 s;
  s << seed, v0.normalized();
  DP dp(rhs, tol, 0.0, s);
  const int intervals = static_cast<int>(std::floor(horizon));
  const int skip = std::max(1, intervals / 10);
  double sum = 0.0;
  int counted = 0;
  for (int k = 1; k <= intervals; ++k) {
    while (dp.time() < k) dp.advance(k, 1e-14);
    S6 y = dp.state();
    const Vec3 x = y.head<3>();
    const Vec3 v = project(x, y.tail<3>());
    const double g = v.norm();
    if (!std::isfinite(g) || g == 0.0) throw NumericError("non-finite tangent growth");
    if (k > skip) {
      sum += std::log(g);
      ++counted;
    }
    y.tail<3>() = v / g;
    dp.reset_state(y);
  }
  return sum / counted;
}

double lyapunov_top(const SectionGraphModel& model, int piece, double x, long iterates) {
  const PiecewiseMap1D f = model.piece_quotient(piece);
  const long transient = std::max(100L, iterates / 100);
  double sum = 0.0;
  long counted = 0;
  std::mt19937_64 rng(0x1ee7);
  std::uniform_real_distribution<double> nudge(-1e-9, 1e-9);
  for (long k = 0; k < transient + iterates; ++k) {
    auto y = f.try_eval(x);
    if (!y) {
      x += nudge(rng);
      continue;
    }
    if (k >= transient) {
      sum += std::log(std::abs(f.derivative(x)));
      ++counted;
    }
    x = *y;
  }
  if (counted == 0) throw NumericError("quotient orbit never left the discontinuities");
  return sum / counted;
}

SectionalEstimate sectional_expansion_estimate(const Field3& field, const Vec3& seed,
                                               const Eigen::Matrix<double, 3, 2>& frame,
                                               double horizon, double tol) {
  const Eigen::MatrixXd fr = frame;
  const TangentResult tr = integrate_with_tangent(field, seed, fr, horizon, tol, 1.0);
  const std::size_t m = tr.log_growth.size();
  if (m < 2) throw ParameterError("sectional estimate needs at least two intervals");
  // Cumulative log area at the renormalization times, starting from (0, 0).
  std::vector<double> t{0.0}, L{0.0};
  for (std::size_t k = 0; k < m; ++k) {
    t.push_back(tr.renorm_times[k]);
    L.push_back(L.back() + tr.log_growth[k]);
  }
  const double nt = static_cast<double>(t.size());
  const double mt = std::accumulate(t.begin(), t.end(), 0.0) / nt;
  const double mL = std::accumulate(L.begin(), L.end(), 0.0) / nt;
  double stt = 0.0, stl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - mt) * (t[k] - mt);
    stl += (t[k] - mt) * (L[k] - mL);
  }
  SectionalEstimate e;
  e.theta = stl / stt;
  const double logK = mL - e.theta * mt;
  e.K = std::exp(logK);
  double ss = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = L[k] - (logK + e.theta * t[k]);
    ss += r * r;
  }
  e.residual = std::sqrt(ss / nt);
  const auto [lo, hi] = std::minmax_element(L.begin(), L.end());
  e.inconclusive = e.residual > 0.1 * (*hi - *lo);
  return e;
}

std::string to_string(Verdict v) { return v == Verdict::ok ? "ok" : "violation"; }

Verdict check_bound(int s_singular, int s_L) {
  if (s_L == 0) return Verdict::ok;
  return s_singular <= 2 * s_L ? Verdict::ok : Verdict::violation;
}

Verdict check_bound(const MeasureCensus& c, int s_L) {
  return check_bound(c.singular_clusters(), s_L);
}

nlohmann::ordered_json to_json(const MeasureCensus& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = 1;
  j["label"] = c.label;
  j["seed"] = c.config.seed;
  j["config"] = {{"horizon", c.config.horizon},     {"burn_in", c.config.burn_in},
                 {"tol", c.config.tol},             {"grid", c.config.grid},
                 {"per_node", c.config.per_node},   {"gap_tol", c.config.gap_tol},
                 {"cluster_tol", c.config.cluster_tol}, {"radius_tol", c.config.radius_tol}};
  j["observables"] = observable_names();
  j["singularities"] = c.singular_ids;
  j["s"] = c.s;
  j["s_L"] = c.s_L;
  j["s_singular"] = c.singular_clusters();
  ordered_json cl = ordered_json::array();
  for (const auto& k : c.clusters) {
    ordered_json o;
    o["centroid"] = std::vector<double>(k.centroid.data(), k.centroid.data() + kObservableCount);
    o["fraction"] = k.fraction;
    o["members"] = k.members.size();
    o["contains"] = k.support.contains;
    ordered_json sides = ordered_json::array();
    for (const auto& sv : k.support.sides) {
      ordered_json a = ordered_json::array();
      for (Side s : sv) a.push_back(to_string(s));
      sides.push_back(a);
    }
    o["sides"] = sides;
    o["approaches"] = k.support.entries;
    if (k.piece >= 0) o["piece"] = k.piece;
    cl.push_back(o);
  }
  j["clusters"] = cl;
  j["seeds"] = c.seeds;
  j["exited"] = c.exited;
  j["discard_fraction"] = c.discard_fraction;
  j["s_doubled"] = c.s_doubled;
  j["centroid_drift"] = std::isfinite(c.centroid_drift) ? ordered_json(c.centroid_drift)
                                                        : ordered_json(nullptr);
  j["stable"] = c.stable();
  j["verdict"] = to_string(check_bound(c, c.s_L));
  return j;
}

void write_vectors_csv(std::ostream& out, const MeasureCensus& c) {
  out << "index,node,seed_x,seed_y,seed_z,status,cluster,piece,gap,gap_doubled";
  for (const auto& n : observable_names()) out << ",avg_" << n;
  out << '\n';
  out.precision(12);
  for (std::size_t i = 0; i < c.vectors.size(); ++i) {
    const auto& v = c.vectors[i];
    out << v.index << ',' << v.node << ',' << v.seed.x() << ',' << v.seed.y() << ','
        << v.seed.z() << ',' << to_string(v.status) << ','
        << (i < c.labels.size() ? c.labels[i] : -1) << ',' << v.piece << ',' << v.gap << ','
        << v.gap_doubled;
    for (int k = 0; k < kObservableCount; ++k) out << ',' << v.averages[k];
    out << '\n';
  }
}

}  // namespace singflow
