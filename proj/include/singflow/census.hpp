#pragma once

#include "singflow/section_graph.hpp"
#include "singflow/types.hpp"
#include "singflow/zoo.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace singflow {

inline constexpr int kObservableCount = 6;
using ObsVec = Eigen::Matrix<double, kObservableCount, 1>;

/// Names of the fixed observable set, in vector order.
const std::array<std::string, kObservableCount>& observable_names();

/// Fixed observable set x, y, z, x^2, |x||z| and distance to the nearest
/// singular point, each divided by a scale taken from the region's bounding
/// box so that tolerances are relative to the attractor size. On periodic
/// axes the coordinate is replaced by lo + L (1 - cos(2 pi (c - lo) / L)) / 2,
/// which has the same range but no jump at the seam.
class ObservableSet {
 public:
  ObservableSet() = default;
  ObservableSet(const Box& bounds, std::vector<Vec3> singular_points,
                const PeriodicMask& periodic = {false, false, false});
  static ObservableSet for_entry(const ZooEntry& entry);

  ObsVec operator()(const Vec3& p) const;
  /// Raw (unscaled) values.
  ObsVec raw(const Vec3& p) const;
  const ObsVec& scale() const { return scale_; }
  double diameter() const { return diameter_; }
  const std::vector<Vec3>& singular_points() const { return singular_; }

 private:
  ObsVec scale_ = ObsVec::Ones();
  double diameter_ = 1.0;
  std::vector<Vec3> singular_;
  Box bounds_;
  PeriodicMask periodic_{false, false, false};
};

struct CensusConfig {
  /// Zero selects the entry default.
  double horizon = 0.0;
  double burn_in = 0.0;
  /// Integrator tolerance for ODE models (zero: entry default).
  double tol = 0.0;
  /// Seed grid overrides (zero: entry default).
  int grid = 0;
  int per_node = 0;
  double gap_tol = 0.01;
  double cluster_tol = 0.05;
  /// ODE: ball radius as a fraction of the region diameter.
  /// Section graphs: passage distance |x| in the saddle's unit box.
  double radius_tol = 0.05;
  /// Minimum number of near-singularity entries for support membership.
  int min_approaches = 10;
  /// Side frequency floor for accumulation_sides.
  double side_floor = 0.01;
  std::uint64_t seed = 0x5eed5eed5eedULL;
  /// Worker threads for the seed phase (zero: OpenMP default).
  int workers = 0;
  /// Also run every seed to twice the horizon for the stability check.
  bool doubling = true;
  /// Maximum number of stored approach records per seed.
  int log_cap = 4096;

  void validate() const;
};

/// Horizon, burn-in and tolerance after applying entry defaults.
CensusConfig resolve_config(const ZooEntry& entry, const CensusConfig& cfg);

enum class SeedStatus { ok, exited, absorbed, failed };
std::string to_string(SeedStatus s);

/// One visit to the neighborhood of a singular point.
struct Approach {
  int singularity = -1;
  double distance = 0.0;
  Side side = Side::none;
};

/// Per-singularity counts over the whole run (not capped).
struct ApproachTally {
  long entries = 0;
  long top = 0;
  long bottom = 0;
};

struct BirkhoffVector {
  int index = -1;
  Vec3 seed = Vec3::Zero();
  /// Section graphs: start node and local point.
  int node = -1;
  Vec2 local = Vec2::Zero();
  SeedStatus status = SeedStatus::ok;
  double horizon = 0.0;
  ObsVec half = ObsVec::Constant(kNaN);
  ObsVec averages = ObsVec::Constant(kNaN);
  /// Averages at twice the horizon (NaN when not computed).
  ObsVec doubled = ObsVec::Constant(kNaN);
  /// L-infinity distance between the half- and full-horizon averages.
  double gap = kNaN;
  /// Same between the full and doubled horizons.
  double gap_doubled = kNaN;
  std::vector<Approach> approaches;
  std::vector<ApproachTally> tallies;
  /// Section graphs: piece of the last base visit; -1 for ODE models.
  int piece = -1;
};

/// Time averages of the observable set along the orbit of one seed.
/// ODE: Simpson quadrature per accepted step after burn_in time units.
/// Section graphs: averages over visits to piece bases after burn_in visits,
/// weighted by the time to the next base visit.
BirkhoffVector birkhoff(const ZooEntry& entry, const Vec3& seed, const ObservableSet& obs,
                        const CensusConfig& cfg);
BirkhoffVector birkhoff_section(const ZooEntry& entry, int node, const Vec2& local,
                                const ObservableSet& obs, const CensusConfig& cfg);

struct SeedPoint {
  Vec3 point = Vec3::Zero();
  int node = -1;
  Vec2 local = Vec2::Zero();
};
/// Jittered cell-center grid, deterministic in cfg.seed.
std::vector<SeedPoint> census_seeds(const ZooEntry& entry, const CensusConfig& cfg);

struct ClusterSupport {
  std::vector<bool> contains;          // per singular point
  std::vector<std::vector<Side>> sides;  // per singular point
  std::vector<long> entries;
  std::vector<long> top;
  std::vector<long> bottom;
  bool singular() const;
};

struct Cluster {
  ObsVec centroid = ObsVec::Zero();
  ObsVec centroid_doubled = ObsVec::Constant(kNaN);
  double fraction = 0.0;
  std::vector<int> members;  // indices into MeasureCensus::vectors
  ClusterSupport support;
  /// Piece holding most members (section graphs), else -1.
  int piece = -1;
};

struct MeasureCensus {
  std::string label;
  int s = 0;
  int s_L = 0;
  std::vector<Cluster> clusters;
  double discard_fraction = 0.0;
  int seeds = 0;
  int exited = 0;
  CensusConfig config;
  std::vector<BirkhoffVector> vectors;
  /// Cluster of each vector, -1 when discarded.
  std::vector<int> labels;
  std::vector<Vec3> singular_points;
  std::vector<std::string> singular_ids;
  /// Cluster count from the doubled-horizon averages (-1 when not run).
  int s_doubled = -1;
  /// Largest centroid shift between horizons among matched clusters.
  double centroid_drift = kNaN;
  double seconds = 0.0;

  int singular_clusters() const;
  /// Count unchanged and drift below cluster_tol / 2.
  bool stable() const;
};

/// Seed phase in parallel, clustering serially.
MeasureCensus census(const ZooEntry& entry, const CensusConfig& cfg = {});
/// Single-threaded reference with identical results.
MeasureCensus census_serial(const ZooEntry& entry, const CensusConfig& cfg = {});

/// Single-linkage clusters (L-infinity, linking radius tol) of the points;
/// returns a label per point, clusters numbered by first appearance.
std::vector<int> single_linkage(const std::vector<ObsVec>& points, double tol);

bool support_contains_singularity(const MeasureCensus& c, int cluster, int singularity);
std::vector<Side> accumulation_sides(const MeasureCensus& c, int cluster, int singularity);

/// Top Lyapunov exponent of an ODE orbit: Benettin growth of one tangent
/// vector, projected off the flow direction at every renormalization (unit
/// interval) so the neutral flow exponent does not mask transverse
/// contraction. The first tenth of the horizon is treated as transient.
double lyapunov_top(const Field3& field, const Vec3& seed, double horizon, double tol = 1e-9);
/// Section graphs: mean log|f'| of the piece quotient along the quotient
/// orbit of x after a short transient.
double lyapunov_top(const SectionGraphModel& model, int piece, double x, long iterates);

struct SectionalEstimate {
  double K = kNaN;
  double theta = kNaN;
  double residual = kNaN;
  bool inconclusive = false;
};
/// Fit of log-area growth of a 2-frame to log K + theta t.
SectionalEstimate sectional_expansion_estimate(const Field3& field, const Vec3& seed,
                                               const Eigen::Matrix<double, 3, 2>& frame,
                                               double horizon, double tol = 1e-9);

enum class Verdict { ok, violation };
std::string to_string(Verdict v);
/// Bound s <= 2 s_L on singular clusters; vacuous when s_L = 0.
Verdict check_bound(int s_singular, int s_L);
Verdict check_bound(const MeasureCensus& c, int s_L);

nlohmann::ordered_json to_json(const MeasureCensus& c);
/// One row per Birkhoff vector.
void write_vectors_csv(std::ostream& out, const MeasureCensus& c);

}  // namespace singflow
