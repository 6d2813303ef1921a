#pragma once

#include "singflow/equilibria.hpp"
#include "singflow/field.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace singflow {

/// One convex piece of a trapping region.
struct RegionPart {
  enum class Shape { box, sphere };
  Shape shape = Shape::box;
  Box box;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  static RegionPart make_box(const Box& b);
  static RegionPart make_sphere(const Vec3& c, double r);
  bool contains(const Vec3& p) const;
  Box bounds() const;
};

/// Union of boxes and balls; periodic axes of box parts have no boundary.
struct TrappingRegion {
  std::vector<RegionPart> parts;
  PeriodicMask periodic{false, false, false};

  bool contains(const Vec3& p) const;
  Box bounds() const;

  struct BoundarySample {
    Vec3 point;
    Vec3 normal;  // outward unit normal
  };
  /// About n deterministic samples of the region boundary; points interior
  /// to another part are skipped.
  std::vector<BoundarySample> boundary_samples(int n) const;
  nlohmann::ordered_json to_json() const;
};

enum class ModelKind { ode, section_graph };
std::string to_string(ModelKind k);

struct SeedSpec {
  /// ODE: grid^3 cell centers over the region's bounding box.
  int grid = 20;
  /// Section graphs: per_node^2 cell centers on each piece base.
  int per_node = 16;
};

struct CensusDefaults {
  double horizon = 0.0;
  double burn_in = 0.0;
  /// Integrator tolerance for ODE censuses.
  double tol = 1e-7;
};

struct ConnectednessOptions {
  /// Flow time of one box-map application.
  double tau = 0.1;
  /// Test points per axis in each box.
  int points_per_axis = 2;
  double tol = 1e-5;
};

struct ZooEntry {
  std::string label;
  ModelKind kind = ModelKind::ode;
  std::string description;
  std::shared_ptr<const Field3> field;
  std::shared_ptr<const SectionGraphModel> graph;
  TrappingRegion region;
  int s_expected = 0;
  int s_L_expected = 0;
  SeedSpec seeds;
  CensusDefaults defaults;
  /// Box-map settings for connectedness_check.
  ConnectednessOptions connectivity;
  /// Equilibria of ODE models inside the trapping region.
  std::vector<EquilibriumReport> equilibria;

  /// Lorenz-like singularities in the attracting set.
  int s_L() const;
  /// Singular points used by the census (equilibria or singularity records).
  std::vector<Vec3> singular_points() const;
  /// Checks the declared counts against the bound and region containment.
  void validate() const;
  nlohmann::ordered_json manifest() const;
};

struct ZooOptions {
  int glued_max = 2;
  int chained_max = 3;
};

std::vector<ZooEntry> zoo(const ZooOptions& opts = {});
/// Entry by label, including chained_k / glued_suspension_k for any k >= 1
/// and the test fixtures.
ZooEntry zoo_entry(const std::string& label);
nlohmann::ordered_json zoo_manifest(const std::vector<ZooEntry>& entries);

ZooEntry make_lorenz_classic(const LorenzParams& p = {});
ZooEntry make_geometric_lorenz(double c = 1.9, const LinearSaddleParams& p = {});
ZooEntry make_double_lorenz();
ZooEntry make_sharp(const LinearSaddleParams& p = {});
ZooEntry make_chained(int k, const LinearSaddleParams& p = {});
ZooEntry make_glued_suspension(int k, double radius = 0.25);
ZooEntry make_section_entry(const SectionGraphModel& model, int s_expected, int s_L_expected);

/// Fixtures: three singular pieces through one singularity (bound violated),
/// one piece visiting both sides of its singularity, two far-apart Lorenz
/// systems, and Lorenz with a box that is not trapping.
ZooEntry make_violation_fixture();
ZooEntry make_two_sided_fixture();
ZooEntry make_disjoint_lorenz_fixture();
ZooEntry make_untrapped_lorenz_fixture();

struct TrappingReport {
  bool pass = false;
  int samples = 0;
  int inward = 0;
  int outward = 0;
  /// Largest <F, n> / |F| over the samples (negative when all inward).
  double worst_margin = 0.0;
  Vec3 worst_point = Vec3::Zero();
};
TrappingReport trapping_check(const ZooEntry& entry, int samples = 10000);

struct ConnectednessReport {
  bool pass = false;
  int boxes = 0;
  int components = 0;
  double box_edge = 0.0;
  double flow_time = 0.0;
  std::vector<Vec3> representatives;  // one box center per component
};
/// Box-covering approximation of the attracting set (subdivision with image
/// selection until box edges are at most eps, then selection up to total flow
/// time T), followed by a connectivity test of the touching-box graph.
ConnectednessReport connectedness_check(const ZooEntry& entry, double T, double eps,
                                        const ConnectednessOptions& opts);
/// Uses the entry's own box-map settings.
ConnectednessReport connectedness_check(const ZooEntry& entry, double T, double eps);

}  // namespace singflow
