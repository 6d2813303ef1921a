#pragma once

#include "singflow/piecewise_map.hpp"
#include "singflow/types.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace singflow {

using Vec2 = Eigen::Vector2d;

/// Diagonal saddle x' = diag(lambda1, lambda2, lambda3) x with
/// lambda2 < lambda3 < 0 < -lambda3 < lambda1.
struct LinearSaddleParams {
  double lambda1 = 2.0;
  double lambda2 = -6.0;
  double lambda3 = -1.5;

  double alpha() const { return -lambda3 / lambda1; }
  double beta() const { return -lambda2 / lambda1; }
  void validate() const;
};

enum class Side { none, top, bottom };
std::string to_string(Side s);
Side side_from_string(const std::string& s);

enum class TransitionKind { linear_passage, affine_reinjection, winding_map, tube_routing };
std::string to_string(TransitionKind k);
TransitionKind transition_kind_from_string(const std::string& s);

struct PassageResult {
  Vec3 exit = Vec3::Zero();  // (sgn x, y |x|^beta, face |x|^alpha)
  double time = 0.0;
  Side side = Side::none;
  bool absorbed = false;
};

/// Closed-form passage through the linear saddle from the z = face plane
/// (face = +1 or -1) to the x = +-1 plane. x = 0 is absorbed.
PassageResult linear_passage(const LinearSaddleParams& p, const Vec3& entry);

/// f(x) = sgn(x)(c|x|^alpha - 1) on [-1, 1] minus {0}.
PiecewiseMap1D quotient_lorenz_map(double c, double alpha, bool require_expansion = false);

/// Full-branch map on [lo, hi] with N branches on geometrically shrinking
/// intervals accumulating at lo; the remainder near lo maps affinely onto the
/// whole interval. Slopes below sqrt(2) raise ExpansionError.
PiecewiseMap1D winding_map(int N, double base = 2.0, double lo = 0.0, double hi = 1.0);
/// Scalar evaluation of winding_map on [0, 1].
double winding_value(double v, int N, double base);
double winding_slope(double v, int N, double base);

inline constexpr double kExpansionFloor = 1.4142135623730951;

/// Planar cross-section. Local coordinates are the two in-plane coordinates
/// (increasing axis order) minus `origin`; the rectangle is given in local
/// coordinates.
struct SectionNode {
  std::string id;
  int axis = 2;
  double offset = 0.0;
  std::array<double, 2> origin{0.0, 0.0};
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  /// Local coordinate index that survives in the 1-D quotient.
  int quotient_axis = 0;

  Vec3 embed(const Vec2& local) const;
  bool contains(const Vec2& local, double slack = 0.0) const;
};

struct SingularityRecord {
  std::string id;
  Vec3 location = Vec3::Zero();
  LinearSaddleParams params;
};

/// Transition from a sub-rectangle (domain, in source local coordinates) of a
/// node to another node. With (u, v) the source local point:
///   linear_passage     closed-form saddle passage; face from side (top=+1)
///   affine_reinjection (sign (c|v| - 1), fiber_offset + fiber_scale u)
///   winding_map        (sign (2 W(|v|) - 1), fiber_offset + fiber_scale u)
///   tube_routing       (scale0 u + shift0, scale1 v + shift1)
struct TransitionMap {
  TransitionKind kind = TransitionKind::affine_reinjection;
  std::string source;
  std::string target;
  Side side = Side::none;
  std::string singularity;
  std::array<double, 2> dom_lo{-1.0, -1.0};
  std::array<double, 2> dom_hi{1.0, 1.0};
  double time = 1.0;
  double sign = 1.0;
  double c = 1.9;
  double fiber_offset = 0.5;
  double fiber_scale = 0.25;
  int branches = 8;
  double base = 2.0;
  std::array<double, 2> scale{1.0, 1.0};
  std::array<double, 2> shift{0.0, 0.0};

  bool in_domain(const Vec2& p) const;
};

struct Piece {
  std::string id;
  /// Cross-section carrying the census and the quotient map.
  std::string base;
  std::vector<std::string> nodes;
};

enum class HopStatus { moved, absorbed, stranded };

struct Hop {
  HopStatus status = HopStatus::moved;
  int transition = -1;
  int target = -1;
  Vec2 point = Vec2::Zero();
  double time = 0.0;
  Side side = Side::none;
  int singularity = -1;
  /// |x| at entry for passages (distance to the local stable manifold).
  double passage_distance = 0.0;
};

class SectionGraphModel {
 public:
  std::string label;
  std::vector<SingularityRecord> singularities;
  std::vector<SectionNode> nodes;
  std::vector<TransitionMap> transitions;
  std::vector<Piece> pieces;

  /// Resolve ids to indices and check the structural invariants; must be
  /// called after editing the public members.
  void finalize();

  int node_index(const std::string& id) const;
  int singularity_index(const std::string& id) const;
  int piece_of_node(int node) const;
  const std::vector<int>& outgoing(int node) const { return outgoing_[node]; }
  int transition_target(int t) const { return target_[t]; }

  /// One transition from `node` at local point p.
  Hop step(int node, const Vec2& p) const;

  /// Number of singularity records with a Lorenz-like spectrum.
  int lorenz_like_count() const;
  /// Bounding box of all embedded node rectangles.
  Box bounding_box() const;

  /// Image-containment check of every transition on an m x m grid; returns
  /// a list of violations (empty when all hold).
  std::vector<std::string> check_images(int m = 64) const;
  /// Check that each node's rectangle is covered by its transition domains
  /// (cell-center grid).
  std::vector<std::string> check_coverage(int m = 64) const;

  /// 1-D rule of transition t on the quotient coordinates.
  PiecewiseMap1D transition_quotient(int t) const;
  /// First-return quotient map of a piece's base node.
  PiecewiseMap1D piece_quotient(int piece) const;

  nlohmann::ordered_json to_json() const;
  static SectionGraphModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::vector<int>> outgoing_;
  std::vector<int> target_;
  std::vector<int> sing_;
  std::vector<int> piece_of_;
  bool finalized_ = false;
};

enum class ReturnStatus { returned, absorbed, routed, stranded };

struct ReturnResult {
  ReturnStatus status = ReturnStatus::returned;
  Vec2 point = Vec2::Zero();
  double time = 0.0;
  std::vector<int> itinerary;  // nodes visited after the start node
  std::vector<std::pair<int, Side>> sides;  // (singularity, side) per passage
  int routed_to = -1;
};

/// First-return map to a node: composes transitions until the orbit is back
/// on the node, hits a stable manifold, or leaves the node's piece.
class ReturnMap {
 public:
  ReturnMap(const SectionGraphModel& model, const std::string& node_id, int max_hops = 64);
  ReturnResult operator()(const Vec2& p) const;
  int node() const { return node_; }

 private:
  const SectionGraphModel* model_;
  int node_;
  int piece_;
  int max_hops_;
};

ReturnMap build_return_map(const SectionGraphModel& model, const std::string& node_id);

}  // namespace singflow
