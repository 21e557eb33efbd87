#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tensegrity/dynamics.hpp"

namespace tensegrity {

/// Convex support polygon in the incline-plane frame, counterclockwise.
struct SupportPolygon {
  std::vector<Eigen::Vector2d> vertices;
  Eigen::Vector2d uphill_direction = Eigen::Vector2d::UnitX();
};

/// Signed distances (cm) from the projected CoM to the uphill and downhill
/// edges; positive means inside.
struct StabilityMargins {
  double uphill = 0.0;
  double downhill = 0.0;
};

/// Convex hull of the contact points' (x, y) in the plane frame. Collinear
/// points are dropped. Throws Error{DegenerateSupport} for fewer than three
/// points or a collinear set.
SupportPolygon support_polygon(const std::vector<Eigen::Vector3d>& contacts,
                               const Eigen::Vector2d& uphill = Eigen::Vector2d::UnitX());

/// Projection of the CoM along gravity onto the incline plane.
Eigen::Vector2d project_com(const Eigen::Vector3d& com, const WorldConfig& world);

/// Index of the edge (vertex i to i+1) whose outward normal best matches `direction`.
int extremal_edge(const SupportPolygon& polygon, const Eigen::Vector2d& direction);

/// Signed distance from `point` to the line through edge `edge`, positive inside.
double edge_distance(const SupportPolygon& polygon, int edge, const Eigen::Vector2d& point);

StabilityMargins stability_margins(const Eigen::Vector2d& projected_com, const SupportPolygon& polygon);

/// Support polygon and margins of a simulation state, or nullopt while the
/// contact set is degenerate.
struct Stance {
  SupportPolygon polygon;
  Eigen::Vector2d projected_com;
  StabilityMargins margins;
};
std::optional<Stance> stance_of(const SimState& state, const Eigen::Vector2d& uphill = Eigen::Vector2d::UnitX());

/// Steepest incline (degrees) a Coulomb contact with coefficient mu holds.
double max_incline_no_slip(double mu);

struct ContractionSearch {
  double resolution = 0.005;      // fraction of neutral length
  double damping_scale = 10.0;
  double drag = 2.0;              // 1/s during quasi-static probing
  double ramp_rate = 0.1;         // fraction per second while probing
  double max_settle_time = 20.0;  // s after the ramp ends
};

/// Outcome of contracting one cable quasi-statically from a settled state.
enum class ProbeOutcome { Stable, TippedForward, TippedBackward };

ProbeOutcome probe_contraction(const SimState& resting, int cable, double contraction,
                               const ContractionSearch& search = {});

/// Smallest contraction (fraction of neutral length, on a `resolution` grid)
/// that tips the robot forward over its uphill edge, found by bisection over
/// quasi-static probes. nullopt when even the actuator limit fails or the
/// robot tips downhill first.
std::optional<double> required_contraction(const SimState& resting, int cable,
                                           const ContractionSearch& search = {});

/// Convenience overload: settles on `face` first.
std::optional<double> required_contraction(std::shared_ptr<const TensegrityTopology> topology,
                                           const PhysicalParams& params, const WorldConfig& world, int face,
                                           int cable, const ContractionSearch& search = {});

enum class FailureMode { None, RolledBack, Slipped, Stalled };

std::string_view to_string(FailureMode mode);

struct FaceChange {
  double time = 0.0;
  int from = -1;
  int to = -1;
  double displacement = 0.0;  // cm along the uphill axis since the previous resting face
};

/// What a trial needs to record for outcome classification.
struct TrialTrace {
  bool reached_goal = false;
  double max_slip_between_face_changes = 0.0;  // cm
  std::vector<FaceChange> face_changes;
};

struct FailureThresholds {
  double slip_distance = 5.0;      // cm
  double rollback_distance = 2.0; // cm downhill across one face change
};

FailureMode classify_failure(const TrialTrace& trace, const FailureThresholds& thresholds = {});

}  // namespace tensegrity
