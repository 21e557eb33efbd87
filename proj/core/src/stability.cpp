#include "tensegrity/stability.hpp"

#include <algorithm>
#include <cmath>

#include "tensegrity/error.hpp"

namespace tensegrity {

namespace {

constexpr double kPi = 3.14159265358979323846;

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

SupportPolygon support_polygon(const std::vector<Eigen::Vector3d>& contacts, const Eigen::Vector2d& uphill) {
  if (contacts.size() < 3) throw Error(ErrorKind::DegenerateSupport, "fewer than three contact points");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(contacts.size());
  double scale = 0.0;
  for (const Eigen::Vector3d& c : contacts) {
    pts.emplace_back(c.x(), c.y());
    scale = std::max(scale, c.head<2>().cwiseAbs().maxCoeff());
  }
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& l, const Eigen::Vector2d& r) {
    return l.x() != r.x() ? l.x() < r.x() : l.y() < r.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  // Monotone chain; a turn must exceed eps to keep the middle vertex.
  const double eps = 1e-12 * std::max(1.0, scale * scale);
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Eigen::Vector2d& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= eps) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= eps) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);
  if (hull.size() < 3) throw Error(ErrorKind::DegenerateSupport, "contact points are collinear");

  SupportPolygon polygon;
  polygon.vertices = std::move(hull);
  polygon.uphill_direction = uphill.normalized();
  return polygon;
}

Eigen::Vector2d project_com(const Eigen::Vector3d& com, const WorldConfig& world) {
  const double theta = world.incline_deg * kPi / 180.0;
  return {com.x() - com.z() * std::tan(theta), com.y()};
}

int extremal_edge(const SupportPolygon& polygon, const Eigen::Vector2d& direction) {
  const auto& v = polygon.vertices;
  const int n = static_cast<int>(v.size());
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d edge = v[(i + 1) % n] - v[i];
    const Eigen::Vector2d outward = Eigen::Vector2d(edge.y(), -edge.x()).normalized();
    const double dot = outward.dot(direction);
    if (dot > best_dot + 1e-12) {
      best = i;
      best_dot = dot;
    }
  }
  return best;
}

double edge_distance(const SupportPolygon& polygon, int edge, const Eigen::Vector2d& point) {
  const auto& v = polygon.vertices;
  const Eigen::Vector2d& a = v[edge];
  const Eigen::Vector2d& b = v[(edge + 1) % v.size()];
  const Eigen::Vector2d d = b - a;
  return (d.x() * (point.y() - a.y()) - d.y() * (point.x() - a.x())) / d.norm();
}

StabilityMargins stability_margins(const Eigen::Vector2d& projected_com, const SupportPolygon& polygon) {
  StabilityMargins m;
  m.uphill = edge_distance(polygon, extremal_edge(polygon, polygon.uphill_direction), projected_com);
  m.downhill = edge_distance(polygon, extremal_edge(polygon, -polygon.uphill_direction), projected_com);
  return m;
}

std::optional<Stance> stance_of(const SimState& state, const Eigen::Vector2d& uphill) {
  if (state.contact_set.size() < 3) return std::nullopt;
  const auto pos = node_positions(state);
  std::vector<Eigen::Vector3d> contacts;
  for (int n : state.contact_set) contacts.push_back(pos[n]);
  Stance stance;
  try {
    stance.polygon = support_polygon(contacts, uphill);
  } catch (const Error&) {
    return std::nullopt;
  }
  stance.projected_com = project_com(total_com(state), state.world);
  stance.margins = stability_margins(stance.projected_com, stance.polygon);
  return stance;
}

double max_incline_no_slip(double mu) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidParameter, "friction coefficient must be non-negative");
  return std::atan(mu) * 180.0 / kPi;
}

ProbeOutcome probe_contraction(const SimState& resting, int cable, double contraction,
                               const ContractionSearch& search) {
  SimState s = resting;
  s.params.actuator_rate = search.ramp_rate;
  set_cable_target(s, cable, 1.0 - contraction);
  const HeavyDamping damping(s, search.damping_scale, search.drag);

  const double x0 = total_com(s).x();
  const double tip = 0.12 * s.topology->rod_length;
  const double ramp = search.ramp_rate > 0.0 ? contraction / search.ramp_rate : 0.0;
  const double limit = s.time + ramp + search.max_settle_time;
  const int check_every = 20;
  int counter = 0;
  double quiet = 0.0;
  while (s.time < limit) {
    step_in_place(s);
    if (++counter % check_every) continue;
    const double dx = total_com(s).x() - x0;
    if (dx > tip) return ProbeOutcome::TippedForward;
    if (dx < -tip) return ProbeOutcome::TippedBackward;
    const bool idle = s.cables[cable].commanded_rest_length == s.cables[cable].target_rest_length;
    if (idle && energy(s).kinetic < 1e-7) {
      quiet += check_every * s.world.dt;  // substepped dt
      if (quiet > 0.2) break;
    } else {
      quiet = 0.0;
    }
  }
  return ProbeOutcome::Stable;
}

std::optional<double> required_contraction(const SimState& resting, int cable, const ContractionSearch& search) {
  const double limit = resting.topology->actuators.max_contraction.at(cable);
  const int top = static_cast<int>(std::floor(limit / search.resolution + 1e-9));
  if (top <= 0) return std::nullopt;
  if (probe_contraction(resting, cable, top * search.resolution, search) != ProbeOutcome::TippedForward) {
    return std::nullopt;
  }
  int lo = 0;
  int hi = top;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    switch (probe_contraction(resting, cable, mid * search.resolution, search)) {
      case ProbeOutcome::TippedForward: hi = mid; break;
      case ProbeOutcome::TippedBackward: return std::nullopt;
      case ProbeOutcome::Stable: lo = mid; break;
    }
  }
  return hi * search.resolution;
}

std::optional<double> required_contraction(std::shared_ptr<const TensegrityTopology> topology,
                                           const PhysicalParams& params, const WorldConfig& world, int face,
                                           int cable, const ContractionSearch& search) {
  const SimState resting = init_resting(std::move(topology), params, world, face);
  return required_contraction(resting, cable, search);
}

std::string_view to_string(FailureMode mode) {
  switch (mode) {
    case FailureMode::None: return "none";
    case FailureMode::RolledBack: return "rolled_back";
    case FailureMode::Slipped: return "slipped";
    case FailureMode::Stalled: return "stalled";
  }
  return "unknown";
}

FailureMode classify_failure(const TrialTrace& trace, const FailureThresholds& thresholds) {
  if (trace.reached_goal) return FailureMode::None;
  if (trace.max_slip_between_face_changes > thresholds.slip_distance) return FailureMode::Slipped;
  for (const FaceChange& change : trace.face_changes) {
    if (change.displacement < -thresholds.rollback_distance) return FailureMode::RolledBack;
  }
  return FailureMode::Stalled;
}

}  // namespace tensegrity
