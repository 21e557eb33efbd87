#include "tensegrity/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "tensegrity/error.hpp"

namespace tensegrity {

namespace {

// Internal units are cm, kg, s. One newton is 100 kg cm/s^2 and one joule is
// 1e4 kg cm^2/s^2.
constexpr double kNewton = 100.0;
constexpr double kJoule = 1e4;
constexpr double kPi = 3.14159265358979323846;

double deg2rad(double deg) { return deg * kPi / 180.0; }

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

bool finite(const Eigen::Vector3d& v) { return v.allFinite(); }

struct Kinematics {
  std::array<Eigen::Vector3d, kNodeCount> pos;
  std::array<Eigen::Vector3d, kNodeCount> vel;
  std::array<Eigen::Matrix3d, kRodCount> rot;
};

Kinematics kinematics(const SimState& state) {
  const TensegrityTopology& topo = *state.topology;
  const double half = 0.5 * topo.rod_length;
  Kinematics k;
  for (int r = 0; r < kRodCount; ++r) {
    const RodBodyState& rod = state.rods[r];
    k.rot[r] = rod.orientation.toRotationMatrix();
    const Eigen::Vector3d arm = half * k.rot[r].col(2);
    const Edge& e = topo.rods[r];
    k.pos[e.a] = rod.com_position - arm;
    k.pos[e.b] = rod.com_position + arm;
    k.vel[e.a] = rod.linear_velocity - rod.angular_velocity.cross(arm);
    k.vel[e.b] = rod.linear_velocity + rod.angular_velocity.cross(arm);
  }
  return k;
}

void update_contact_set(SimState& state) {
  const TensegrityTopology& topo = *state.topology;
  const double half = 0.5 * topo.rod_length;
  const double limit = state.params.rod_radius + state.world.contact_tolerance;
  std::array<bool, kNodeCount> touching{};
  for (int r = 0; r < kRodCount; ++r) {
    const RodBodyState& rod = state.rods[r];
    const double dz = half * rod.orientation.toRotationMatrix()(2, 2);
    touching[topo.rods[r].a] = rod.com_position.z() - dz <= limit;
    touching[topo.rods[r].b] = rod.com_position.z() + dz <= limit;
  }
  state.contact_set.clear();
  for (int i = 0; i < kNodeCount; ++i) {
    if (touching[i]) state.contact_set.push_back(i);
  }
}

Eigen::Matrix3d world_inertia(const Eigen::Matrix3d& rot, const Eigen::Matrix3d& body) {
  return rot * body * rot.transpose();
}

}  // namespace

void validate(const PhysicalParams& p) {
  require(p.rod_mass > 0.0, "rod mass must be positive");
  require(p.rod_radius >= 0.0, "rod radius must be non-negative");
  require(p.payload_mass > 0.0, "payload mass must be positive");
  require(p.cable_stiffness > 0.0, "cable stiffness must be positive");
  require(p.cable_damping >= 0.0, "cable damping must be non-negative");
  require(p.pretension >= 0.0 && p.pretension < 1.0, "pretension must lie in [0, 1)");
  require(p.payload_spring_stiffness > 0.0, "payload spring stiffness must be positive");
  require(p.payload_spring_rest_fraction > 0.0, "payload spring rest fraction must be positive");
  require(p.payload_spring_damping >= 0.0, "payload spring damping must be non-negative");
  require(p.max_contraction >= 0.0 && p.max_contraction < 1.0, "max contraction must lie in [0, 1)");
  require(p.actuator_rate >= 0.0, "actuator rate must be non-negative");
}

void validate(const WorldConfig& w) {
  require(w.incline_deg >= 0.0 && w.incline_deg < 90.0, "incline must lie in [0, 90) degrees");
  require(w.gravity >= 0.0, "gravity must be non-negative");
  require(w.friction >= 0.0, "friction coefficient must be non-negative");
  require(w.contact_stiffness > 0.0, "contact stiffness must be positive");
  require(w.contact_damping >= 0.0, "contact damping must be non-negative");
  require(w.tangential_stiffness > 0.0, "tangential stiffness must be positive");
  require(w.tangential_damping >= 0.0, "tangential damping must be non-negative");
  require(w.contact_tolerance >= 0.0, "contact tolerance must be non-negative");
  require(w.dt > 0.0, "timestep must be positive");
}

Eigen::Vector3d gravity_vector(const WorldConfig& world) {
  const double theta = deg2rad(world.incline_deg);
  const double g = world.gravity * 100.0;
  return {-g * std::sin(theta), 0.0, -g * std::cos(theta)};
}

Eigen::Vector3d default_roll_axis(const TensegrityTopology& topology, int face) {
  require(face >= 0 && face < kStableFaceCount, "face index out of range");
  const Eigen::Vector3d n = face_normal(topology, topology.faces[face]);
  const Eigen::Vector3d primary = Eigen::Vector3d(1, 1, 1).normalized();
  if (std::abs(n.dot(primary)) < 0.9) return primary;
  return Eigen::Vector3d(1, 1, -1).normalized();
}

SimState place_on_face(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                       const WorldConfig& world, int face) {
  require(topology != nullptr, "topology is null");
  const Eigen::Vector3d axis = default_roll_axis(*topology, face);
  return place_on_face(std::move(topology), params, world, face, axis);
}

SimState place_on_face(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                       const WorldConfig& world, int face, const Eigen::Vector3d& roll_axis) {
  require(topology != nullptr, "topology is null");
  require(face >= 0 && face < kStableFaceCount, "face index out of range");
  validate(params);
  validate(world);
  const TensegrityTopology& topo = *topology;

  const Face& f = topo.faces[face];
  const Eigen::Vector3d normal = face_normal(topo, f);
  const Eigen::Vector3d axis = roll_axis.normalized();
  require(std::abs(axis.dot(normal)) < 0.99, "roll axis must not be parallel to the face normal");

  const Eigen::Matrix3d down =
      Eigen::Quaterniond::FromTwoVectors(normal, Eigen::Vector3d(0, 0, -1)).toRotationMatrix();
  const Eigen::Vector3d projected = down * axis;
  // Projection onto -y leaves a base edge facing +x and a vertex facing downhill.
  double yaw = std::atan2(projected.x(), projected.y()) + kPi;
  // For some axes the projection lands on a vertex instead; turn those round.
  const Eigen::Matrix3d turn = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix() * down;
  const Eigen::Vector3d mid = (topo.nodes[f[0]] + topo.nodes[f[1]] + topo.nodes[f[2]]) / 3.0;
  double lo = 0.0, hi = 0.0;
  for (int n : f) {
    const double x = (turn * (topo.nodes[n] - mid)).x();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi > -lo) yaw += kPi;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix() * down;
  return place_with_rotation(std::move(topology), params, world, face, rot);
}

SimState place_with_rotation(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                             const WorldConfig& world, int face, const Eigen::Matrix3d& rotation) {
  require(topology != nullptr, "topology is null");
  require(face >= 0 && face < kStableFaceCount, "face index out of range");
  validate(params);
  validate(world);
  const TensegrityTopology& topo = *topology;
  const Face& f = topo.faces[face];
  // Level the face exactly; only the yaw of `rotation` survives.
  const Eigen::Vector3d normal = rotation * face_normal(topo, f);
  const Eigen::Matrix3d rot =
      Eigen::Quaterniond::FromTwoVectors(normal, Eigen::Vector3d(0, 0, -1)).toRotationMatrix() * rotation;

  std::array<Eigen::Vector3d, kNodeCount> nodes;
  for (int i = 0; i < kNodeCount; ++i) nodes[i] = rot * topo.nodes[i];
  const Eigen::Vector3d base = (nodes[f[0]] + nodes[f[1]] + nodes[f[2]]) / 3.0;
  const Eigen::Vector3d shift(-base.x(), -base.y(), params.rod_radius - base.z());
  for (auto& p : nodes) p += shift;

  SimState s;
  s.topology = topology;
  s.params = params;
  s.world = world;

  const double len = topo.rod_length;
  const double perp = params.rod_mass * len * len / 12.0;
  const double axial = 0.5 * params.rod_mass * params.rod_radius * params.rod_radius;
  for (int r = 0; r < kRodCount; ++r) {
    const Edge& e = topo.rods[r];
    RodBodyState& rod = s.rods[r];
    rod.com_position = 0.5 * (nodes[e.a] + nodes[e.b]);
    rod.orientation = Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), nodes[e.b] - nodes[e.a]);
    rod.orientation.normalize();
    rod.mass = params.rod_mass;
    rod.inertia = Eigen::Vector3d(perp, perp, std::max(axial, 1e-6 * perp)).asDiagonal();
  }

  for (int c = 0; c < kCableCount; ++c) {
    const Edge& e = topo.cables[c];
    CableState& cable = s.cables[c];
    cable.neutral_rest_length = (nodes[e.a] - nodes[e.b]).norm() * (1.0 - params.pretension);
    cable.target_rest_length = cable.neutral_rest_length;
    cable.commanded_rest_length = cable.neutral_rest_length;
    cable.stiffness = topo.actuators.is_actuated(c) && params.actuated_stiffness > 0.0 ? params.actuated_stiffness
                                                                                      : params.cable_stiffness;
    cable.damping = params.cable_damping;
  }

  s.payload.mass = params.payload_mass;
  s.payload.position = shift;  // body origin
  for (int i = 0; i < kNodeCount; ++i) {
    SuspensionSpring spring;
    spring.node = i;
    spring.stiffness = params.payload_spring_stiffness;
    spring.damping = params.payload_spring_damping;
    spring.rest_length = params.payload_spring_rest_fraction * (nodes[i] - s.payload.position).norm();
    s.payload.suspension.push_back(spring);
  }
  update_contact_set(s);
  return s;
}

Eigen::Matrix3d body_rotation(const SimState& state) {
  const TensegrityTopology& topo = *state.topology;
  const auto nodes = node_positions(state);
  Eigen::Vector3d centre = Eigen::Vector3d::Zero();
  for (const auto& p : nodes) centre += p;
  centre /= kNodeCount;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int i = 0; i < kNodeCount; ++i) h += topo.nodes[i] * (nodes[i] - centre).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

void rotate_about_normal(SimState& state, double angle_rad) {
  const Eigen::Matrix3d turn = Eigen::AngleAxisd(angle_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Quaterniond q(turn);
  Eigen::Vector3d pivot = total_com(state);
  pivot.z() = 0.0;
  for (RodBodyState& rod : state.rods) {
    rod.com_position = pivot + turn * (rod.com_position - pivot);
    rod.orientation = (q * rod.orientation).normalized();
    rod.linear_velocity = turn * rod.linear_velocity;
    rod.angular_velocity = turn * rod.angular_velocity;
  }
  state.payload.position = pivot + turn * (state.payload.position - pivot);
  state.payload.velocity = turn * state.payload.velocity;
  for (ContactPoint& c : state.contacts) c.active = false;
  update_contact_set(state);
}

void step_in_place(SimState& state) {
  const TensegrityTopology& topo = *state.topology;
  const PhysicalParams& params = state.params;
  const WorldConfig& world = state.world;
  const double dt = world.dt;

  // Actuators slew towards their targets.
  for (CableState& c : state.cables) {
    if (c.commanded_rest_length == c.target_rest_length) continue;
    const double delta = c.target_rest_length - c.commanded_rest_length;
    const double max_step = params.actuator_rate > 0.0 ? params.actuator_rate * c.neutral_rest_length * dt
                                                       : std::numeric_limits<double>::infinity();
    c.commanded_rest_length =
        std::abs(delta) <= max_step ? c.target_rest_length : c.commanded_rest_length + std::copysign(max_step, delta);
  }

  const Kinematics kin = kinematics(state);
  std::array<Eigen::Vector3d, kNodeCount> force;
  force.fill(Eigen::Vector3d::Zero());
  const Eigen::Vector3d g = gravity_vector(world);

  for (int c = 0; c < kCableCount; ++c) {
    CableState& cable = state.cables[c];
    const Edge& e = topo.cables[c];
    const Eigen::Vector3d d = kin.pos[e.b] - kin.pos[e.a];
    const double len = d.norm();
    double tension = 0.0;
    if (len > cable.commanded_rest_length && len > 0.0) {
      const Eigen::Vector3d u = d / len;
      const double rate = (kin.vel[e.b] - kin.vel[e.a]).dot(u);
      tension = kNewton * (cable.stiffness * (len - cable.commanded_rest_length) +
                           state.damping_scale * cable.damping * rate);
      tension = std::max(tension, 0.0);
      force[e.a] += tension * u;
      force[e.b] -= tension * u;
    }
    cable.current_tension = tension / kNewton;
  }

  PayloadState& payload = state.payload;
  Eigen::Vector3d payload_force = payload.mass * g - state.drag * payload.mass * payload.velocity;
  for (SuspensionSpring& spring : payload.suspension) {
    const Eigen::Vector3d d = payload.position - kin.pos[spring.node];
    const double len = d.norm();
    double tension = 0.0;
    if (len > spring.rest_length && len > 0.0) {
      const Eigen::Vector3d u = d / len;
      const double rate = (payload.velocity - kin.vel[spring.node]).dot(u);
      tension = kNewton * (spring.stiffness * (len - spring.rest_length) +
                           state.damping_scale * spring.damping * rate);
      tension = std::max(tension, 0.0);
      force[spring.node] += tension * u;
      payload_force -= tension * u;
    }
    spring.tension = tension / kNewton;
  }

  const double kn = kNewton * world.contact_stiffness;
  const double cn = kNewton * world.contact_damping;
  const double kt = kNewton * world.tangential_stiffness;
  const double ct = kNewton * world.tangential_damping;
  for (int i = 0; i < kNodeCount; ++i) {
    ContactPoint& contact = state.contacts[i];
    contact.slip.setZero();
    const double gap = kin.pos[i].z() - params.rod_radius;
    if (gap >= 0.0) {
      contact.active = false;
      contact.normal_force = 0.0;
      contact.tangential_force.setZero();
      continue;
    }
    const Eigen::Vector2d xy = kin.pos[i].head<2>();
    if (!contact.active) {
      contact.active = true;
      contact.anchor = xy;
    }
    const double normal = std::max(0.0, -kn * gap - cn * kin.vel[i].z());
    Eigen::Vector2d tangential = kt * (contact.anchor - xy) - ct * kin.vel[i].head<2>();
    const double limit = world.friction * normal;
    const double magnitude = tangential.norm();
    if (magnitude > limit) {
      tangential = magnitude > 0.0 ? Eigen::Vector2d(tangential * (limit / magnitude)) : Eigen::Vector2d::Zero();
      const Eigen::Vector2d anchor = xy + tangential / kt;
      contact.slip = anchor - contact.anchor;
      contact.anchor = anchor;
    }
    force[i] += Eigen::Vector3d(tangential.x(), tangential.y(), normal);
    contact.normal_force = normal / kNewton;
    contact.tangential_force = tangential / kNewton;
  }

  const double half = 0.5 * topo.rod_length;
  for (int r = 0; r < kRodCount; ++r) {
    RodBodyState& rod = state.rods[r];
    const Edge& e = topo.rods[r];
    const Eigen::Matrix3d& rot = kin.rot[r];
    const Eigen::Vector3d arm = half * rot.col(2);
    const Eigen::Matrix3d inertia = world_inertia(rot, rod.inertia);

    const Eigen::Vector3d f = force[e.a] + force[e.b] + rod.mass * g - state.drag * rod.mass * rod.linear_velocity;
    Eigen::Vector3d torque = (-arm).cross(force[e.a]) + arm.cross(force[e.b]);
    Eigen::Vector3d momentum = inertia * rod.angular_velocity;
    torque -= state.drag * momentum;

    rod.linear_velocity += (dt / rod.mass) * f;
    rod.com_position += dt * rod.linear_velocity;

    // Angular momentum is advanced exactly by the torque impulse; the
    // orientation turns with the velocity implied at the old inertia.
    momentum += dt * torque;
    const Eigen::Matrix3d inv_body = rod.inertia.diagonal().cwiseInverse().asDiagonal();
    const Eigen::Vector3d omega_mid = rot * inv_body * rot.transpose() * momentum;
    const double angle = omega_mid.norm() * dt;
    if (angle > 0.0) {
      rod.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega_mid.normalized())) * rod.orientation;
      rod.orientation.normalize();
    }
    const Eigen::Matrix3d rot_new = rod.orientation.toRotationMatrix();
    rod.angular_velocity = rot_new * inv_body * rot_new.transpose() * momentum;

    if (!finite(rod.com_position) || !finite(rod.linear_velocity) || !finite(rod.angular_velocity) ||
        !rod.orientation.coeffs().allFinite()) {
      throw Error(ErrorKind::Divergence, "rod " + std::to_string(r) + " diverged at t=" + std::to_string(state.time));
    }
  }

  payload.velocity += (dt / payload.mass) * payload_force;
  payload.position += dt * payload.velocity;
  if (!finite(payload.position) || !finite(payload.velocity)) {
    throw Error(ErrorKind::Divergence, "payload diverged at t=" + std::to_string(state.time));
  }

  state.time += dt;
  update_contact_set(state);
}

SimState step(const SimState& state) {
  SimState next = state;
  step_in_place(next);
  return next;
}

namespace {

double kinetic_energy(const SimState& state) {
  double ke = 0.0;
  for (const RodBodyState& rod : state.rods) {
    const Eigen::Matrix3d rot = rod.orientation.toRotationMatrix();
    ke += 0.5 * rod.mass * rod.linear_velocity.squaredNorm();
    ke += 0.5 * rod.angular_velocity.dot(world_inertia(rot, rod.inertia) * rod.angular_velocity);
  }
  ke += 0.5 * state.payload.mass * state.payload.velocity.squaredNorm();
  return ke / kJoule;
}

bool actuators_idle(const SimState& state) {
  return std::all_of(state.cables.begin(), state.cables.end(), [](const CableState& c) {
    return c.commanded_rest_length == c.target_rest_length;
  });
}

}  // namespace

HeavyDamping::HeavyDamping(SimState& state, double damping_scale, double drag)
    : state_(state), scale_(state.damping_scale), drag_(state.drag), dt_(state.world.dt) {
  state.damping_scale = damping_scale;
  state.drag = drag;
  // Nominal dampers sit well inside the explicit stability limit; keep the
  // scaled ones there too.
  const double substeps = std::ceil(damping_scale / 2.5);
  if (substeps > 1.0) state.world.dt = dt_ / substeps;
}

HeavyDamping::~HeavyDamping() {
  state_.damping_scale = scale_;
  state_.drag = drag_;
  state_.world.dt = dt_;
}

Eigen::Vector2d contact_drift(const SimState& state) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int touching = 0;
  for (const ContactPoint& c : state.contacts) {
    if (!c.active) continue;
    sum += c.slip;
    ++touching;
  }
  return touching > 0 ? Eigen::Vector2d(sum / touching) : sum;
}

SettleResult settle(SimState& state, const SettleOptions& options) {
  const HeavyDamping damping(state, options.damping_scale, options.drag);

  SettleResult result;
  const double start = state.time;
  Eigen::Vector2d drift = Eigen::Vector2d::Zero();
  double quiet = 0.0;
  const double incline = state.world.incline_deg;
  while (state.time - start < options.max_time) {
    const double ramp = state.time - start;
    const bool tilting = ramp < options.incline_ramp;
    state.world.incline_deg = tilting ? incline * ramp / options.incline_ramp : incline;
    step_in_place(state);
    drift += contact_drift(state);
    result.slip = drift.norm();
    if (result.slip > options.slip_limit) {
      result.slipped = true;
      break;
    }
    if (!tilting && kinetic_energy(state) < options.kinetic_threshold && actuators_idle(state)) {
      quiet += state.world.dt;
      if (quiet >= options.quiet_time) {
        result.converged = true;
        break;
      }
    } else {
      quiet = 0.0;
    }
  }
  state.world.incline_deg = incline;
  result.elapsed = state.time - start;
  return result;
}

SimState init_resting(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                      const WorldConfig& world, int face) {
  SimState state = place_on_face(std::move(topology), params, world, face);
  SettleOptions options;
  options.incline_ramp = kPlacementRamp;
  const SettleResult settled = settle(state, options);
  if (settled.slipped) {
    throw Error(ErrorKind::Slip, "robot slides while settling on a " + std::to_string(world.incline_deg) +
                                     " degree incline");
  }
  if (!settled.converged) {
    throw Error(ErrorKind::NonConvergence, "settling did not converge within " +
                                               std::to_string(SettleOptions{}.max_time) + " s");
  }
  state.time = 0.0;
  return state;
}

namespace {

void check_fraction(const SimState& state, int cable, double fraction) {
  const double limit = state.topology->actuators.max_contraction[cable];
  if (!std::isfinite(fraction) || fraction > 1.0 + 1e-12 || fraction < 1.0 - limit - 1e-12) {
    throw Error(ErrorKind::InvalidCommand, "fraction out of range for cable " + std::to_string(cable));
  }
}

}  // namespace

void set_cable_target(SimState& state, int cable, double fraction) {
  if (cable < 0 || cable >= kCableCount || !state.topology->actuators.is_actuated(cable)) {
    throw Error(ErrorKind::InvalidCommand, "cable " + std::to_string(cable) + " is not actuated");
  }
  check_fraction(state, cable, fraction);
  CableState& c = state.cables[cable];
  c.target_rest_length = std::clamp(fraction, 0.0, 1.0) * c.neutral_rest_length;
}

void apply_cable_targets_in_place(SimState& state, const std::vector<double>& fractions) {
  const ActuatorMap& map = state.topology->actuators;
  std::vector<std::pair<int, double>> updates;
  if (fractions.size() == map.sequence.size()) {
    for (std::size_t k = 0; k < fractions.size(); ++k) updates.emplace_back(map.sequence[k], fractions[k]);
  } else if (fractions.size() == static_cast<std::size_t>(kCableCount)) {
    for (int c = 0; c < kCableCount; ++c) {
      if (map.is_actuated(c)) {
        updates.emplace_back(c, fractions[c]);
      } else if (fractions[c] != 1.0) {
        throw Error(ErrorKind::InvalidCommand, "cable " + std::to_string(c) + " is not actuated");
      }
    }
  } else {
    throw Error(ErrorKind::InvalidCommand, "expected one fraction per actuated cable");
  }
  for (const auto& [cable, fraction] : updates) check_fraction(state, cable, fraction);
  for (const auto& [cable, fraction] : updates) {
    CableState& c = state.cables[cable];
    c.target_rest_length = std::clamp(fraction, 0.0, 1.0) * c.neutral_rest_length;
  }
}

SimState apply_cable_targets(const SimState& state, const std::vector<double>& fractions) {
  SimState next = state;
  apply_cable_targets_in_place(next, fractions);
  return next;
}

Eigen::Vector3d total_com(const SimState& state) {
  Eigen::Vector3d weighted = state.payload.mass * state.payload.position;
  double mass = state.payload.mass;
  for (const RodBodyState& rod : state.rods) {
    weighted += rod.mass * rod.com_position;
    mass += rod.mass;
  }
  return weighted / mass;
}

std::array<Eigen::Vector3d, kNodeCount> node_positions(const SimState& state) { return kinematics(state).pos; }

std::array<Eigen::Vector3d, kNodeCount> node_velocities(const SimState& state) { return kinematics(state).vel; }

Energy energy(const SimState& state) {
  const TensegrityTopology& topo = *state.topology;
  const Kinematics kin = kinematics(state);
  const Eigen::Vector3d g = gravity_vector(state.world);
  Energy e;
  e.kinetic = kinetic_energy(state);

  double potential = -state.payload.mass * g.dot(state.payload.position);
  for (const RodBodyState& rod : state.rods) potential -= rod.mass * g.dot(rod.com_position);
  e.gravitational = potential / kJoule;

  double elastic = 0.0;
  for (int c = 0; c < kCableCount; ++c) {
    const Edge& edge = topo.cables[c];
    const double stretch = (kin.pos[edge.b] - kin.pos[edge.a]).norm() - state.cables[c].commanded_rest_length;
    if (stretch > 0.0) elastic += 0.5 * kNewton * state.cables[c].stiffness * stretch * stretch;
  }
  for (const SuspensionSpring& spring : state.payload.suspension) {
    const double stretch = (state.payload.position - kin.pos[spring.node]).norm() - spring.rest_length;
    if (stretch > 0.0) elastic += 0.5 * kNewton * spring.stiffness * stretch * stretch;
  }
  for (int i = 0; i < kNodeCount; ++i) {
    const double pen = state.params.rod_radius - kin.pos[i].z();
    if (pen > 0.0) elastic += 0.5 * kNewton * state.world.contact_stiffness * pen * pen;
    if (state.contacts[i].active) {
      elastic += 0.5 * kNewton * state.world.tangential_stiffness *
                 (kin.pos[i].head<2>() - state.contacts[i].anchor).squaredNorm();
    }
  }
  e.elastic = elastic / kJoule;
  return e;
}

Eigen::Vector3d linear_momentum(const SimState& state) {
  Eigen::Vector3d p = state.payload.mass * state.payload.velocity;
  for (const RodBodyState& rod : state.rods) p += rod.mass * rod.linear_velocity;
  return p;
}

Eigen::Vector3d angular_momentum(const SimState& state) {
  Eigen::Vector3d l = state.payload.mass * state.payload.position.cross(state.payload.velocity);
  for (const RodBodyState& rod : state.rods) {
    const Eigen::Matrix3d rot = rod.orientation.toRotationMatrix();
    l += rod.mass * rod.com_position.cross(rod.linear_velocity);
    l += world_inertia(rot, rod.inertia) * rod.angular_velocity;
  }
  return l;
}

int current_face(const SimState& state) {
  const auto pos = node_positions(state);
  const double limit = state.params.rod_radius + state.world.contact_tolerance;
  int best = -1;
  double best_height = std::numeric_limits<double>::infinity();
  for (int f = 0; f < kStableFaceCount; ++f) {
    const Face& face = state.topology->faces[f];
    double highest = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (int n : face) {
      highest = std::max(highest, pos[n].z());
      sum += pos[n].z();
    }
    if (highest <= limit && sum < best_height) {
      best = f;
      best_height = sum;
    }
  }
  return best;
}

std::array<double, kCableCount> commanded_fractions(const SimState& state) {
  std::array<double, kCableCount> out{};
  for (int c = 0; c < kCableCount; ++c) {
    out[c] = state.cables[c].commanded_rest_length / state.cables[c].neutral_rest_length;
  }
  return out;
}

}  // namespace tensegrity
