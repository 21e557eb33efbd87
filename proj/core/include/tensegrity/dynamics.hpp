#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "tensegrity/topology.hpp"

namespace tensegrity {

// Public quantities use cm, kg, s, N and degrees. The simulation frame is
// attached to the incline: +x points uphill, +z is the plane normal and the
// plane itself is z = 0. Gravity is expressed in that frame.

/// Mass, stiffness and actuation parameters of the robot.
struct PhysicalParams {
  double rod_mass = 0.06;          // kg
  double rod_radius = 0.5;         // cm, end-cap radius used for contact
  double payload_mass = 0.16;      // kg
  double cable_stiffness = 8.0;    // N/cm
  double cable_damping = 0.05;     // N s/cm
  double actuated_stiffness = 20.0;  // N/cm for actuated cables; 0 = cable_stiffness
  double pretension = 0.0;         // fraction removed from the geometric cable length at neutral
  double payload_spring_stiffness = 0.3;     // N/cm
  double payload_spring_rest_fraction = 0.7; // rest length / neutral centre-to-node distance
  double payload_spring_damping = 0.01;      // N s/cm
  double max_contraction = 0.5;    // actuator travel, fraction of neutral length
  double actuator_rate = 0.35;     // max slew, fraction of neutral length per second; 0 = unlimited
};

struct WorldConfig {
  double incline_deg = 0.0;
  double gravity = 9.81;                 // m/s^2
  double friction = 0.49;                // Coulomb coefficient
  double contact_stiffness = 500.0;      // N/cm
  double contact_damping = 0.3;          // N s/cm
  double tangential_stiffness = 250.0;   // N/cm, stick spring
  double tangential_damping = 0.15;      // N s/cm
  double contact_tolerance = 0.1;        // cm of clearance still counted as contact
  double dt = 5e-4;                      // s
};

void validate(const PhysicalParams& params);
void validate(const WorldConfig& world);

/// Gravity vector in the incline frame (cm/s^2).
Eigen::Vector3d gravity_vector(const WorldConfig& world);

struct RodBodyState {
  Eigen::Vector3d com_position = Eigen::Vector3d::Zero();      // cm
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // body z is the rod axis
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();   // cm/s
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // rad/s, world frame
  double mass = 0.0;                                            // kg
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();       // kg cm^2, body frame
};

struct CableState {
  double neutral_rest_length = 0.0;    // cm
  double target_rest_length = 0.0;     // cm, where the actuator is heading
  double commanded_rest_length = 0.0;  // cm, rate-limited towards target
  double stiffness = 0.0;              // N/cm
  double damping = 0.0;                // N s/cm
  double current_tension = 0.0;        // N, never negative
};

struct SuspensionSpring {
  int node = 0;
  double stiffness = 0.0;    // N/cm
  double rest_length = 0.0;  // cm
  double damping = 0.0;      // N s/cm
  double tension = 0.0;      // N
};

struct PayloadState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double mass = 0.0;
  std::vector<SuspensionSpring> suspension;
};

/// Per-node contact bookkeeping. The anchor is where the stick spring is
/// attached; it moves only while the contact slides.
struct ContactPoint {
  bool active = false;
  Eigen::Vector2d anchor = Eigen::Vector2d::Zero();
  double normal_force = 0.0;                                  // N
  Eigen::Vector2d tangential_force = Eigen::Vector2d::Zero(); // N
  Eigen::Vector2d slip = Eigen::Vector2d::Zero();             // cm the anchor moved during the last step
};

struct SimState {
  std::shared_ptr<const TensegrityTopology> topology;
  PhysicalParams params;
  WorldConfig world;
  std::array<RodBodyState, kRodCount> rods;
  std::array<CableState, kCableCount> cables;
  PayloadState payload;
  std::array<ContactPoint, kNodeCount> contacts;
  double time = 0.0;
  std::vector<int> contact_set;  // nodes within contact_tolerance of the plane, ascending
  // Multiplier on cable and suspension damping plus an extra velocity drag
  // (1/s); only quasi-static settling changes these.
  double damping_scale = 1.0;
  double drag = 0.0;
};

struct Energy {
  double kinetic = 0.0;        // J
  double gravitational = 0.0;  // J, zero at the incline frame origin
  double elastic = 0.0;        // J, cables, suspension and contact springs
  double total() const { return kinetic + gravitational + elastic; }
};

/// Places the robot from its neutral geometry with `face` on the plane, without
/// settling. `roll_axis` is a body-frame direction that ends up horizontal and
/// pointing to -y, so one base edge faces uphill; by default a face-dependent
/// 3-fold axis is used.
SimState place_on_face(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                       const WorldConfig& world, int face);
SimState place_on_face(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                       const WorldConfig& world, int face, const Eigen::Vector3d& roll_axis);

/// Places the robot in neutral geometry turned by `rotation` (body to world),
/// after levelling `face` flat on the plane. Does not settle.
SimState place_with_rotation(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                             const WorldConfig& world, int face, const Eigen::Matrix3d& rotation);

/// Least-squares rotation taking the neutral body nodes to the current ones.
Eigen::Matrix3d body_rotation(const SimState& state);

/// Rigidly turns the whole robot about the plane normal through its CoM.
void rotate_about_normal(SimState& state, double angle_rad);

/// Body-frame 3-fold axis the robot rolls around when starting from `face`.
Eigen::Vector3d default_roll_axis(const TensegrityTopology& topology, int face);

/// Raises damping for quasi-static work and shortens the timestep so the
/// explicit dampers stay stable. Restores the nominal values on destruction.
class HeavyDamping {
 public:
  HeavyDamping(SimState& state, double damping_scale, double drag);
  ~HeavyDamping();
  HeavyDamping(const HeavyDamping&) = delete;
  HeavyDamping& operator=(const HeavyDamping&) = delete;

 private:
  SimState& state_;
  double scale_;
  double drag_;
  double dt_;
};

/// Incline ramp used when a robot is first placed on the plane (s).
inline constexpr double kPlacementRamp = 1.0;

struct SettleOptions {
  double kinetic_threshold = 1e-6;  // J
  double max_time = 20.0;           // s of simulated time
  double quiet_time = 0.1;          // s the threshold must hold
  double slip_limit = 2.0;          // cm of net contact-set drift that counts as a slide
  double damping_scale = 1.0;
  double drag = 2.0;                // 1/s
  // Tilts the plane up from level over this many seconds first, like setting
  // the robot down before the board is raised.
  double incline_ramp = 0.0;        // s
};

struct SettleResult {
  bool converged = false;
  bool slipped = false;
  double elapsed = 0.0;
  double slip = 0.0;
};

/// Runs the dynamics with the given extra damping until the robot is at rest,
/// slides, or max_time passes. Restores the nominal damping afterwards.
/// Mean anchor displacement of the active contacts during the last step.
/// Internal deformation of the base cancels out; the whole robot sliding does not.
Eigen::Vector2d contact_drift(const SimState& state);

SettleResult settle(SimState& state, const SettleOptions& options = {});

/// Places the robot on a stable face in neutral stance and settles it.
/// Throws Error{Slip} if it slides, Error{NonConvergence} if it does not come to rest.
SimState init_resting(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                      const WorldConfig& world, int face);

/// Advances one timestep. Deterministic. Throws Error{Divergence} naming the
/// body whose state became non-finite.
void step_in_place(SimState& state);
SimState step(const SimState& state);

/// Sets actuator targets for every actuated cable; fractions multiply the
/// neutral rest length and must lie in [1 - max_contraction, 1]. The commanded
/// rest length follows at the actuator rate. On error the state is unchanged.
void apply_cable_targets_in_place(SimState& state, const std::vector<double>& fractions);
SimState apply_cable_targets(const SimState& state, const std::vector<double>& fractions);
/// Single-cable variant (cable index into the 24 cables, must be actuated).
void set_cable_target(SimState& state, int cable, double fraction);

/// Mass-weighted centre of mass of rods and payload, incline frame (cm).
Eigen::Vector3d total_com(const SimState& state);

std::array<Eigen::Vector3d, kNodeCount> node_positions(const SimState& state);
std::array<Eigen::Vector3d, kNodeCount> node_velocities(const SimState& state);

Energy energy(const SimState& state);
Eigen::Vector3d linear_momentum(const SimState& state);  // kg cm/s
Eigen::Vector3d angular_momentum(const SimState& state); // kg cm^2/s about the origin

/// Stable face whose three nodes all lie within contact tolerance, choosing
/// the lowest one when several qualify; -1 when none does.
int current_face(const SimState& state);

/// Commanded rest length of each cable as a fraction of its neutral length.
std::array<double, kCableCount> commanded_fractions(const SimState& state);

}  // namespace tensegrity
