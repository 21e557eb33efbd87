#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tensegrity/dynamics.hpp"

namespace tensegrity {

enum class PolicyKind { Single, Simultaneous, Alternating };

std::string_view to_string(PolicyKind kind);
/// Parses "single", "simultaneous" or "alternating"; throws Error{InvalidParameter}.
PolicyKind parse_policy_kind(std::string_view text);

/// One cable's contract / hold / release profile. Rest-length fraction is 1
/// outside [t_contract_start, t_neutral] and 1 - contraction while held.
struct ActuationPhase {
  int cable = 0;
  double t_contract_start = 0.0;
  double t_full = 0.0;
  double t_release_start = 0.0;
  double t_neutral = 0.0;
  double contraction = 0.0;

  double fraction_at(double t) const;
};

/// Timing parameters. `overlap` means:
///  - Simultaneous: how long the next contraction overlaps the current release (0, ramp_time];
///  - Alternating: how long both cables are held at full contraction (0, hold_time).
///  - Single: unused.
/// `dwell_time` is the neutral pause between Single steps.
struct PolicyParams {
  double contraction = 0.5;
  double ramp_time = 1.0;
  double hold_time = 1.5;
  double overlap = 0.0;  // <= 0 selects the per-kind default
  double dwell_time = 0.5;
};

/// Fills in the per-kind default overlap when params.overlap <= 0.
PolicyParams resolve_defaults(PolicyKind kind, PolicyParams params);

struct PolicySchedule {
  PolicyKind kind = PolicyKind::Single;
  PolicyParams params;
  std::vector<int> sequence;
  std::vector<ActuationPhase> phases;
  double step_period = 0.0;   // spacing between consecutive contraction starts
  double cycle_period = 0.0;  // one pass through the sequence
  int repeat_count = 0;

  double duration() const { return cycle_period * repeat_count; }
};

/// Compiles an open-loop schedule. Throws Error{InvalidPolicy} when the
/// parameters cannot satisfy the kind's overlap rule or contraction exceeds
/// max_contraction.
PolicySchedule compile_policy(PolicyKind kind, const PolicyParams& params, const std::vector<int>& sequence,
                              int repeats, double max_contraction = 1.0);

/// Rest-length fraction of every cable at time t (1.0 for idle cables).
std::array<double, kCableCount> targets_at(const PolicySchedule& schedule, double t);

/// Checks the kind-specific overlap rule on a compiled schedule.
bool satisfies_kind_invariant(const PolicySchedule& schedule);

/// Result of probing one candidate cable quasi-statically.
struct StepProbe {
  int cable = -1;
  double advance = 0.0;  // cm the projected CoM moves along `direction`, relative to the base edge
  bool tipped = false;
};

struct StepSearchOptions {
  double contraction = 0.35;
  std::vector<int> candidates;  // empty: every actuated cable
};

/// Cable whose full contraction pushes the projected CoM furthest toward
/// `direction` (a unit 2-vector in the plane frame) relative to the leading
/// base edge. Throws Error{NoStepAvailable} when no cable makes progress.
int find_step_cable(const SimState& state, const Eigen::Vector2d& direction,
                    const StepSearchOptions& options = {});
std::vector<StepProbe> probe_step_cables(const SimState& state, const Eigen::Vector2d& direction,
                                         const StepSearchOptions& options = {});

struct Gait {
  int start_face = 0;
  std::vector<int> sequence;   // cable per step
  std::vector<int> faces;      // face the robot rests on before each step
  std::vector<Eigen::Matrix3d> orientations;  // body rotation at rest before each step
};

/// Derives the gait by repeatedly picking the step cable from the current
/// settled state and rolling onto the next face, until the start face recurs.
/// Throws Error{NoStepAvailable} if the walk does not close within `steps` steps.
Gait derive_gait(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                 const WorldConfig& world, int start_face, int steps = kActuatorCount);

/// Walks a given cable sequence on the configured plane, recording the
/// resting face and orientation before each step. Every cable must be actuated.
Gait walk_gait(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
               const WorldConfig& world, int start_face, const std::vector<int>& sequence, double contraction);

}  // namespace tensegrity
