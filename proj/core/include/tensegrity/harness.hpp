#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tensegrity/dynamics.hpp"
#include "tensegrity/policies.hpp"
#include "tensegrity/stability.hpp"

namespace tensegrity {

/// Everything needed to reproduce one scenario.
struct ScenarioConfig {
  double rod_length = 25.0;  // cm
  PhysicalParams physical;
  WorldConfig world;
  PolicyKind policy = PolicyKind::Single;
  PolicyParams policy_params;
  std::vector<int> gait;     // actuated cables in gait order; empty derives one
  int start_face = 1;
  double duration = 120.0;          // s
  double success_distance = 91.4;   // cm
  int trials = 5;                   // repetitions that must all succeed to count as reliable
  std::uint64_t seed = 1;
  double perturbation_deg = 2.0;    // initial yaw jitter for trials after the first
  double trace_interval = 0.02;     // s between trace samples
  FailureThresholds thresholds;
  std::string output_dir = ".";
};

void validate(const ScenarioConfig& config);

struct ComSample {
  double t = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  double height_pct = 0.0;
};

struct MarginSample {
  double t = 0.0;
  double uphill = 0.0;
  double downhill = 0.0;
  int contacts = 0;
};

struct TrialResult {
  bool valid = true;             // false when the dynamics diverged
  std::string diagnostic;
  double incline_deg = 0.0;
  PolicyKind policy = PolicyKind::Single;
  int trial_index = 0;
  double distance_along_incline = 0.0;  // cm, CoM displacement along +x
  double avg_velocity = 0.0;            // cm/s
  double elapsed = 0.0;                 // s from first actuation to goal or trial end
  bool success = false;
  FailureMode failure_mode = FailureMode::Stalled;
  int step_count = 0;                   // stable-face changes
  double neutral_height = 0.0;          // cm, CoM height above the plane at rest
  double max_com_height_pct = 0.0;     // over the trace from the first face change on
  std::vector<ComSample> com_trace;
  std::vector<MarginSample> margin_trace;
  std::vector<FaceChange> face_changes;
};

/// Topology with the configured (or derived) gait attached.
std::shared_ptr<const TensegrityTopology> scenario_topology(const ScenarioConfig& config);

/// The gait used when the config leaves it empty; derived once per physical
/// setup on flat ground and memoised.
std::vector<int> default_gait(const ScenarioConfig& config);

/// Settled start state for a trial, including the seeded yaw jitter.
SimState trial_start_state(const ScenarioConfig& config, int trial_index = 0);

/// Runs the compiled schedule from a settled start. Deterministic for a
/// given (config, trial_index).
TrialResult run_trial(const ScenarioConfig& config, int trial_index = 0);

/// Max over the trace of height / neutral_height * 100.
double com_height_ratio(const std::vector<ComSample>& trace, double neutral_height);

struct RequiredContractionRow {
  double incline_deg = 0.0;
  int step = 0;   // position in the gait
  int cable = 0;
  int face = 0;
  std::optional<double> fraction;  // nullopt when the actuator limit is not enough
};

/// Required contraction of every gait step at every incline. Each step starts
/// from the face and heading the robot reaches when walking the gait on flat
/// ground, re-settled on the incline. Rows are ordered by incline, then step.
std::vector<RequiredContractionRow> required_contraction_table(const ScenarioConfig& config,
                                                               const std::vector<double>& inclines,
                                                               const ContractionSearch& search = {},
                                                               unsigned threads = 0);

struct SweepPoint {
  double incline_deg = 0.0;
  int successes = 0;
  int trials = 0;
  double success_rate = 0.0;
  double avg_velocity = 0.0;  // mean over successful trials, 0 if none
  std::vector<TrialResult> results;
};

struct SweepResult {
  PolicyKind policy = PolicyKind::Single;
  std::vector<SweepPoint> points;
  /// Largest incline at which every trial succeeded; negative when none did.
  double max_reliable_incline = -1.0;
};

struct SweepOptions {
  unsigned threads = 0;        // 0: hardware concurrency
  bool keep_traces = false;    // drop per-trial traces to bound memory
};

/// Runs `trials_per_incline` trials at each incline. Inclines must be sorted
/// ascending. Results are ordered by incline then trial index regardless of
/// completion order.
SweepResult incline_sweep(const ScenarioConfig& base, const std::vector<double>& inclines, int trials_per_incline,
                          const SweepOptions& options = {});

}  // namespace tensegrity
