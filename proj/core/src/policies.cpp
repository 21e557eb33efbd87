#include "tensegrity/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "tensegrity/error.hpp"
#include "tensegrity/stability.hpp"

namespace tensegrity {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Single: return "single";
    case PolicyKind::Simultaneous: return "simultaneous";
    case PolicyKind::Alternating: return "alternating";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "single") return PolicyKind::Single;
  if (text == "simultaneous") return PolicyKind::Simultaneous;
  if (text == "alternating") return PolicyKind::Alternating;
  throw Error(ErrorKind::InvalidParameter, "unknown policy '" + std::string(text) + "'");
}

double ActuationPhase::fraction_at(double t) const {
  if (t <= t_contract_start || t >= t_neutral) return 1.0;
  if (t < t_full) return 1.0 - contraction * (t - t_contract_start) / (t_full - t_contract_start);
  if (t <= t_release_start) return 1.0 - contraction;
  return 1.0 - contraction * (t_neutral - t) / (t_neutral - t_release_start);
}

PolicyParams resolve_defaults(PolicyKind kind, PolicyParams params) {
  if (params.overlap > 0.0) return params;
  switch (kind) {
    case PolicyKind::Single: params.overlap = 0.0; break;
    case PolicyKind::Simultaneous: params.overlap = params.ramp_time; break;
    case PolicyKind::Alternating: params.overlap = 0.5 * params.hold_time; break;
  }
  return params;
}

PolicySchedule compile_policy(PolicyKind kind, const PolicyParams& raw, const std::vector<int>& sequence,
                              int repeats, double max_contraction) {
  const auto reject = [](const std::string& msg) { throw Error(ErrorKind::InvalidPolicy, msg); };
  const PolicyParams params = resolve_defaults(kind, raw);
  if (!(params.contraction > 0.0 && params.contraction <= max_contraction && params.contraction < 1.0)) {
    reject("contraction must lie in (0, max_contraction]");
  }
  if (!(params.ramp_time > 0.0) || !(params.hold_time > 0.0)) reject("ramp and hold times must be positive");
  if (params.dwell_time < 0.0) reject("dwell time must be non-negative");
  if (sequence.empty()) reject("gait sequence is empty");
  if (repeats < 0) reject("repeat count must be non-negative");
  if (std::set<int>(sequence.begin(), sequence.end()).size() != sequence.size()) {
    reject("gait sequence repeats a cable");
  }
  if (raw.overlap < 0.0) reject("overlap must be positive");

  // Each phase starts at k * stride; how long it stays fully contracted and
  // how far apart phases sit depends on the kind.
  double stride = 0.0;
  double held = params.hold_time;
  switch (kind) {
    case PolicyKind::Single:
      stride = 2.0 * params.ramp_time + params.hold_time + params.dwell_time;
      break;
    case PolicyKind::Simultaneous:
      if (params.overlap > params.ramp_time) reject("simultaneous overlap must not exceed the ramp time");
      stride = 2.0 * params.ramp_time + params.hold_time - params.overlap;
      break;
    case PolicyKind::Alternating:
      if (params.overlap >= params.hold_time) reject("alternating overlap must be shorter than the hold time");
      // The next cable starts once this one has been held for hold_time; this
      // one releases `overlap` after the next is fully contracted.
      stride = params.ramp_time + params.hold_time;
      held = params.hold_time + params.ramp_time + params.overlap;
      break;
  }

  PolicySchedule schedule;
  schedule.kind = kind;
  schedule.params = params;
  schedule.sequence = sequence;
  schedule.step_period = stride;
  schedule.cycle_period = stride * static_cast<double>(sequence.size());
  schedule.repeat_count = repeats;
  const std::size_t count = sequence.size() * static_cast<std::size_t>(repeats);
  for (std::size_t k = 0; k < count; ++k) {
    ActuationPhase phase;
    phase.cable = sequence[k % sequence.size()];
    phase.contraction = params.contraction;
    phase.t_contract_start = static_cast<double>(k) * stride;
    phase.t_full = phase.t_contract_start + params.ramp_time;
    phase.t_release_start = phase.t_full + held;
    phase.t_neutral = phase.t_release_start + params.ramp_time;
    schedule.phases.push_back(phase);
  }
  if (!satisfies_kind_invariant(schedule)) reject("parameters violate the policy's overlap rule");
  return schedule;
}

std::array<double, kCableCount> targets_at(const PolicySchedule& schedule, double t) {
  std::array<double, kCableCount> out;
  out.fill(1.0);
  if (schedule.phases.empty() || t <= 0.0) return out;
  // Phases are sorted by start time and each spans less than a few strides.
  const double span = schedule.phases.front().t_neutral - schedule.phases.front().t_contract_start;
  const auto first = std::lower_bound(schedule.phases.begin(), schedule.phases.end(), t - span - 1e-9,
                                      [](const ActuationPhase& p, double v) { return p.t_contract_start < v; });
  for (auto it = first; it != schedule.phases.end() && it->t_contract_start < t; ++it) {
    out[it->cable] = std::min(out[it->cable], it->fraction_at(t));
  }
  return out;
}

bool satisfies_kind_invariant(const PolicySchedule& schedule) {
  const auto& ph = schedule.phases;
  for (const ActuationPhase& p : ph) {
    if (!(p.t_contract_start < p.t_full && p.t_full <= p.t_release_start && p.t_release_start < p.t_neutral)) {
      return false;
    }
  }
  for (std::size_t k = 0; k + 1 < ph.size(); ++k) {
    const ActuationPhase& cur = ph[k];
    const ActuationPhase& next = ph[k + 1];
    switch (schedule.kind) {
      case PolicyKind::Single:
        if (next.t_contract_start < cur.t_neutral) return false;
        break;
      case PolicyKind::Simultaneous:
        // Next contraction begins inside the current release, no gap.
        if (!(next.t_contract_start >= cur.t_release_start && next.t_contract_start < cur.t_neutral)) return false;
        break;
      case PolicyKind::Alternating:
        if (!(next.t_full < cur.t_release_start)) return false;
        if (k + 2 < ph.size() && !(ph[k + 2].t_full >= cur.t_neutral)) return false;
        break;
    }
  }
  return true;
}

std::vector<StepProbe> probe_step_cables(const SimState& state, const Eigen::Vector2d& direction,
                                         const StepSearchOptions& options) {
  const auto start = stance_of(state, direction);
  if (!start) throw Error(ErrorKind::NoStepAvailable, "robot is not resting on a support polygon");
  const int front = extremal_edge(start->polygon, direction);
  const double d0 = edge_distance(start->polygon, front, start->projected_com);

  std::vector<int> candidates = options.candidates;
  if (candidates.empty()) candidates = state.topology->actuators.sequence;

  const ContractionSearch quasi;
  const double tip = 0.12 * state.topology->rod_length;
  std::vector<StepProbe> probes;
  for (int cable : candidates) {
    SimState s = state;
    s.params.actuator_rate = quasi.ramp_rate;
    set_cable_target(s, cable, 1.0 - options.contraction);
    const HeavyDamping damping(s, quasi.damping_scale, quasi.drag);
    const Eigen::Vector2d p0 = project_com(total_com(s), s.world);
    const double limit = s.time + options.contraction / quasi.ramp_rate + 5.0;
    StepProbe probe;
    probe.cable = cable;
    int counter = 0;
    double quiet = 0.0;
    Eigen::Vector2d p = p0;
    while (s.time < limit) {
      step_in_place(s);
      if (++counter % 20) continue;
      p = project_com(total_com(s), s.world);
      if ((p - p0).norm() > tip) {
        probe.tipped = true;
        break;
      }
      const bool idle = s.cables[cable].commanded_rest_length == s.cables[cable].target_rest_length;
      if (idle && energy(s).kinetic < 1e-7) {
        quiet += 20 * s.world.dt;
        if (quiet > 0.2) break;
      } else {
        quiet = 0.0;
      }
    }
    probe.advance = d0 - edge_distance(start->polygon, front, p);
    probes.push_back(probe);
  }
  return probes;
}

int find_step_cable(const SimState& state, const Eigen::Vector2d& direction, const StepSearchOptions& options) {
  const auto probes = probe_step_cables(state, direction, options);
  const StepProbe* best = nullptr;
  for (const StepProbe& p : probes) {
    if (!p.tipped || p.advance <= 0.0) continue;
    if (best == nullptr || p.advance > best->advance) best = &p;
  }
  if (best == nullptr) throw Error(ErrorKind::NoStepAvailable, "no cable tips the robot forward");
  return best->cable;
}

namespace {

// Contracts `cable` at the nominal rate until the robot reaches another face,
// then releases and settles. Returns the settled face.
int roll_over(SimState& state, int cable, double contraction, double rate, int step) {
  const int face = current_face(state);
  state.params.actuator_rate = rate;
  set_cable_target(state, cable, 1.0 - contraction);
  const double limit = state.time + 10.0;
  while (state.time < limit) {
    step_in_place(state);
    const int now = current_face(state);
    if (now >= 0 && now != face) break;
  }
  set_cable_target(state, cable, 1.0);
  const SettleResult settled = settle(state);
  if (!settled.converged) throw Error(ErrorKind::NonConvergence, "gait walk failed to settle");
  const int now = current_face(state);
  if (now == face) throw Error(ErrorKind::NoStepAvailable, "step " + std::to_string(step) + " did not leave its face");
  return now;
}

}  // namespace

Gait derive_gait(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
                 const WorldConfig& world, int start_face, int steps) {
  std::vector<int> all(kCableCount);
  std::iota(all.begin(), all.end(), 0);
  auto search_topology =
      std::make_shared<const TensegrityTopology>(with_actuators(*topology, all, params.max_contraction));

  Gait gait;
  gait.start_face = start_face;
  SimState state = init_resting(search_topology, params, world, start_face);
  StepSearchOptions options;
  const Eigen::Vector2d uphill = Eigen::Vector2d::UnitX();
  for (int k = 0; k < steps; ++k) {
    gait.faces.push_back(current_face(state));
    gait.orientations.push_back(body_rotation(state));
    const int cable = find_step_cable(state, uphill, options);
    gait.sequence.push_back(cable);
    roll_over(state, cable, options.contraction, params.actuator_rate, k);
  }
  if (current_face(state) != start_face) {
    throw Error(ErrorKind::NoStepAvailable, "gait does not return to its start face");
  }
  if (std::set<int>(gait.sequence.begin(), gait.sequence.end()).size() != gait.sequence.size()) {
    throw Error(ErrorKind::NoStepAvailable, "gait reuses a cable");
  }
  return gait;
}

Gait walk_gait(std::shared_ptr<const TensegrityTopology> topology, const PhysicalParams& params,
               const WorldConfig& world, int start_face, const std::vector<int>& sequence, double contraction) {
  Gait gait;
  gait.start_face = start_face;
  gait.sequence = sequence;
  SimState state = init_resting(std::move(topology), params, world, start_face);
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    gait.faces.push_back(current_face(state));
    gait.orientations.push_back(body_rotation(state));
    roll_over(state, sequence[k], contraction, params.actuator_rate, static_cast<int>(k));
  }
  return gait;
}

}  // namespace tensegrity
