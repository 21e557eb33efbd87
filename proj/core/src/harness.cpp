#include "tensegrity/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "json_codec.hpp"
#include "tensegrity/error.hpp"

namespace tensegrity {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Face changes shorter than this are treated as flicker during a roll.
constexpr double kFaceDebounce = 0.1;  // s

}  // namespace

void validate(const ScenarioConfig& config) {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (!(config.rod_length > 0.0)) fail("rod_length must be positive");
  if (!(config.duration > 0.0)) fail("duration must be positive");
  if (!(config.success_distance > 0.0)) fail("success_distance must be positive");
  if (config.trials < 1) fail("trials must be at least 1");
  if (!(config.trace_interval > 0.0)) fail("trace_interval must be positive");
  if (config.start_face < 0 || config.start_face >= kStableFaceCount) fail("start_face must lie in [0, 8)");
  if (!config.gait.empty() && config.gait.size() != static_cast<std::size_t>(kActuatorCount)) {
    fail("gait must list exactly 6 cables");
  }
  try {
    validate(config.physical);
    validate(config.world);
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::vector<int> default_gait(const ScenarioConfig& config) {
  static std::mutex mutex;
  static std::map<std::string, std::vector<int>> cache;
  WorldConfig flat = config.world;
  flat.incline_deg = 0.0;
  // Everything the derivation depends on, in canonical text form.
  const std::string key = detail::to_json(config.physical).dump() + detail::to_json(flat).dump() + ' ' +
                          std::to_string(config.rod_length) + ' ' + std::to_string(config.start_face);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto topology = std::make_shared<const TensegrityTopology>(build_six_bar(config.rod_length));
  const Gait gait = derive_gait(topology, config.physical, flat, config.start_face);
  std::lock_guard lock(mutex);
  cache[key] = gait.sequence;
  return gait.sequence;
}

std::shared_ptr<const TensegrityTopology> scenario_topology(const ScenarioConfig& config) {
  const std::vector<int> gait = config.gait.empty() ? default_gait(config) : config.gait;
  return std::make_shared<const TensegrityTopology>(
      with_actuators(build_six_bar(config.rod_length), gait, config.physical.max_contraction));
}

SimState trial_start_state(const ScenarioConfig& config, int trial_index) {
  SimState state = place_on_face(scenario_topology(config), config.physical, config.world, config.start_face);
  if (trial_index > 0 && config.perturbation_deg > 0.0) {
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(trial_index));
    std::uniform_real_distribution<double> jitter(-config.perturbation_deg, config.perturbation_deg);
    rotate_about_normal(state, jitter(rng) * kPi / 180.0);
  }
  return state;
}

double com_height_ratio(const std::vector<ComSample>& trace, double neutral_height) {
  if (!(neutral_height > 0.0)) throw Error(ErrorKind::InvalidParameter, "neutral height must be positive");
  double best = 0.0;
  for (const ComSample& s : trace) best = std::max(best, s.com.z() / neutral_height * 100.0);
  return best;
}

TrialResult run_trial(const ScenarioConfig& config, int trial_index) {
  validate(config);
  TrialResult result;
  result.incline_deg = config.world.incline_deg;
  result.policy = config.policy;
  result.trial_index = trial_index;

  SimState state = trial_start_state(config, trial_index);
  const int face0 = config.start_face;
  const Eigen::Vector3d start_com = total_com(state);

  TrialTrace trace;
  try {
    SettleOptions options;
    options.incline_ramp = kPlacementRamp;
    const SettleResult settled = settle(state, options);
    if (settled.slipped) {
      // Sliding off before the first actuation is a slip whatever the distance.
      const Eigen::Vector3d com = total_com(state);
      result.distance_along_incline = com.x() - start_com.x();
      result.neutral_height = start_com.z();
      result.max_com_height_pct = com_height_ratio({{state.time, com, 0.0}}, start_com.z());
      result.failure_mode = FailureMode::Slipped;
      return result;
    }
    if (!settled.converged) {
      result.valid = false;
      result.diagnostic = "start state did not settle";
      return result;
    }
  } catch (const Error& e) {
    result.valid = false;
    result.diagnostic = e.what();
    return result;
  }
  state.time = 0.0;

  const std::vector<int>& actuated = state.topology->actuators.sequence;
  const double cycle =
      compile_policy(config.policy, config.policy_params, actuated, 1, config.physical.max_contraction).cycle_period;
  const PolicySchedule schedule =
      compile_policy(config.policy, config.policy_params, actuated,
                     static_cast<int>(std::ceil(config.duration / cycle)) + 1, config.physical.max_contraction);
  // Actuators slew no faster than the schedule's own ramps.
  state.params.actuator_rate = schedule.params.contraction / schedule.params.ramp_time * (1.0 + 1e-9);

  const Eigen::Vector3d com0 = total_com(state);
  result.neutral_height = com0.z();

  int face = current_face(state);
  if (face < 0) face = face0;
  double face_x = com0.x();
  int candidate = face;
  double candidate_since = 0.0;
  Eigen::Vector2d drift = Eigen::Vector2d::Zero();
  double next_sample = 0.0;

  const auto sample = [&](const Eigen::Vector3d& com) {
    result.com_trace.push_back({state.time, com, com.z() / result.neutral_height * 100.0});
    MarginSample m;
    m.t = state.time;
    m.contacts = static_cast<int>(state.contact_set.size());
    if (const auto stance = stance_of(state)) {
      m.uphill = stance->margins.uphill;
      m.downhill = stance->margins.downhill;
      result.margin_trace.push_back(m);
    }
  };

  try {
    while (state.time < config.duration) {
      const auto targets = targets_at(schedule, state.time);
      for (int c : actuated) {
        CableState& cable = state.cables[c];
        cable.target_rest_length = targets[c] * cable.neutral_rest_length;
      }
      step_in_place(state);

      drift += contact_drift(state);
      trace.max_slip_between_face_changes = std::max(trace.max_slip_between_face_changes, drift.norm());

      const Eigen::Vector3d com = total_com(state);
      const int now = current_face(state);
      if (now >= 0 && now != candidate) {
        candidate = now;
        candidate_since = state.time;
      }
      if (candidate != face && now == candidate && state.time - candidate_since >= kFaceDebounce) {
        trace.face_changes.push_back({state.time, face, candidate, com.x() - face_x});
        face = candidate;
        face_x = com.x();
        drift.setZero();
      }

      if (state.time >= next_sample) {
        sample(com);
        next_sample += config.trace_interval;
      }

      const double distance = com.x() - com0.x();
      result.distance_along_incline = distance;
      if (distance >= config.success_distance) {
        trace.reached_goal = true;
        sample(com);
        break;
      }
      if (trace.max_slip_between_face_changes > config.thresholds.slip_distance) break;
      if (distance < -config.success_distance) break;
    }
  } catch (const Error& e) {
    result.valid = false;
    result.diagnostic = e.what();
  }

  result.elapsed = state.time;
  result.success = result.valid && trace.reached_goal;
  result.avg_velocity = result.elapsed > 0.0 ? result.distance_along_incline / result.elapsed : 0.0;
  result.failure_mode = classify_failure(trace, config.thresholds);
  result.step_count = static_cast<int>(trace.face_changes.size());
  result.face_changes = trace.face_changes;
  // The start stance is neutral by definition; the metric describes the gait
  // once it is under way, i.e. from the first face change on.
  if (!trace.face_changes.empty()) {
    const double since = trace.face_changes.front().time;
    std::vector<ComSample> steady;
    for (const ComSample& s : result.com_trace) {
      if (s.t >= since) steady.push_back(s);
    }
    result.max_com_height_pct = com_height_ratio(steady, result.neutral_height);
  } else {
    result.max_com_height_pct = com_height_ratio(result.com_trace, result.neutral_height);
  }
  return result;
}

namespace {

// Runs jobs [0, count) on a small pool; job(i) must only touch slot i.
template <typename Job>
void parallel_for(std::size_t count, unsigned threads, const Job& job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t j = next++; j < count; j = next++) {
      try {
        job(j);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<RequiredContractionRow> required_contraction_table(const ScenarioConfig& config,
                                                               const std::vector<double>& inclines,
                                                               const ContractionSearch& search, unsigned threads) {
  validate(config);
  const auto topology = scenario_topology(config);
  WorldConfig flat = config.world;
  flat.incline_deg = 0.0;
  const Gait gait = walk_gait(topology, config.physical, flat, config.start_face, topology->actuators.sequence,
                              std::min(config.policy_params.contraction, config.physical.max_contraction));

  const std::size_t steps = gait.sequence.size();
  std::vector<RequiredContractionRow> rows(inclines.size() * steps);
  parallel_for(rows.size(), threads, [&](std::size_t j) {
    const std::size_t k = j % steps;
    RequiredContractionRow& row = rows[j];
    row.incline_deg = inclines[j / steps];
    row.step = static_cast<int>(k);
    row.cable = gait.sequence[k];
    row.face = gait.faces[k];
    WorldConfig world = config.world;
    world.incline_deg = row.incline_deg;
    SimState state = place_with_rotation(topology, config.physical, world, row.face, gait.orientations[k]);
    SettleOptions options;
    options.incline_ramp = kPlacementRamp;
    const SettleResult settled = settle(state, options);
    if (settled.slipped || !settled.converged) return;
    row.fraction = required_contraction(state, row.cable, search);
  });
  return rows;
}

SweepResult incline_sweep(const ScenarioConfig& base, const std::vector<double>& inclines, int trials_per_incline,
                          const SweepOptions& options) {
  if (!std::is_sorted(inclines.begin(), inclines.end())) {
    throw Error(ErrorKind::InvalidParameter, "inclines must be sorted ascending");
  }
  if (trials_per_incline < 1) throw Error(ErrorKind::InvalidParameter, "need at least one trial per incline");
  SweepResult sweep;
  sweep.policy = base.policy;
  if (inclines.empty()) return sweep;

  // Resolve the gait once so worker threads share it.
  ScenarioConfig resolved = base;
  if (resolved.gait.empty()) resolved.gait = default_gait(resolved);

  struct Job {
    std::size_t point;
    int trial;
  };
  std::vector<Job> jobs;
  sweep.points.resize(inclines.size());
  for (std::size_t i = 0; i < inclines.size(); ++i) {
    sweep.points[i].incline_deg = inclines[i];
    sweep.points[i].trials = trials_per_incline;
    sweep.points[i].results.resize(trials_per_incline);
    for (int t = 0; t < trials_per_incline; ++t) jobs.push_back({i, t});
  }

  parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    ScenarioConfig config = resolved;
    config.world.incline_deg = inclines[jobs[j].point];
    TrialResult r = run_trial(config, jobs[j].trial);
    if (!options.keep_traces) {
      r.com_trace.clear();
      r.margin_trace.clear();
    }
    sweep.points[jobs[j].point].results[jobs[j].trial] = std::move(r);
  });

  for (SweepPoint& point : sweep.points) {
    double speed = 0.0;
    for (const TrialResult& r : point.results) {
      if (!r.success) continue;
      ++point.successes;
      speed += r.avg_velocity;
    }
    point.success_rate = static_cast<double>(point.successes) / point.trials;
    point.avg_velocity = point.successes > 0 ? speed / point.successes : 0.0;
    if (point.successes == point.trials) sweep.max_reliable_incline = point.incline_deg;
  }
  return sweep;
}

}  // namespace tensegrity
