// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria. An optional argument names a scenario config to use
// instead of the built-in defaults.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "tensegrity/error.hpp"
#include "tensegrity/harness.hpp"
#include "tensegrity/io.hpp"
#include "tensegrity/teleop.hpp"

using namespace tensegrity;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buffer[1024];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buffer, sizeof buffer, f, args);
  va_end(args);
  return buffer;
}

ScenarioConfig g_config;

ScenarioConfig config_at(double incline, PolicyKind policy) {
  ScenarioConfig c = g_config;
  c.world.incline_deg = incline;
  c.policy = policy;
  return c;
}

// 1. Geometry --------------------------------------------------------------

Outcome geometry() {
  const auto start = Clock::now();
  bool ok = true;
  double worst = 0.0;
  for (double L : {1.0, 25.0, 310.0}) {
    const TensegrityTopology t = build_six_bar(L);
    for (const Edge& e : t.rods) worst = std::max(worst, std::abs((t.nodes[e.a] - t.nodes[e.b]).norm() - L) / L);
    const double cable = L * std::sqrt(6.0) / 4.0;
    for (const Edge& e : t.cables) {
      worst = std::max(worst, std::abs((t.nodes[e.a] - t.nodes[e.b]).norm() - cable) / cable);
    }
    ok = ok && t.faces.size() == kStableFaceCount && stable_faces(t).size() == kStableFaceCount;
    for (int n = 0; n < kNodeCount; ++n) {
      int rods = 0, cables = 0;
      for (const Edge& e : t.rods) rods += e.a == n || e.b == n;
      for (const Edge& e : t.cables) cables += e.a == n || e.b == n;
      ok = ok && rods == 1 && cables == 4;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  ok = ok && worst <= 1e-9 && secs < 1.0;
  return {ok, fmt("max relative length error %.2e, 8 faces, degree 1+4, %.3f s", worst, secs)};
}

// 2. Slip bound --------------------------------------------------------------

Outcome slip_bound() {
  const double a = max_incline_no_slip(0.49), lo = max_incline_no_slip(0.42), hi = max_incline_no_slip(0.57);
  const bool ok = std::abs(a - 26.10) <= 0.01 && std::abs(lo - 22.78) <= 0.01 && std::abs(hi - 29.68) <= 0.01 &&
                  lo <= 23.0 && hi >= 29.0;
  return {ok, fmt("mu 0.49 -> %.3f deg, 0.42 -> %.3f, 0.57 -> %.3f", a, lo, hi)};
}

// 3. Hull oracle ---------------------------------------------------------------

Outcome hull_oracle() {
  const auto start = Clock::now();
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> coord(-20, 20);
  std::uniform_int_distribution<int> count(3, 10);
  int matched = 0, total = 0;
  while (total < 1000) {
    std::set<oracle::P> unique;
    const int n = count(rng);
    while (static_cast<int>(unique.size()) < n) unique.insert({coord(rng), coord(rng)});
    const std::vector<oracle::P> pts(unique.begin(), unique.end());
    const auto expected = oracle::brute_force_hull(pts);
    if (expected.size() < 3) continue;  // collinear draws have no polygon
    ++total;
    std::vector<Eigen::Vector3d> contacts;
    for (const auto& p : pts) contacts.emplace_back(p.first, p.second, 0.0);
    std::set<oracle::P> got;
    for (const auto& v : support_polygon(contacts).vertices) got.insert({v.x(), v.y()});
    matched += got == expected;
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {matched == total && secs < 5.0, fmt("%d/%d sets match, %.3f s", matched, total, secs)};
}

// 4. Dynamics sanity -----------------------------------------------------------

Outcome dynamics_sanity() {
  const auto topo = scenario_topology(g_config);
  // Momentum: robot floating with gravity off, spinning and drifting, one cable moving.
  WorldConfig space = g_config.world;
  space.gravity = 0.0;
  SimState s = place_on_face(topo, g_config.physical, space, g_config.start_face);
  int k = 0;
  for (RodBodyState& rod : s.rods) {
    rod.com_position.z() += 60.0;
    rod.linear_velocity = Eigen::Vector3d(4.0 + 0.5 * k, -1.0, 0.3 * k);
    rod.angular_velocity = Eigen::Vector3d(0.3, 0.1 * k, -0.2);
    ++k;
  }
  s.payload.position.z() += 60.0;
  s.payload.velocity = Eigen::Vector3d(4.0, -1.0, 0.0);
  set_cable_target(s, topo->actuators.sequence[0], 1.0 - 0.5 * g_config.physical.max_contraction);
  const Eigen::Vector3d p0 = linear_momentum(s), l0 = angular_momentum(s);
  SimState twin = s;
  for (int i = 0; i < 1000; ++i) step_in_place(s);
  const double dp = (linear_momentum(s) - p0).norm() / p0.norm();
  const double dl = (angular_momentum(s) - l0).norm() / l0.norm();
  for (int i = 0; i < 1000; ++i) twin = step(twin);
  bool identical = true;
  for (int r = 0; r < kRodCount; ++r) {
    identical = identical && s.rods[r].com_position == twin.rods[r].com_position &&
                s.rods[r].orientation.coeffs() == twin.rods[r].orientation.coeffs() &&
                s.rods[r].linear_velocity == twin.rods[r].linear_velocity;
  }

  // Invariants over a 60 s logged Alternating run on a slope, plus a repeat.
  const ScenarioConfig c = config_at(10.0, PolicyKind::Alternating);
  const auto logged_run = [&](long& violations, std::vector<double>& log) {
    SimState st = trial_start_state(c);
    SettleOptions o;
    o.incline_ramp = kPlacementRamp;
    settle(st, o);
    st.time = 0.0;
    const auto& seq = st.topology->actuators.sequence;
    const PolicySchedule schedule = compile_policy(c.policy, c.policy_params, seq, 20, c.physical.max_contraction);
    st.params.actuator_rate = schedule.params.contraction / schedule.params.ramp_time * (1.0 + 1e-9);
    long steps = 0;
    while (st.time < 60.0) {
      const auto targets = targets_at(schedule, st.time);
      for (int cable : seq) st.cables[cable].target_rest_length = targets[cable] * st.cables[cable].neutral_rest_length;
      step_in_place(st);
      ++steps;
      for (const CableState& cs : st.cables) violations += cs.current_tension < 0.0;
      for (const SuspensionSpring& sp : st.payload.suspension) violations += sp.tension < 0.0;
      for (const ContactPoint& cp : st.contacts) {
        violations += cp.normal_force < 0.0;
        violations += cp.tangential_force.norm() > st.world.friction * cp.normal_force * (1.0 + 1e-12) + 1e-12;
      }
      if (steps % 200 == 0) {
        const Eigen::Vector3d com = total_com(st);
        log.insert(log.end(), {st.time, com.x(), com.y(), com.z()});
      }
    }
    return steps;
  };
  long violations = 0, violations2 = 0;
  std::vector<double> log1, log2;
  const long steps = logged_run(violations, log1);
  logged_run(violations2, log2);
  identical = identical && log1 == log2;
  const bool ok = dp <= 1e-6 && dl <= 1e-6 && violations == 0 && identical;
  return {ok, fmt("momentum drift %.1e (linear) %.1e (angular); %ld steps, %ld invariant violations; "
                  "trajectories %s",
                  dp, dl, steps, violations, identical ? "bit-identical" : "differ")};
}

// 5. Required contraction trend -------------------------------------------------

Outcome contraction_trend() {
  const auto start = Clock::now();
  const std::vector<double> inclines = {0.0, 4.0, 8.0, 12.0, 16.0};
  const auto rows = required_contraction_table(g_config, inclines);
  const int steps = static_cast<int>(rows.size() / inclines.size());
  // NA (actuator limit not enough) ranks above every finite value.
  const auto value = [&](int i, int step) {
    const auto& r = rows[static_cast<std::size_t>(i * steps + step)];
    return r.fraction ? *r.fraction : 10.0;
  };
  std::ostringstream table;
  double worst_rho = 1.0;
  bool monotone = true;
  for (int step = 0; step < steps; ++step) {
    std::vector<double> y;
    table << (step ? "; " : "") << "step " << step << " cable " << rows[static_cast<std::size_t>(step)].cable << ":";
    for (std::size_t i = 0; i < inclines.size(); ++i) {
      y.push_back(value(static_cast<int>(i), step));
      table << ' ' << (y.back() > 1.0 ? std::string("NA") : fmt("%.3f", y.back()));
      if (i > 0 && y[i] < y[i - 1]) monotone = false;
    }
    const double rho = oracle::spearman(inclines, y);
    worst_rho = std::isnan(rho) ? -1.0 : std::min(worst_rho, rho);
  }
  // Steps 0,2,4 and 1,3,5 form the two groups.
  double spread = 0.0;
  for (std::size_t i = 0; i < inclines.size(); ++i) {
    for (int g = 0; g < 2; ++g) {
      double lo = 1e9, hi = -1e9;
      for (int step = g; step < steps; step += 2) {
        lo = std::min(lo, value(static_cast<int>(i), step));
        hi = std::max(hi, value(static_cast<int>(i), step));
      }
      spread = std::max(spread, hi - lo);
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const bool ok = steps == 6 && worst_rho >= 0.95 && monotone && spread <= 0.01 && secs < 600.0;
  return {ok, fmt("min Spearman %.3f, %s, max in-group spread %.4f, %.0f s [%s]", worst_rho,
                  monotone ? "monotone" : "not monotone", spread, secs, table.str().c_str())};
}

// 6/7. Sweeps -------------------------------------------------------------------

std::vector<SweepResult> g_sweeps;
double g_sweep_secs = 0.0;

const SweepResult& sweep_of(PolicyKind k) {
  for (const SweepResult& s : g_sweeps) {
    if (s.policy == k) return s;
  }
  throw Error(ErrorKind::InvalidParameter, "missing sweep");
}

void run_sweeps() {
  const auto start = Clock::now();
  std::vector<double> inclines;
  for (int i = 0; i <= 15; ++i) inclines.push_back(2.0 * i);
  for (PolicyKind k : {PolicyKind::Single, PolicyKind::Simultaneous, PolicyKind::Alternating}) {
    g_sweeps.push_back(incline_sweep(config_at(0.0, k), inclines, 5));
  }
  g_sweep_secs = std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sweep_summary(const SweepResult& s) {
  std::string out;
  for (const SweepPoint& p : s.points) out += fmt(" %g:%d", p.incline_deg, p.successes);
  return out;
}

Outcome capability_ordering() {
  const double single = sweep_of(PolicyKind::Single).max_reliable_incline;
  const double simultaneous = sweep_of(PolicyKind::Simultaneous).max_reliable_incline;
  const double alternating = sweep_of(PolicyKind::Alternating).max_reliable_incline;
  const double bound = max_incline_no_slip(g_config.world.friction);
  bool slipped_above = true;
  int above = 0;
  for (const SweepPoint& p : sweep_of(PolicyKind::Alternating).points) {
    if (p.incline_deg <= bound) continue;
    for (const TrialResult& r : p.results) {
      ++above;
      slipped_above = slipped_above && !r.success && r.failure_mode == FailureMode::Slipped;
    }
  }
  const bool ok = single < simultaneous && simultaneous <= alternating && single >= 14.0 && single <= 18.0 &&
                  alternating >= 20.0 && above > 0 && slipped_above && g_sweep_secs < 1800.0;
  return {ok, fmt("max reliable incline single %g, simultaneous %g, alternating %g deg; alternating above %.2f deg "
                  "%s; %.0f s; successes per incline: single%s | simultaneous%s | alternating%s",
                  single, simultaneous, alternating, bound, slipped_above ? "all slipped" : "not all slipped",
                  g_sweep_secs, sweep_summary(sweep_of(PolicyKind::Single)).c_str(),
                  sweep_summary(sweep_of(PolicyKind::Simultaneous)).c_str(),
                  sweep_summary(sweep_of(PolicyKind::Alternating)).c_str())};
}

Outcome speed_ratio() {
  const auto at10 = [](PolicyKind k) -> const SweepPoint* {
    for (const SweepPoint& p : sweep_of(k).points) {
      if (std::abs(p.incline_deg - 10.0) < 1e-9) return &p;
    }
    return nullptr;
  };
  const SweepPoint* single = at10(PolicyKind::Single);
  const SweepPoint* simultaneous = at10(PolicyKind::Simultaneous);
  if (!single || !simultaneous || single->successes == 0 || simultaneous->successes == 0) {
    return {false, "no successful trials at 10 deg to compare"};
  }
  const double ratio = simultaneous->avg_velocity / single->avg_velocity;
  return {ratio >= 1.5, fmt("simultaneous %.3f cm/s, single %.3f cm/s, ratio %.2f", simultaneous->avg_velocity,
                            single->avg_velocity, ratio)};
}

// 8. CoM height -----------------------------------------------------------------

Outcome com_height() {
  double h[3];
  bool success = true;
  int i = 0;
  for (PolicyKind k : {PolicyKind::Single, PolicyKind::Simultaneous, PolicyKind::Alternating}) {
    const TrialResult r = run_trial(config_at(0.0, k));
    success = success && r.success;
    h[i++] = r.max_com_height_pct;
  }
  const bool ok = success && h[2] < h[1] && h[1] < h[0] && h[2] >= 70.0 && h[2] <= 90.0 && h[1] >= 85.0 &&
                  h[1] <= 100.0;
  return {ok, fmt("max CoM height: single %.1f%%, simultaneous %.1f%%, alternating %.1f%%%s", h[0], h[1], h[2],
                  success ? "" : " (a flat-ground trial failed)")};
}

// 9. Stance geometry -------------------------------------------------------------

Outcome stance_geometry() {
  const ScenarioConfig c = config_at(10.0, PolicyKind::Alternating);
  SimState st = trial_start_state(c);
  SettleOptions o;
  o.incline_ramp = kPlacementRamp;
  settle(st, o);
  st.time = 0.0;
  const auto neutral = stance_of(st);
  if (!neutral) return {false, "no neutral stance"};
  const std::size_t neutral_contacts = st.contact_set.size();

  const auto& seq = st.topology->actuators.sequence;
  const PolicySchedule schedule = compile_policy(c.policy, c.policy_params, seq, 1, c.physical.max_contraction);
  st.params.actuator_rate = schedule.params.contraction / schedule.params.ramp_time * (1.0 + 1e-9);
  // Middle of the first window with two cables held at full contraction.
  const double when = 0.5 * (schedule.phases[1].t_full + schedule.phases[0].t_release_start);
  while (st.time < when) {
    const auto targets = targets_at(schedule, st.time);
    for (int cable : seq) st.cables[cable].target_rest_length = targets[cable] * st.cables[cable].neutral_rest_length;
    step_in_place(st);
  }
  const auto hold = stance_of(st);
  if (!hold) return {false, "no stance during the hold"};
  const std::size_t hold_contacts = st.contact_set.size();
  const double closer = 1.0 - hold->margins.uphill / neutral->margins.uphill;
  const bool ok = hold_contacts == 4 && neutral_contacts == 3 && closer >= 0.30 &&
                  hold->margins.downhill > neutral->margins.downhill;
  return {ok, fmt("neutral: %zu contacts, uphill %.2f cm, downhill %.2f cm; two-cable hold at t=%.2f s: %zu contacts, "
                  "uphill %.2f cm, downhill %.2f cm; CoM %.1f%% closer to the uphill edge",
                  neutral_contacts, neutral->margins.uphill, neutral->margins.downhill, when, hold_contacts,
                  hold->margins.uphill, hold->margins.downhill, 100.0 * closer)};
}

// 10. Replay determinism -----------------------------------------------------------

Outcome replay_determinism() {
  ScenarioConfig c = g_config;
  c.gait = scenario_topology(c)->actuators.sequence;
  SessionCore session(c);
  std::vector<TelemetryFrame> frames;
  std::string log = log_header_json(session) + '\n';
  const std::vector<std::pair<double, std::string>> script = {
      {0.2, R"({"type":"command","id":1,"command":"set_cable","cable":0,"fraction":0.6})"},
      {1.9, R"({"type":"command","id":2,"command":"set_cable","cable":0,"fraction":1.0})"},
      {2.4, R"({"type":"command","id":3,"command":"set_incline","incline_deg":8})"},
      {3.0, R"({"type":"command","id":4,"command":"run_policy","policy":"alternating"})"},
      {9.5, R"({"type":"command","id":5,"command":"pause"})"},
      {9.5, R"({"type":"command","id":6,"command":"set_speed","factor":0.5})"},
      {9.5, R"({"type":"command","id":7,"command":"resume"})"},
      {14.0, R"({"type":"command","id":8,"command":"stop_policy"})"},
      {15.0, R"({"type":"command","id":9,"command":"reset","face":4})"},
  };
  for (const auto& [t, text] : script) {
    session.advance_to(t, frames);
    if (session.apply(parse_command(text)).accepted) log += log_entry_json(session.log().back()) + '\n';
  }
  session.advance_to(17.0, frames);
  log += log_end_json(session) + '\n';
  const ReplayResult first = replay_log(log, true);
  const ReplayResult second = replay_log(log);
  bool same_frames = first.stream.size() == frames.size();
  for (std::size_t i = 0; same_frames && i < frames.size(); ++i) {
    same_frames = frame_to_json(first.stream[i], false) == frame_to_json(frames[i], false);
  }
  const bool ok = first.hash == session.stream_hash().hex() && second.hash == first.hash && same_frames &&
                  first.recorded_hash == first.hash;
  return {ok, fmt("%zu frames, %zu commands; live %s, replay %s", frames.size(), session.log().size(),
                  session.stream_hash().hex().c_str(), first.hash.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) {
    try {
      g_config = load_scenario(argv[1]);
    } catch (const Error& e) {
      std::fprintf(stderr, "config: %s\n", e.what());
      return 100;
    }
  }
  const auto start = Clock::now();
  const auto timed = [](const char* label, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", label, o.detail.c_str());
    std::fflush(stdout);
    return o.pass ? 0 : 1;
  };
  int failed = 0;
  failed += timed("geometry exactness", geometry);
  failed += timed("slip bound", slip_bound);
  failed += timed("hull oracle", hull_oracle);
  failed += timed("dynamics sanity", dynamics_sanity);
  failed += timed("required contraction trend", contraction_trend);
  try {
    run_sweeps();
  } catch (const std::exception& e) {
    std::printf("sweeps failed: %s\n", e.what());
  }
  failed += timed("policy capability ordering", capability_ordering);
  failed += timed("speed ratio at 10 deg", speed_ratio);
  failed += timed("CoM height on flat ground", com_height);
  failed += timed("stance geometry at 10 deg", stance_geometry);
  failed += timed("replay determinism", replay_determinism);
  std::printf("%d of 10 criteria failed (%.0f s)\n", failed,
              std::chrono::duration<double>(Clock::now() - start).count());
  return failed;
}
