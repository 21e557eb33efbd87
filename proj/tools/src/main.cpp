#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "serve.hpp"
#include "tensegrity/error.hpp"
#include "tensegrity/harness.hpp"
#include "tensegrity/io.hpp"
#include "tensegrity/teleop.hpp"

namespace {

namespace fs = std::filesystem;
using namespace tensegrity;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitTrialFailure = 2;
constexpr int kExitConfig = 3;

std::vector<double> grid(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw Error(ErrorKind::Config, "need --step > 0 and --to >= --from");
  std::vector<double> out;
  const long n = std::lround(std::floor((to - from) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(from + static_cast<double>(i) * step);
  return out;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

struct Common {
  std::string config_path;
  std::optional<std::string> policy;
  std::optional<double> incline;
  std::optional<std::string> out;

  ScenarioConfig load() const {
    ScenarioConfig config = load_scenario(config_path);
    try {
      if (policy) config.policy = parse_policy_kind(*policy);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
    if (incline) config.world.incline_deg = *incline;
    if (out) config.output_dir = *out;
    validate(config);
    return config;
  }
};

int run_command(const Common& common, int trial) {
  const ScenarioConfig config = common.load();
  const TrialResult result = run_trial(config, trial);
  write_text(path_in(config.output_dir, "result.json"), trial_result_to_json(result));
  write_text(path_in(config.output_dir, "com_trace.csv"), com_trace_csv(result));
  write_text(path_in(config.output_dir, "margins.csv"), margins_csv(result));
  std::cout << to_string(result.policy) << " at " << result.incline_deg << " deg: "
            << (result.success ? "success" : "failure (" + std::string(to_string(result.failure_mode)) + ")")
            << ", distance " << result.distance_along_incline << " cm in " << result.elapsed << " s, "
            << result.avg_velocity << " cm/s, " << result.step_count << " steps, max height "
            << result.max_com_height_pct << "%\n";
  if (!result.valid) std::cerr << "invalid trial: " << result.diagnostic << '\n';
  return result.success ? kExitOk : kExitTrialFailure;
}

int sweep_command(const Common& common, double from, double to, double step, std::vector<std::string> policies,
                  std::optional<int> trials, unsigned threads) {
  const ScenarioConfig config = common.load();
  const std::vector<double> inclines = grid(from, to, step);
  if (policies.empty()) policies.push_back(std::string(to_string(config.policy)));
  std::vector<SweepResult> sweeps;
  for (const std::string& name : policies) {
    ScenarioConfig c = config;
    try {
      c.policy = parse_policy_kind(name);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
    SweepOptions options;
    options.threads = threads;
    sweeps.push_back(incline_sweep(c, inclines, trials.value_or(c.trials), options));
    const SweepResult& s = sweeps.back();
    std::cout << name << ": max reliable incline " << s.max_reliable_incline << " deg\n";
  }
  write_text(path_in(config.output_dir, "sweep.csv"), sweep_csv(sweeps));
  write_text(path_in(config.output_dir, "sweep.json"), sweep_to_json(sweeps));
  return kExitOk;
}

int replay_command(const std::string& log_path, const std::optional<std::string>& frames_out) {
  const ReplayResult replay = replay_log(read_text(log_path), frames_out.has_value());
  std::cout << "frames " << replay.frames << ", end time " << replay.end_time << " s, hash " << replay.hash;
  if (replay.recorded_hash) {
    std::cout << (replay.hash == *replay.recorded_hash ? " (matches recording)" : " (recording has ")
              << (replay.hash == *replay.recorded_hash ? "" : *replay.recorded_hash + ")");
  }
  std::cout << '\n';
  if (frames_out) {
    std::string text;
    for (const TelemetryFrame& f : replay.stream) text += frame_to_json(f, false) + '\n';
    write_text(*frames_out, text);
  }
  if (replay.recorded_hash && replay.hash != *replay.recorded_hash) return kExitTrialFailure;
  return kExitOk;
}

int export_topology(const Common& common, const std::string& file) {
  const ScenarioConfig config = common.load();
  write_text(file, topology_to_json(*scenario_topology(config)));
  return kExitOk;
}

int export_schedule(const Common& common, int cycles, double interval) {
  const ScenarioConfig config = common.load();
  const auto topology = scenario_topology(config);
  PolicySchedule schedule;
  try {
    schedule = compile_policy(config.policy, config.policy_params, topology->actuators.sequence, cycles,
                              config.physical.max_contraction);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  write_text(path_in(config.output_dir, "schedule.json"), schedule_to_json(schedule));
  write_text(path_in(config.output_dir, "schedule.csv"), schedule_csv(schedule, interval));
  return kExitOk;
}

int export_contraction(const Common& common, double from, double to, double step, unsigned threads) {
  const ScenarioConfig config = common.load();
  const auto rows = required_contraction_table(config, grid(from, to, step), {}, threads);
  write_text(path_in(config.output_dir, "required_contraction.csv"), required_contraction_csv(rows));
  for (const RequiredContractionRow& r : rows) {
    std::cout << r.incline_deg << " deg, step " << r.step << " (cable " << r.cable << "): "
              << (r.fraction ? std::to_string(*r.fraction) : std::string("NA")) << '\n';
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& common, bool with_policy) {
  cmd->add_option("--config", common.config_path, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  if (with_policy) {
    cmd->add_option("--policy", common.policy, "single, simultaneous or alternating");
    cmd->add_option("--incline-deg", common.incline, "incline angle in degrees");
  }
  cmd->add_option("--out", common.out, "output directory (overrides output_dir)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Six-bar tensegrity incline simulator"};
  app.require_subcommand(1);

  Common common;
  int trial = 0;
  auto* run = app.add_subcommand("run", "simulate one trial and write result.json, com_trace.csv, margins.csv");
  add_common(run, common, true);
  run->add_option("--trial", trial, "trial index; indices above 0 add the seeded yaw jitter")->check(CLI::NonNegativeNumber);

  double from = 0.0, to = 30.0, step = 2.0;
  std::vector<std::string> policies;
  std::optional<int> trials;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "incline sweep, writes sweep.csv and sweep.json");
  add_common(sweep, common, true);
  sweep->add_option("--from", from, "first incline (deg)");
  sweep->add_option("--to", to, "last incline (deg)");
  sweep->add_option("--step", step, "incline step (deg)");
  sweep->add_option("--policies", policies, "policies to sweep (default: the config's)");
  sweep->add_option("--trials", trials, "trials per incline (default: config trials)");
  sweep->add_option("--threads", threads, "worker threads (0: all cores)");

  cli::ServeOptions serve_options;
  auto* serve = app.add_subcommand("serve", "teleoperation server (WebSocket, JSON messages)");
  add_common(serve, common, true);
  serve->add_option("--port", serve_options.port, "TCP port")->required();
  serve->add_option("--address", serve_options.address, "bind address");
  serve->add_option("--assets", serve_options.assets_dir, "directory of static console files")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--log-dir", serve_options.log_dir, "directory for session command logs");
  serve->add_option("--frame-rate", serve_options.frame_rate, "telemetry frames per simulated second");
  serve->add_flag("--once", serve_options.once, "exit after the first session");

  std::string log_path;
  std::optional<std::string> frames_out;
  auto* replay = app.add_subcommand("replay", "re-run a session log and print the telemetry stream hash");
  replay->add_option("--log", log_path, "session log (JSON lines)")->required()->check(CLI::ExistingFile);
  replay->add_option("--frames", frames_out, "write the replayed frames as JSON lines");

  auto* exp = app.add_subcommand("export", "write derived artefacts");
  exp->require_subcommand(1);
  std::string topology_file = "topology.json";
  auto* exp_topology = exp->add_subcommand("topology", "topology JSON");
  add_common(exp_topology, common, false);
  exp_topology->add_option("--file", topology_file, "output file");
  int cycles = 1;
  double interval = 0.05;
  auto* exp_schedule = exp->add_subcommand("schedule", "compiled schedule JSON and per-cable CSV");
  add_common(exp_schedule, common, true);
  exp_schedule->add_option("--cycles", cycles, "gait cycles")->check(CLI::PositiveNumber);
  exp_schedule->add_option("--interval", interval, "CSV sample interval (s)");
  double c_from = 0.0, c_to = 16.0, c_step = 4.0;
  auto* exp_contraction = exp->add_subcommand("contraction", "required contraction per gait step and incline");
  add_common(exp_contraction, common, false);
  exp_contraction->add_option("--from", c_from, "first incline (deg)");
  exp_contraction->add_option("--to", c_to, "last incline (deg)");
  exp_contraction->add_option("--step", c_step, "incline step (deg)");
  exp_contraction->add_option("--threads", threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return run_command(common, trial);
    if (*sweep) return sweep_command(common, from, to, step, policies, trials, threads);
    if (*serve) return cli::serve(common.load(), serve_options);
    if (*replay) return replay_command(log_path, frames_out);
    if (*exp_topology) return export_topology(common, topology_file);
    if (*exp_schedule) return export_schedule(common, cycles, interval);
    if (*exp_contraction) return export_contraction(common, c_from, c_to, c_step, threads);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    const bool bad_input = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InvalidParameter ||
                           e.kind() == ErrorKind::Protocol;
    return bad_input ? kExitConfig : kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
