#include "tensegrity/teleop.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_codec.hpp"
#include "tensegrity/error.hpp"

namespace tensegrity {

using detail::Json;

namespace {

constexpr std::pair<CommandKind, const char*> kCommandNames[] = {
    {CommandKind::SetCable, "set_cable"},   {CommandKind::RunPolicy, "run_policy"},
    {CommandKind::StopPolicy, "stop_policy"}, {CommandKind::SetIncline, "set_incline"},
    {CommandKind::Reset, "reset"},          {CommandKind::Pause, "pause"},
    {CommandKind::Resume, "resume"},        {CommandKind::SetSpeed, "set_speed"},
};

constexpr double kMinSpeed = 0.01;
constexpr double kMaxSpeed = 100.0;
// Policies started from the console run for this many gait cycles.
constexpr int kPolicyCycles = 1000;

CommandKind command_kind(const std::string& name) {
  for (const auto& [kind, text] : kCommandNames) {
    if (name == text) return kind;
  }
  throw Error(ErrorKind::Protocol, "unknown command '" + name + "'");
}

Json parse_object(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorKind::Protocol, "message is not valid JSON");
  }
  if (!j.is_object()) throw Error(ErrorKind::Protocol, "message must be a JSON object");
  return j;
}

Command command_from_json(const Json& j) {
  Command c;
  detail::ObjectReader r(j, "command");
  std::string type;
  std::string name;
  r.read("type", type);
  if (type != "command") throw Error(ErrorKind::Protocol, "expected a message of type 'command'");
  r.read("id", c.id);
  r.read("command", name);
  c.kind = command_kind(name);
  const auto need = [&](const char* key, auto& out) {
    if (!r.find(key)) throw Error(ErrorKind::Protocol, std::string("missing field '") + key + "'");
    r.read(key, out);
  };
  switch (c.kind) {
    case CommandKind::SetCable:
      need("cable", c.cable);
      need("fraction", c.fraction);
      break;
    case CommandKind::RunPolicy: {
      std::string policy;
      need("policy", policy);
      try {
        c.policy = parse_policy_kind(policy);
      } catch (const Error& e) {
        throw Error(ErrorKind::Protocol, e.what());
      }
      if (const Json* params = r.find("params")) detail::from_json(*params, c.params, "command.params");
      break;
    }
    case CommandKind::SetIncline: need("incline_deg", c.incline_deg); break;
    case CommandKind::Reset: need("face", c.face); break;
    case CommandKind::SetSpeed: need("factor", c.speed); break;
    case CommandKind::StopPolicy:
    case CommandKind::Pause:
    case CommandKind::Resume: break;
  }
  r.finish();
  return c;
}

Json command_json(const Command& c) {
  Json j = {{"type", "command"}, {"id", c.id}, {"command", std::string(to_string(c.kind))}};
  switch (c.kind) {
    case CommandKind::SetCable:
      j["cable"] = c.cable;
      j["fraction"] = c.fraction;
      break;
    case CommandKind::RunPolicy:
      j["policy"] = std::string(to_string(c.policy));
      j["params"] = detail::to_json(c.params);
      break;
    case CommandKind::SetIncline: j["incline_deg"] = c.incline_deg; break;
    case CommandKind::Reset: j["face"] = c.face; break;
    case CommandKind::SetSpeed: j["factor"] = c.speed; break;
    case CommandKind::StopPolicy:
    case CommandKind::Pause:
    case CommandKind::Resume: break;
  }
  return j;
}

Json frame_json(const TelemetryFrame& f, bool include_wall) {
  Json nodes = Json::array();
  for (const auto& p : f.nodes) nodes.push_back(detail::to_json(p));
  Json polygon = Json::array();
  for (const auto& v : f.support_polygon) polygon.push_back(detail::to_json(v));
  Json cables = Json::array();
  for (int c = 0; c < kCableCount; ++c) {
    cables.push_back(
        {{"commanded", f.commanded_fraction[c]}, {"target", f.target_fraction[c]}, {"tension", f.tension[c]}});
  }
  Json j = {{"type", "telemetry"},
            {"frame", f.frame},
            {"t", f.time},
            {"paused", f.paused},
            {"policy", f.policy ? Json(std::string(to_string(*f.policy))) : Json(nullptr)},
            {"incline_deg", f.incline_deg},
            {"nodes", nodes},
            {"com", detail::to_json(f.com)},
            {"projected_com", detail::to_json(f.projected_com)},
            {"support_polygon", polygon},
            {"margins", f.margins ? Json{{"uphill", f.margins->uphill}, {"downhill", f.margins->downhill}}
                                  : Json(nullptr)},
            {"cables", cables},
            {"contacts", f.contacts},
            {"face", f.face},
            {"distance", f.distance},
            {"height_pct", f.height_pct}};
  if (include_wall) j["wall"] = f.wall;
  return j;
}

std::string hex64(std::uint64_t v) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

}  // namespace

std::string_view to_string(CommandKind kind) {
  for (const auto& [k, text] : kCommandNames) {
    if (k == kind) return text;
  }
  return "unknown";
}

Command parse_command(const std::string& text) {
  try {
    return command_from_json(parse_object(text));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Protocol) throw;
    throw Error(ErrorKind::Protocol, e.what());
  }
}

std::string command_to_json(const Command& command) { return command_json(command).dump(); }

std::string reply_to_json(const Reply& r) {
  Json j = {{"type", r.accepted ? "ack" : "reject"},
            {"id", r.id},
            {"command", std::string(to_string(r.kind))},
            {"t", r.time}};
  if (!r.accepted) {
    j["reason"] = r.reason;
    j["message"] = r.message;
  }
  return j.dump();
}

std::string error_frame_json(const std::string& reason, const std::string& message) {
  return Json{{"type", "error"}, {"reason", reason}, {"message", message}}.dump();
}

std::string frame_to_json(const TelemetryFrame& frame, bool include_wall) {
  return frame_json(frame, include_wall).dump();
}

void StreamHash::add(const TelemetryFrame& frame) {
  for (const unsigned char c : frame_to_json(frame, false)) {
    hash_ ^= c;
    hash_ *= 1099511628211ull;
  }
  ++frames_;
}

std::string StreamHash::hex() const { return hex64(hash_); }

// ---------------------------------------------------------------------------
// SessionCore

SessionCore::SessionCore(ScenarioConfig config, double frame_rate)
    : config_(std::move(config)), frame_rate_(frame_rate) {
  validate(config_);
  if (!(frame_rate_ > 0.0)) throw Error(ErrorKind::Config, "frame rate must be positive");
  if (config_.gait.empty()) config_.gait = default_gait(config_);
  topology_ = scenario_topology(config_);
  reset_to(config_.start_face);
  state_.time = 0.0;
  // Frame 0 shows the settled start, before any command can touch it.
  emit(pending_);
}

void SessionCore::reset_to(int face) {
  const double t = state_.time;
  state_ = place_on_face(topology_, config_.physical, state_.topology ? state_.world : config_.world, face);
  SettleOptions options;
  options.incline_ramp = kPlacementRamp;
  settle(state_, options);
  state_.time = t;
  schedule_.reset();
  const Eigen::Vector3d com = total_com(state_);
  origin_x_ = com.x();
  neutral_height_ = com.z();
}

std::string SessionCore::hello_json() const {
  const Json j = {{"type", "hello"},
                  {"protocol", kProtocolVersion},
                  {"frame_rate", frame_rate_},
                  {"dt", config_.world.dt},
                  {"config", detail::to_json(config_)},
                  {"topology", detail::to_json(*topology_)}};
  return j.dump();
}

Reply SessionCore::reject(const Command& command, std::string reason, std::string message) const {
  Reply r;
  r.accepted = false;
  r.id = command.id;
  r.kind = command.kind;
  r.time = state_.time;
  r.reason = std::move(reason);
  r.message = std::move(message);
  return r;
}

Reply SessionCore::apply(const Command& command) {
  const std::vector<int>& actuated = topology_->actuators.sequence;
  switch (command.kind) {
    case CommandKind::SetCable: {
      if (schedule_) return reject(command, "policy_active", "a policy is running; stop it first");
      if (command.cable < 0 || command.cable >= static_cast<int>(actuated.size())) {
        return reject(command, "cable_out_of_range", "cable must lie in [0, 6)");
      }
      const double lo = 1.0 - state_.params.max_contraction;
      if (!(command.fraction >= lo && command.fraction <= 1.0)) {
        return reject(command, "fraction_out_of_range", "fraction out of range");
      }
      set_cable_target(state_, actuated[command.cable], command.fraction);
      break;
    }
    case CommandKind::RunPolicy: {
      if (schedule_) return reject(command, "policy_active", "a policy is already running");
      try {
        schedule_ = compile_policy(command.policy, command.params, actuated, kPolicyCycles,
                                   state_.params.max_contraction);
      } catch (const Error& e) {
        return reject(command, "invalid_policy", e.what());
      }
      schedule_start_ = state_.time;
      state_.params.actuator_rate = schedule_->params.contraction / schedule_->params.ramp_time * (1.0 + 1e-9);
      break;
    }
    case CommandKind::StopPolicy: {
      if (!schedule_) return reject(command, "no_policy", "no policy is running");
      schedule_.reset();
      for (int c : actuated) set_cable_target(state_, c, 1.0);
      break;
    }
    case CommandKind::SetIncline: {
      WorldConfig world = state_.world;
      world.incline_deg = command.incline_deg;
      try {
        validate(world);
      } catch (const Error& e) {
        return reject(command, "incline_out_of_range", e.what());
      }
      state_.world.incline_deg = command.incline_deg;
      break;
    }
    case CommandKind::Reset: {
      if (command.face < 0 || command.face >= kStableFaceCount) {
        return reject(command, "face_out_of_range", "face must lie in [0, 8)");
      }
      reset_to(command.face);
      break;
    }
    case CommandKind::Pause: paused_ = true; break;
    case CommandKind::Resume: paused_ = false; break;
    case CommandKind::SetSpeed: {
      if (!(command.speed >= kMinSpeed && command.speed <= kMaxSpeed)) {
        return reject(command, "speed_out_of_range", "speed factor must lie in [0.01, 100]");
      }
      speed_ = command.speed;
      break;
    }
  }
  log_.push_back({state_.time, command});
  Reply r;
  r.accepted = true;
  r.id = command.id;
  r.kind = command.kind;
  r.time = state_.time;
  return r;
}

TelemetryFrame SessionCore::snapshot() const {
  TelemetryFrame f;
  f.frame = next_frame_;
  f.time = state_.time;
  f.paused = paused_;
  if (schedule_) f.policy = schedule_->kind;
  f.incline_deg = state_.world.incline_deg;
  f.nodes = node_positions(state_);
  f.com = total_com(state_);
  f.projected_com = project_com(f.com, state_.world);
  if (const auto stance = stance_of(state_)) {
    f.support_polygon = stance->polygon.vertices;
    f.margins = stance->margins;
  }
  for (int c = 0; c < kCableCount; ++c) {
    const CableState& cable = state_.cables[c];
    f.commanded_fraction[c] = cable.commanded_rest_length / cable.neutral_rest_length;
    f.target_fraction[c] = cable.target_rest_length / cable.neutral_rest_length;
    f.tension[c] = cable.current_tension;
  }
  f.contacts = state_.contact_set;
  f.face = current_face(state_);
  f.distance = f.com.x() - origin_x_;
  f.height_pct = f.com.z() / neutral_height_ * 100.0;
  return f;
}

void SessionCore::emit(std::vector<TelemetryFrame>& out) {
  // Frame k is due at k / frame_rate; the small slack absorbs step rounding.
  const double due = static_cast<double>(next_frame_) / frame_rate_;
  if (state_.time + 0.5 * state_.world.dt < due) return;
  TelemetryFrame f = snapshot();
  hash_.add(f);
  ++next_frame_;
  out.push_back(std::move(f));
}

void SessionCore::step(std::vector<TelemetryFrame>& out) {
  flush_pending(out);
  if (paused_) return;
  if (schedule_) {
    const double t = state_.time - schedule_start_;
    if (t > schedule_->duration()) {
      schedule_.reset();
    } else {
      const auto targets = targets_at(*schedule_, t);
      for (int c : topology_->actuators.sequence) {
        state_.cables[c].target_rest_length = targets[c] * state_.cables[c].neutral_rest_length;
      }
    }
  }
  step_in_place(state_);
  emit(out);
}

void SessionCore::flush_pending(std::vector<TelemetryFrame>& out) {
  if (pending_.empty()) return;
  for (TelemetryFrame& f : pending_) out.push_back(std::move(f));
  pending_.clear();
}

void SessionCore::advance_to(double t, std::vector<TelemetryFrame>& out) {
  flush_pending(out);
  while (!paused_ && state_.time < t) step(out);
}

// ---------------------------------------------------------------------------
// Logs and replay

std::string log_header_json(const SessionCore& session) {
  return Json{{"type", "hello"},
              {"protocol", kProtocolVersion},
              {"frame_rate", session.frame_rate()},
              {"config", detail::to_json(session.config())}}
      .dump();
}

std::string log_entry_json(const LogEntry& entry) {
  return Json{{"type", "command"}, {"t", entry.time}, {"command", command_json(entry.command)}}.dump();
}

std::string log_end_json(const SessionCore& session) {
  return Json{{"type", "end"},
              {"t", session.time()},
              {"frames", session.stream_hash().frames()},
              {"hash", session.stream_hash().hex()}}
      .dump();
}

ReplayResult replay_log(const std::string& text, bool keep_frames) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::unique_ptr<SessionCore> session;
  ReplayResult result;
  std::vector<TelemetryFrame> frames;
  const auto drain = [&] {
    if (keep_frames) result.stream.insert(result.stream.end(), frames.begin(), frames.end());
    frames.clear();
  };
  const auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::Protocol, "log line " + std::to_string(line_no) + ": " + msg);
  };
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (ended) fail("content after the end line");
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail("not valid JSON");
    }
    const std::string type = j.value("type", "");
    if (!session) {
      if (type != "hello" || !j.contains("config")) fail("expected the hello header first");
      const double rate = j.value("frame_rate", 30.0);
      session = std::make_unique<SessionCore>(detail::scenario_from_json(j["config"]), rate);
      continue;
    }
    if (!j.contains("t") || !j["t"].is_number()) fail("missing time");
    const double t = j["t"].get<double>();
    if (t + 1e-12 < session->time()) fail("time goes backwards");
    session->advance_to(t, frames);
    drain();
    if (type == "command") {
      if (!j.contains("command")) fail("missing command");
      Command command;
      try {
        command = command_from_json(j["command"]);
      } catch (const Error& e) {
        fail(e.what());
      }
      session->apply(command);
    } else if (type == "end") {
      if (j.contains("hash")) result.recorded_hash = j["hash"].get<std::string>();
      ended = true;
    } else {
      fail("unknown entry type '" + type + "'");
    }
  }
  if (!session) throw Error(ErrorKind::Protocol, "log is empty");
  result.frames = session->stream_hash().frames();
  result.hash = session->stream_hash().hex();
  result.end_time = session->time();
  return result;
}

// ---------------------------------------------------------------------------
// LiveSession

LiveSession::LiveSession(ScenarioConfig config, LiveOptions options)
    : options_(std::move(options)), core_(std::make_unique<SessionCore>(std::move(config), options_.frame_rate)) {
  push(core_->hello_json(), false);
  loop_ = std::thread([this] { run(); });
}

LiveSession::~LiveSession() { close(); }

void LiveSession::receive(const std::string& text) {
  Command command;
  try {
    command = parse_command(text);
  } catch (const Error& e) {
    push(error_frame_json("malformed_message", e.what()), false);
    return;
  }
  std::lock_guard lock(mutex_);
  incoming_.push_back(command);
}

void LiveSession::push(std::string text, bool droppable) {
  std::lock_guard lock(mutex_);
  if (end_queued_) return;
  if (droppable) {
    std::size_t frames = 0;
    for (const Outgoing& o : outgoing_) frames += o.droppable;
    if (outgoing_.size() >= options_.queue_capacity && frames > 0) {
      for (auto it = outgoing_.begin(); it != outgoing_.end(); ++it) {
        if (it->droppable) {
          outgoing_.erase(it);
          ++dropped_;
          break;
        }
      }
    }
  }
  outgoing_.push_back({std::move(text), droppable});
  out_ready_.notify_one();
}

std::optional<std::string> LiveSession::next_outgoing(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (end_sent_) return std::nullopt;
  out_ready_.wait_for(lock, timeout, [this] { return !outgoing_.empty(); });
  if (outgoing_.empty()) return std::nullopt;
  std::string text = std::move(outgoing_.front().text);
  outgoing_.pop_front();
  if (outgoing_.empty() && end_queued_) end_sent_ = true;
  return text;
}

void LiveSession::close(const std::string& reason) {
  {
    std::lock_guard lock(mutex_);
    if (stop_) return;
    stop_ = true;
    if (!end_queued_) end_reason_ = reason;
  }
  if (loop_.joinable()) loop_.join();
}

bool LiveSession::ended() const {
  std::lock_guard lock(mutex_);
  return end_sent_;
}

std::uint64_t LiveSession::dropped_frames() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void LiveSession::run() {
  using Clock = std::chrono::steady_clock;
  std::ofstream log;
  if (!options_.log_path.empty()) {
    log.open(options_.log_path);
    if (log) log << log_header_json(*core_) << '\n' << std::flush;
  }
  const auto started = Clock::now();
  const auto wall_now = [&] { return std::chrono::duration<double>(Clock::now() - started).count(); };
  // Sim time tracks wall time from this anchor at the current speed.
  double anchor_wall = 0.0;
  double anchor_sim = core_->time();
  double last_heartbeat = -1.0;
  const double frame_period = 1.0 / core_->frame_rate();
  std::vector<TelemetryFrame> frames;

  const auto send_frames = [&] {
    const double wall = wall_now();
    for (TelemetryFrame& f : frames) {
      f.wall = wall;
      push(frame_to_json(f), true);
    }
    frames.clear();
  };

  for (;;) {
    std::deque<Command> commands;
    {
      std::lock_guard lock(mutex_);
      if (stop_) break;
      commands.swap(incoming_);
    }
    for (const Command& command : commands) {
      const bool was_paused = core_->paused();
      Reply reply;
      try {
        reply = core_->apply(command);
      } catch (const Error& e) {
        reply.id = command.id;
        reply.kind = command.kind;
        reply.time = core_->time();
        reply.reason = "internal";
        reply.message = e.what();
      }
      push(reply_to_json(reply), false);
      if (reply.accepted && log) log << log_entry_json(core_->log().back()) << '\n' << std::flush;
      if (reply.accepted && (command.kind == CommandKind::SetSpeed || (was_paused && !core_->paused()))) {
        anchor_wall = wall_now();
        anchor_sim = core_->time();
      }
    }

    if (core_->paused()) {
      core_->advance_to(core_->time(), frames);
      send_frames();
      const double wall = wall_now();
      if (wall - last_heartbeat >= frame_period) {
        TelemetryFrame f = core_->snapshot();
        f.frame = f.frame > 0 ? f.frame - 1 : 0;
        f.wall = wall;
        push(frame_to_json(f), true);
        last_heartbeat = wall;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      continue;
    }

    double target = core_->time() + 0.05;
    if (options_.realtime) {
      const double wall = wall_now();
      target = anchor_sim + (wall - anchor_wall) * core_->speed();
      // Drop the backlog when the simulation cannot keep up.
      if (target - core_->time() > 0.5) {
        anchor_wall = wall;
        anchor_sim = core_->time();
        target = anchor_sim;
      }
    }
    int steps = 0;
    try {
      while (core_->time() < target && steps < 400) {
        core_->step(frames);
        ++steps;
      }
    } catch (const Error& e) {
      send_frames();
      push(error_frame_json("simulation_failed", e.what()), false);
      std::lock_guard lock(mutex_);
      end_reason_ = "simulation_failed";
      break;
    }
    send_frames();
    if (steps == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  if (log) log << log_end_json(*core_) << '\n' << std::flush;
  const Json end = {{"type", "end"},
                    {"reason", end_reason_},
                    {"t", core_->time()},
                    {"frames", core_->stream_hash().frames()},
                    {"hash", core_->stream_hash().hex()}};
  std::lock_guard lock(mutex_);
  outgoing_.push_back({end.dump(), false});
  end_queued_ = true;
  out_ready_.notify_all();
}

}  // namespace tensegrity
