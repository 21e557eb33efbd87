#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "tensegrity/dynamics.hpp"
#include "tensegrity/harness.hpp"
#include "tensegrity/policies.hpp"
#include "tensegrity/stability.hpp"

namespace tensegrity {

inline constexpr int kProtocolVersion = 1;

enum class CommandKind { SetCable, RunPolicy, StopPolicy, SetIncline, Reset, Pause, Resume, SetSpeed };

std::string_view to_string(CommandKind kind);

struct Command {
  CommandKind kind = CommandKind::Pause;
  std::int64_t id = 0;  // client correlation id, echoed in the reply
  int cable = 0;        // SetCable: actuator slot in gait order, 0..5
  double fraction = 1.0;
  PolicyKind policy = PolicyKind::Single;
  PolicyParams params;
  double incline_deg = 0.0;
  int face = 0;
  double speed = 1.0;   // SetSpeed: sim seconds per wall second
};

/// Parses a client message. Throws Error{Protocol} for anything that is not a
/// well-formed command object; value ranges are checked when it is applied.
Command parse_command(const std::string& text);
std::string command_to_json(const Command& command);

struct Reply {
  bool accepted = false;
  std::int64_t id = 0;
  CommandKind kind = CommandKind::Pause;
  double time = 0.0;    // sim time the command was applied at
  std::string reason;   // machine-readable, empty on ack
  std::string message;
};
std::string reply_to_json(const Reply& reply);

std::string error_frame_json(const std::string& reason, const std::string& message);

struct TelemetryFrame {
  std::uint64_t frame = 0;
  double time = 0.0;
  double wall = 0.0;  // s since the session started; not part of the replayable stream
  bool paused = false;
  std::optional<PolicyKind> policy;
  double incline_deg = 0.0;
  std::array<Eigen::Vector3d, kNodeCount> nodes;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Vector2d projected_com = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> support_polygon;
  std::optional<StabilityMargins> margins;
  std::array<double, kCableCount> commanded_fraction{};
  std::array<double, kCableCount> target_fraction{};
  std::array<double, kCableCount> tension{};
  std::vector<int> contacts;
  int face = -1;
  double distance = 0.0;   // cm along +x since the last reset
  double height_pct = 0.0; // CoM height relative to the settled stance at the last reset
};

std::string frame_to_json(const TelemetryFrame& frame, bool include_wall = true);

/// FNV-1a over the frame stream, ignoring wall time.
class StreamHash {
 public:
  void add(const TelemetryFrame& frame);
  std::uint64_t value() const { return hash_; }
  std::string hex() const;
  std::uint64_t frames() const { return frames_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ull;
  std::uint64_t frames_ = 0;
};

struct LogEntry {
  double time = 0.0;
  Command command;
};

/// Single-threaded session state machine. Commands take effect at the current
/// step boundary; frames are produced every 1/frame_rate of simulated time.
/// Given the same config and the same (time, command) sequence it produces the
/// same frames.
class SessionCore {
 public:
  explicit SessionCore(ScenarioConfig config, double frame_rate = 30.0);

  const ScenarioConfig& config() const { return config_; }
  double frame_rate() const { return frame_rate_; }
  double time() const { return state_.time; }
  bool paused() const { return paused_; }
  double speed() const { return speed_; }
  bool policy_active() const { return schedule_.has_value(); }
  const SimState& state() const { return state_; }
  const std::vector<LogEntry>& log() const { return log_; }
  const StreamHash& stream_hash() const { return hash_; }

  std::string hello_json() const;

  /// Validates and applies a command; rejected commands change nothing and
  /// are not logged.
  Reply apply(const Command& command);

  /// One physics step (no-op while paused). Appends any frames that fall due.
  void step(std::vector<TelemetryFrame>& out);
  /// Steps until the clock reaches `t` (no-op while paused).
  void advance_to(double t, std::vector<TelemetryFrame>& out);

  /// Current state as a frame, without advancing the frame counter.
  TelemetryFrame snapshot() const;

 private:
  void emit(std::vector<TelemetryFrame>& out);
  void flush_pending(std::vector<TelemetryFrame>& out);
  void reset_to(int face);
  Reply reject(const Command& command, std::string reason, std::string message) const;

  ScenarioConfig config_;
  std::shared_ptr<const TensegrityTopology> topology_;
  double frame_rate_;
  SimState state_;
  bool paused_ = false;
  double speed_ = 1.0;
  std::optional<PolicySchedule> schedule_;
  double schedule_start_ = 0.0;
  double origin_x_ = 0.0;
  double neutral_height_ = 1.0;
  std::uint64_t next_frame_ = 0;
  std::vector<TelemetryFrame> pending_;
  std::vector<LogEntry> log_;
  StreamHash hash_;
};

/// Session log: a hello line with the config, one line per applied command
/// with its sim time, and an end line with the final time and stream hash.
std::string log_header_json(const SessionCore& session);
std::string log_entry_json(const LogEntry& entry);
std::string log_end_json(const SessionCore& session);

struct ReplayResult {
  std::uint64_t frames = 0;
  std::string hash;
  double end_time = 0.0;
  std::optional<std::string> recorded_hash;  // from the log's end line, if present
  std::vector<TelemetryFrame> stream;        // filled only when asked for
};

/// Re-runs a session log. Throws Error{Protocol} for malformed lines and
/// Error{Config} for a bad embedded config.
ReplayResult replay_log(const std::string& text, bool keep_frames = false);

struct LiveOptions {
  double frame_rate = 30.0;
  std::size_t queue_capacity = 256;  // outgoing messages before frames are dropped
  std::string log_path;              // empty: no log file
  bool realtime = true;              // false: run the clock as fast as possible
};

/// Threaded session: a simulation loop owns the SessionCore and talks to the
/// transport only through two ordered queues. Outgoing frames are dropped
/// oldest-first when the consumer lags; replies and errors never are.
class LiveSession {
 public:
  LiveSession(ScenarioConfig config, LiveOptions options = {});
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  /// Queues a raw client message. Malformed input yields an error frame.
  void receive(const std::string& text);

  /// Next outgoing message, waiting up to `timeout`. The hello header comes
  /// first and an end marker last; afterwards this returns nullopt at once.
  std::optional<std::string> next_outgoing(std::chrono::milliseconds timeout);

  /// Stops the loop and queues the end marker. Idempotent.
  void close(const std::string& reason = "closed");

  bool ended() const;
  std::uint64_t dropped_frames() const;

 private:
  struct Outgoing {
    std::string text;
    bool droppable = false;
  };

  void run();
  void push(std::string text, bool droppable);

  LiveOptions options_;
  std::unique_ptr<SessionCore> core_;

  mutable std::mutex mutex_;
  std::condition_variable out_ready_;
  std::deque<Outgoing> outgoing_;
  std::deque<Command> incoming_;
  bool stop_ = false;
  bool end_queued_ = false;
  bool end_sent_ = false;
  std::string end_reason_ = "closed";
  std::uint64_t dropped_ = 0;
  std::thread loop_;
};

}  // namespace tensegrity
