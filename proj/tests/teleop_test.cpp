#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "tensegrity/error.hpp"
#include "tensegrity/teleop.hpp"

using namespace tensegrity;
using nlohmann::json;

namespace {

const std::vector<int> kGait = {10, 5, 6, 14, 20, 17};

ScenarioConfig session_config() {
  ScenarioConfig c;
  c.gait = kGait;
  return c;
}

Command cmd(const std::string& text) { return parse_command(text); }

// Collects messages until `pred` matches one or the deadline passes.
std::vector<json> drain_until(LiveSession& s, const std::function<bool(const json&)>& pred,
                              std::chrono::milliseconds limit = std::chrono::milliseconds(20000)) {
  std::vector<json> out;
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    const auto text = s.next_outgoing(std::chrono::milliseconds(50));
    if (!text) {
      if (s.ended()) break;
      continue;
    }
    out.push_back(json::parse(*text));
    if (pred(out.back())) break;
  }
  return out;
}

}  // namespace

TEST_SUITE("teleop") {

TEST_CASE("commands parse and print back") {
  const Command c = cmd(R"({"type":"command","id":7,"command":"set_cable","cable":3,"fraction":0.65})");
  CHECK(c.kind == CommandKind::SetCable);
  CHECK(c.id == 7);
  CHECK(c.cable == 3);
  CHECK(c.fraction == 0.65);
  CHECK(parse_command(command_to_json(c)).fraction == 0.65);

  const Command p = cmd(R"({"type":"command","id":1,"command":"run_policy","policy":"alternating",
                            "params":{"contraction":0.4}})");
  CHECK(p.kind == CommandKind::RunPolicy);
  CHECK(p.policy == PolicyKind::Alternating);
  CHECK(p.params.contraction == 0.4);
  CHECK(cmd(R"({"type":"command","command":"set_speed","factor":0.25})").speed == 0.25);
  CHECK(cmd(R"({"type":"command","command":"reset","face":2})").face == 2);
  CHECK(cmd(R"({"type":"command","command":"set_incline","incline_deg":5})").incline_deg == 5.0);
}

TEST_CASE("malformed commands are protocol errors") {
  for (const char* text : {"nope", "[]", R"({"command":"set_cable","cable":3,"fraction":0.5})",
                           R"({"type":"telemetry","command":"pause"})",
                           R"({"type":"command","command":"jump"})",
                           R"({"type":"command","command":"set_cable","cable":3})",
                           R"({"type":"command","command":"set_cable","cable":"3","fraction":0.5})",
                           R"({"type":"command","command":"pause","extra":1})",
                           R"({"type":"command","command":"run_policy","policy":"skip"})"}) {
    CAPTURE(text);
    try {
      parse_command(text);
      FAIL("parsed");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Protocol);
    }
  }
}

TEST_CASE("set cable is acknowledged and the cable ramps towards the target") {
  SessionCore s(session_config());
  std::vector<TelemetryFrame> frames;
  s.advance_to(0.1, frames);
  const Reply r = s.apply(cmd(R"({"type":"command","id":4,"command":"set_cable","cable":3,"fraction":0.65})"));
  CHECK(r.accepted);
  const json ack = json::parse(reply_to_json(r));
  CHECK(ack["type"] == "ack");
  CHECK(ack["id"] == 4);
  frames.clear();
  s.advance_to(0.2, frames);
  REQUIRE(frames.size() >= 2);
  const int cable = kGait[3];
  CHECK(frames.front().target_fraction[cable] == doctest::Approx(0.65));
  CHECK(frames.front().commanded_fraction[cable] < 1.0);
  CHECK(frames.back().commanded_fraction[cable] < frames.front().commanded_fraction[cable]);
  s.advance_to(3.0, frames);
  CHECK(s.snapshot().commanded_fraction[cable] == doctest::Approx(0.65));
}

TEST_CASE("out of range commands are rejected and change nothing") {
  SessionCore s(session_config());
  const TelemetryFrame before = s.snapshot();
  const auto rejected = [&](const std::string& text, const std::string& reason) {
    const Reply r = s.apply(cmd(text));
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == reason);
    return r;
  };
  const Reply r = rejected(R"({"type":"command","id":9,"command":"set_cable","cable":3,"fraction":1.5})",
                           "fraction_out_of_range");
  const json j = json::parse(reply_to_json(r));
  CHECK(j["type"] == "reject");
  CHECK(j["message"] == "fraction out of range");
  CHECK(j["id"] == 9);
  rejected(R"({"type":"command","command":"set_cable","cable":6,"fraction":0.8})", "cable_out_of_range");
  rejected(R"({"type":"command","command":"set_incline","incline_deg":95})", "incline_out_of_range");
  rejected(R"({"type":"command","command":"reset","face":8})", "face_out_of_range");
  rejected(R"({"type":"command","command":"set_speed","factor":0})", "speed_out_of_range");
  rejected(R"({"type":"command","command":"stop_policy"})", "no_policy");
  rejected(R"({"type":"command","command":"run_policy","policy":"single","params":{"contraction":0.9}})",
           "invalid_policy");
  CHECK(s.log().empty());
  CHECK(frame_to_json(s.snapshot(), false) == frame_to_json(before, false));
}

TEST_CASE("running then stopping a policy returns every cable to neutral") {
  SessionCore s(session_config());
  std::vector<TelemetryFrame> frames;
  CHECK(s.apply(cmd(R"({"type":"command","command":"run_policy","policy":"alternating"})")).accepted);
  CHECK(s.policy_active());
  CHECK(s.apply(cmd(R"({"type":"command","command":"set_cable","cable":0,"fraction":0.8})")).reason ==
        "policy_active");
  s.advance_to(4.0, frames);
  int moving = 0;
  for (int c : kGait) moving += s.snapshot().commanded_fraction[c] < 0.99;
  CHECK(moving >= 1);
  CHECK(frames.back().policy == PolicyKind::Alternating);
  CHECK(s.apply(cmd(R"({"type":"command","command":"stop_policy"})")).accepted);
  s.advance_to(8.0, frames);
  for (int c = 0; c < kCableCount; ++c) CHECK(s.snapshot().commanded_fraction[c] == doctest::Approx(1.0));
  CHECK_FALSE(frames.back().policy.has_value());
}

TEST_CASE("frames come at the configured rate of simulated time") {
  SessionCore s(session_config(), 30.0);
  std::vector<TelemetryFrame> frames;
  s.advance_to(2.0, frames);
  CHECK(frames.size() >= 59);
  CHECK(frames.size() <= 61);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    CHECK(frames[i].frame == frames[i - 1].frame + 1);
    CHECK(frames[i].time > frames[i - 1].time);
    CHECK(frames[i].time == doctest::Approx(static_cast<double>(frames[i].frame) / 30.0).epsilon(1e-3));
  }
}

TEST_CASE("reset puts the chosen face on the ground") {
  SessionCore s(session_config());
  std::vector<TelemetryFrame> frames;
  s.advance_to(0.5, frames);
  CHECK(s.apply(cmd(R"({"type":"command","command":"reset","face":2})")).accepted);
  frames.clear();
  s.advance_to(s.time() + 0.05, frames);
  REQUIRE_FALSE(frames.empty());
  const Face& face = s.state().topology->faces[2];
  CHECK(frames.front().contacts == std::vector<int>(face.begin(), face.end()));
  CHECK(frames.front().face == 2);
  CHECK(frames.front().distance == doctest::Approx(0.0).epsilon(1e-3).scale(1.0));
}

TEST_CASE("frames are complete telemetry messages") {
  SessionCore s(session_config());
  const json f = json::parse(frame_to_json(s.snapshot()));
  for (const char* key : {"type", "frame", "t", "paused", "policy", "incline_deg", "nodes", "com", "projected_com",
                          "support_polygon", "margins", "cables", "contacts", "face", "distance", "height_pct",
                          "wall"}) {
    CAPTURE(key);
    CHECK(f.contains(key));
  }
  CHECK(f["type"] == "telemetry");
  CHECK(f["nodes"].size() == 12);
  CHECK(f["cables"].size() == 24);
  CHECK(f["contacts"].size() == 3);
  CHECK(f["support_polygon"].size() == 3);
  CHECK_FALSE(json::parse(frame_to_json(s.snapshot(), false)).contains("wall"));
  const json hello = json::parse(s.hello_json());
  CHECK(hello["type"] == "hello");
  CHECK(hello["protocol"] == kProtocolVersion);
  CHECK(hello["config"]["gait"] == json(kGait));
}

TEST_CASE("a recorded session replays to the same stream") {
  SessionCore s(session_config());
  std::vector<TelemetryFrame> frames;
  std::string log = log_header_json(s) + '\n';
  const auto send = [&](double t, const std::string& text) {
    s.advance_to(t, frames);
    if (s.apply(cmd(text)).accepted) log += log_entry_json(s.log().back()) + '\n';
  };
  send(0.3, R"({"type":"command","command":"set_cable","cable":0,"fraction":0.6})");
  send(1.7, R"({"type":"command","command":"set_cable","cable":0,"fraction":1.0})");
  send(2.0, R"({"type":"command","command":"set_incline","incline_deg":6})");
  send(2.5, R"({"type":"command","command":"run_policy","policy":"simultaneous"})");
  send(4.0, R"({"type":"command","command":"pause"})");
  send(4.0, R"({"type":"command","command":"resume"})");
  send(6.1, R"({"type":"command","command":"stop_policy"})");
  send(6.5, R"({"type":"command","command":"reset","face":3})");
  s.advance_to(7.0, frames);
  log += log_end_json(s) + '\n';

  const ReplayResult r = replay_log(log, true);
  CHECK(r.hash == s.stream_hash().hex());
  REQUIRE(r.recorded_hash.has_value());
  CHECK(*r.recorded_hash == r.hash);
  CHECK(r.frames == frames.size());
  REQUIRE(r.stream.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); i += 37) {
    CHECK(frame_to_json(r.stream[i], false) == frame_to_json(frames[i], false));
  }

  // A changed command timestamp changes the stream.
  std::string altered = log;
  const auto pos = altered.find("\"t\":0.3");
  REQUIRE(pos != std::string::npos);
  altered.replace(pos, 7, "\"t\":0.4");
  CHECK(replay_log(altered).hash != r.hash);
}

TEST_CASE("broken logs are protocol errors") {
  CHECK_THROWS_AS(replay_log(""), Error);
  CHECK_THROWS_AS(replay_log("{\"type\":\"command\",\"t\":0}\n"), Error);
  SessionCore s(session_config());
  const std::string header = log_header_json(s) + '\n';
  CHECK_THROWS_AS(replay_log(header + "not json\n"), Error);
  CHECK_THROWS_AS(replay_log(header + R"({"type":"command","t":2,"command":{"type":"command","command":"pause"}})" +
                             "\n" + R"({"type":"command","t":1,"command":{"type":"command","command":"resume"}})"),
                  Error);
}

TEST_CASE("live session sends hello first, replies in order and an end marker last") {
  LiveOptions o;
  o.realtime = false;
  LiveSession live(session_config(), o);
  const auto first = live.next_outgoing(std::chrono::milliseconds(5000));
  REQUIRE(first.has_value());
  CHECK(json::parse(*first)["type"] == "hello");
  live.receive(R"({"type":"command","id":1,"command":"set_cable","cable":1,"fraction":0.7})");
  live.receive("garbage");
  live.receive(R"({"type":"command","id":2,"command":"set_cable","cable":1,"fraction":2})");
  std::vector<json> seen = drain_until(live, [](const json& j) { return j["type"] == "reject"; });
  std::vector<std::string> order;
  for (const json& j : seen) {
    if (j["type"] != "telemetry") order.push_back(j["type"]);
  }
  CHECK(order == std::vector<std::string>{"error", "ack", "reject"});
  live.close("test_done");
  seen = drain_until(live, [](const json& j) { return j["type"] == "end"; });
  REQUIRE_FALSE(seen.empty());
  CHECK(seen.back()["type"] == "end");
  CHECK(seen.back()["reason"] == "test_done");
  CHECK(live.ended());
  CHECK_FALSE(live.next_outgoing(std::chrono::milliseconds(10)).has_value());
}

TEST_CASE("a lagging consumer loses old frames but never replies") {
  LiveOptions o;
  o.realtime = false;
  o.queue_capacity = 8;
  LiveSession live(session_config(), o);
  for (int i = 0; i < 20; ++i) {
    live.receive(R"({"type":"command","id":)" + std::to_string(i) + R"(,"command":"set_incline","incline_deg":)" +
                 std::to_string(i % 5) + "}");
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(1500));
  live.close();
  std::vector<std::int64_t> ids;
  std::uint64_t last_frame = 0;
  bool monotone = true;
  for (const json& j : drain_until(live, [](const json& j) { return j["type"] == "end"; })) {
    if (j["type"] == "ack") ids.push_back(j["id"].get<std::int64_t>());
    if (j["type"] == "telemetry") {
      const auto f = j["frame"].get<std::uint64_t>();
      monotone = monotone && f >= last_frame;
      last_frame = f;
    }
  }
  CHECK(live.dropped_frames() > 0);
  CHECK(monotone);
  REQUIRE(ids.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(ids[i] == i);
}

TEST_CASE("a paused session keeps sending the same state with advancing wall time") {
  LiveOptions o;
  o.frame_rate = 30.0;
  LiveSession live(session_config(), o);
  live.receive(R"({"type":"command","id":1,"command":"pause"})");
  drain_until(live, [](const json& j) { return j["type"] == "ack"; });
  std::vector<json> frames;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(1200);
  while (std::chrono::steady_clock::now() < deadline) {
    if (const auto text = live.next_outgoing(std::chrono::milliseconds(50))) {
      const json j = json::parse(*text);
      if (j["type"] == "telemetry" && j["paused"] == true) frames.push_back(j);
    }
  }
  live.close();
  REQUIRE(frames.size() >= 10);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    CHECK(frames[i]["wall"].get<double>() > frames[i - 1]["wall"].get<double>());
    json a = frames[i];
    json b = frames[i - 1];
    a.erase("wall");
    b.erase("wall");
    CHECK(a == b);
  }
}

TEST_CASE("live session writes a replayable log") {
  const std::string path = (std::filesystem::temp_directory_path() / "tensegrity_live_log.jsonl").string();
  std::string recorded;
  {
    LiveOptions o;
    o.log_path = path;
    o.realtime = false;
    LiveSession live(session_config(), o);
    live.receive(R"({"type":"command","id":1,"command":"set_cable","cable":2,"fraction":0.6})");
    drain_until(live, [](const json& j) { return j["type"] == "telemetry" && j["t"].get<double>() > 1.0; });
    live.receive(R"({"type":"command","id":2,"command":"set_incline","incline_deg":3})");
    drain_until(live, [](const json& j) { return j["type"] == "telemetry" && j["t"].get<double>() > 2.0; });
    live.close();
    const auto end = drain_until(live, [](const json& j) { return j["type"] == "end"; });
    recorded = end.back()["hash"].get<std::string>();
  }
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const ReplayResult r = replay_log(text);
  CHECK(r.hash == recorded);
  CHECK(r.recorded_hash == recorded);
  std::filesystem::remove(path);
}

}
