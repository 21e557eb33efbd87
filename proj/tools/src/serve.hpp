#pragma once

#include <functional>
#include <string>

#include "tensegrity/harness.hpp"

namespace tensegrity::cli {

struct ServeOptions {
  unsigned short port = 8765;
  std::string address = "127.0.0.1";
  std::string assets_dir;  // static files for the browser console; empty serves a plain notice
  std::string log_dir;     // one JSON-lines command log per session; empty disables logging
  double frame_rate = 30.0;
  bool once = false;       // exit after the first WebSocket session ends
  std::function<void(unsigned short)> on_listening;  // called with the bound port
};

/// Accepts connections until interrupted. WebSocket upgrades get a teleop
/// session each; plain HTTP GETs are answered from assets_dir.
int serve(const ScenarioConfig& config, const ServeOptions& options);

}  // namespace tensegrity::cli
