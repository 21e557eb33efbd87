#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tensegrity/harness.hpp"
#include "tensegrity/policies.hpp"
#include "tensegrity/topology.hpp"

namespace tensegrity {

// JSON and CSV encodings of the public types. All functions return or take
// text so callers do not depend on a JSON library.

/// Parses a scenario config. Missing keys keep their defaults; unknown keys,
/// wrong types and invalid values throw Error{Config}.
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& config);

std::string trial_result_to_json(const TrialResult& result);
std::string topology_to_json(const TensegrityTopology& topology);
std::string schedule_to_json(const PolicySchedule& schedule);
std::string sweep_to_json(const std::vector<SweepResult>& sweeps);

/// t,x,y,z,height_pct
std::string com_trace_csv(const TrialResult& result);
/// t,uphill,downhill,contacts
std::string margins_csv(const TrialResult& result);
/// theta,policy,success_rate,avg_velocity
std::string sweep_csv(const std::vector<SweepResult>& sweeps);
/// t followed by one column per actuated cable, sampled every `interval` seconds.
std::string schedule_csv(const PolicySchedule& schedule, double interval);

/// theta,step,cable,required_fraction with NA for missing values.
std::string required_contraction_csv(const std::vector<RequiredContractionRow>& rows);

/// Writes `text` to `path`, creating parent directories. Throws Error{Config}
/// when the file cannot be written.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace tensegrity
