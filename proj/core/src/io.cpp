#include "tensegrity/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json_codec.hpp"

namespace tensegrity {

namespace detail {

ObjectReader::ObjectReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw Error(ErrorKind::Config, path_ + " must be an object");
}

const Json* ObjectReader::find(const char* key) {
  seen_.insert(key);
  const auto it = object_.find(key);
  return it == object_.end() ? nullptr : &*it;
}

void ObjectReader::finish() const {
  for (const auto& [key, value] : object_.items()) {
    if (!seen_.count(key)) throw Error(ErrorKind::Config, "unknown key " + path_ + "." + key);
  }
}

Json to_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json to_json(const Eigen::Vector2d& v) { return Json::array({v.x(), v.y()}); }

Json to_json(const PhysicalParams& p) {
  return {{"rod_mass", p.rod_mass},
          {"rod_radius", p.rod_radius},
          {"payload_mass", p.payload_mass},
          {"cable_stiffness", p.cable_stiffness},
          {"cable_damping", p.cable_damping},
          {"actuated_stiffness", p.actuated_stiffness},
          {"pretension", p.pretension},
          {"payload_spring_stiffness", p.payload_spring_stiffness},
          {"payload_spring_rest_fraction", p.payload_spring_rest_fraction},
          {"payload_spring_damping", p.payload_spring_damping},
          {"max_contraction", p.max_contraction},
          {"actuator_rate", p.actuator_rate}};
}

void from_json(const Json& j, PhysicalParams& p, const std::string& path) {
  ObjectReader r(j, path);
  r.read("rod_mass", p.rod_mass);
  r.read("rod_radius", p.rod_radius);
  r.read("payload_mass", p.payload_mass);
  r.read("cable_stiffness", p.cable_stiffness);
  r.read("cable_damping", p.cable_damping);
  r.read("actuated_stiffness", p.actuated_stiffness);
  r.read("pretension", p.pretension);
  r.read("payload_spring_stiffness", p.payload_spring_stiffness);
  r.read("payload_spring_rest_fraction", p.payload_spring_rest_fraction);
  r.read("payload_spring_damping", p.payload_spring_damping);
  r.read("max_contraction", p.max_contraction);
  r.read("actuator_rate", p.actuator_rate);
  r.finish();
}

Json to_json(const WorldConfig& w) {
  return {{"incline_deg", w.incline_deg},
          {"gravity", w.gravity},
          {"friction", w.friction},
          {"contact_stiffness", w.contact_stiffness},
          {"contact_damping", w.contact_damping},
          {"tangential_stiffness", w.tangential_stiffness},
          {"tangential_damping", w.tangential_damping},
          {"contact_tolerance", w.contact_tolerance},
          {"dt", w.dt}};
}

void from_json(const Json& j, WorldConfig& w, const std::string& path) {
  ObjectReader r(j, path);
  r.read("incline_deg", w.incline_deg);
  r.read("gravity", w.gravity);
  r.read("friction", w.friction);
  r.read("contact_stiffness", w.contact_stiffness);
  r.read("contact_damping", w.contact_damping);
  r.read("tangential_stiffness", w.tangential_stiffness);
  r.read("tangential_damping", w.tangential_damping);
  r.read("contact_tolerance", w.contact_tolerance);
  r.read("dt", w.dt);
  r.finish();
}

Json to_json(const PolicyParams& p) {
  return {{"contraction", p.contraction},
          {"ramp_time", p.ramp_time},
          {"hold_time", p.hold_time},
          {"overlap", p.overlap},
          {"dwell_time", p.dwell_time}};
}

void from_json(const Json& j, PolicyParams& p, const std::string& path) {
  ObjectReader r(j, path);
  r.read("contraction", p.contraction);
  r.read("ramp_time", p.ramp_time);
  r.read("hold_time", p.hold_time);
  r.read("overlap", p.overlap);
  r.read("dwell_time", p.dwell_time);
  r.finish();
}

Json to_json(const ScenarioConfig& c) {
  return {{"rod_length", c.rod_length},
          {"physical", to_json(c.physical)},
          {"world", to_json(c.world)},
          {"policy", std::string(to_string(c.policy))},
          {"policy_params", to_json(c.policy_params)},
          {"gait", c.gait},
          {"start_face", c.start_face},
          {"duration", c.duration},
          {"success_distance", c.success_distance},
          {"trials", c.trials},
          {"seed", c.seed},
          {"perturbation_deg", c.perturbation_deg},
          {"trace_interval", c.trace_interval},
          {"thresholds",
           {{"slip_distance", c.thresholds.slip_distance}, {"rollback_distance", c.thresholds.rollback_distance}}},
          {"output_dir", c.output_dir}};
}

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig c;
  ObjectReader r(j, "config");
  r.read("rod_length", c.rod_length);
  if (const Json* v = r.find("physical")) from_json(*v, c.physical, "config.physical");
  if (const Json* v = r.find("world")) from_json(*v, c.world, "config.world");
  if (const Json* v = r.find("policy")) {
    if (!v->is_string()) throw Error(ErrorKind::Config, "config.policy must be a string");
    try {
      c.policy = parse_policy_kind(v->get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
  }
  if (const Json* v = r.find("policy_params")) from_json(*v, c.policy_params, "config.policy_params");
  r.read("gait", c.gait);
  r.read("start_face", c.start_face);
  r.read("duration", c.duration);
  r.read("success_distance", c.success_distance);
  r.read("trials", c.trials);
  r.read("seed", c.seed);
  r.read("perturbation_deg", c.perturbation_deg);
  r.read("trace_interval", c.trace_interval);
  if (const Json* v = r.find("thresholds")) {
    ObjectReader t(*v, "config.thresholds");
    t.read("slip_distance", c.thresholds.slip_distance);
    t.read("rollback_distance", c.thresholds.rollback_distance);
    t.finish();
  }
  r.read("output_dir", c.output_dir);
  r.finish();
  validate(c);
  return c;
}

Json to_json(const TensegrityTopology& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) nodes.push_back(to_json(n));
  Json rods = Json::array();
  for (const Edge& e : t.rods) rods.push_back({e.a, e.b});
  Json cables = Json::array();
  for (int c = 0; c < kCableCount; ++c) {
    const Edge& e = t.cables[c];
    cables.push_back({{"index", c},
                      {"nodes", {e.a, e.b}},
                      {"actuated", t.actuators.is_actuated(c)},
                      {"max_contraction", t.actuators.max_contraction[c]}});
  }
  Json faces = Json::array();
  for (const Face& f : t.faces) faces.push_back({f[0], f[1], f[2]});
  return {{"rod_length", t.rod_length},
          {"cable_rest_length", t.cable_rest_length},
          {"nodes", nodes},
          {"rods", rods},
          {"cables", cables},
          {"stable_faces", faces},
          {"actuator_sequence", t.actuators.sequence}};
}

}  // namespace detail

using detail::Json;

namespace {

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

Json trial_json(const TrialResult& r, bool traces) {
  Json j = {{"valid", r.valid},
            {"diagnostic", r.diagnostic},
            {"incline_deg", r.incline_deg},
            {"policy", std::string(to_string(r.policy))},
            {"trial_index", r.trial_index},
            {"distance_along_incline", r.distance_along_incline},
            {"avg_velocity", r.avg_velocity},
            {"elapsed", r.elapsed},
            {"success", r.success},
            {"failure_mode", std::string(to_string(r.failure_mode))},
            {"step_count", r.step_count},
            {"neutral_height", r.neutral_height},
            {"max_com_height_pct", r.max_com_height_pct}};
  Json changes = Json::array();
  for (const FaceChange& f : r.face_changes) {
    changes.push_back({{"t", f.time}, {"from", f.from}, {"to", f.to}, {"displacement", f.displacement}});
  }
  j["face_changes"] = changes;
  if (traces) {
    Json com = Json::array();
    for (const ComSample& s : r.com_trace) {
      com.push_back({{"t", s.t}, {"com", detail::to_json(s.com)}, {"height_pct", s.height_pct}});
    }
    Json margins = Json::array();
    for (const MarginSample& m : r.margin_trace) {
      margins.push_back({{"t", m.t}, {"uphill", m.uphill}, {"downhill", m.downhill}, {"contacts", m.contacts}});
    }
    j["com_trace"] = com;
    j["margin_trace"] = margins;
  }
  return j;
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  return detail::scenario_from_json(j);
}

ScenarioConfig load_scenario(const std::string& path) { return scenario_from_json(read_text(path)); }

std::string scenario_to_json(const ScenarioConfig& config) { return detail::to_json(config).dump(2); }

std::string trial_result_to_json(const TrialResult& result) { return trial_json(result, true).dump(2); }

std::string topology_to_json(const TensegrityTopology& topology) { return detail::to_json(topology).dump(2); }

std::string schedule_to_json(const PolicySchedule& s) {
  Json phases = Json::array();
  for (const ActuationPhase& p : s.phases) {
    phases.push_back({{"cable", p.cable},
                      {"t_contract_start", p.t_contract_start},
                      {"t_full", p.t_full},
                      {"t_release_start", p.t_release_start},
                      {"t_neutral", p.t_neutral},
                      {"contraction", p.contraction}});
  }
  const Json j = {{"kind", std::string(to_string(s.kind))},
                  {"params", detail::to_json(s.params)},
                  {"sequence", s.sequence},
                  {"step_period", s.step_period},
                  {"cycle_period", s.cycle_period},
                  {"repeat_count", s.repeat_count},
                  {"duration", s.duration()},
                  {"phases", phases}};
  return j.dump(2);
}

std::string sweep_to_json(const std::vector<SweepResult>& sweeps) {
  Json out = Json::array();
  for (const SweepResult& s : sweeps) {
    Json points = Json::array();
    for (const SweepPoint& p : s.points) {
      Json trials = Json::array();
      for (const TrialResult& r : p.results) trials.push_back(trial_json(r, false));
      points.push_back({{"incline_deg", p.incline_deg},
                        {"successes", p.successes},
                        {"trials", p.trials},
                        {"success_rate", p.success_rate},
                        {"avg_velocity", p.avg_velocity},
                        {"results", trials}});
    }
    out.push_back({{"policy", std::string(to_string(s.policy))},
                   {"max_reliable_incline", s.max_reliable_incline},
                   {"points", points}});
  }
  return out.dump(2);
}

std::string com_trace_csv(const TrialResult& result) {
  std::ostringstream out;
  out << "t,x,y,z,height_pct\n";
  for (const ComSample& s : result.com_trace) {
    out << format_number(s.t) << ',' << format_number(s.com.x()) << ',' << format_number(s.com.y()) << ','
        << format_number(s.com.z()) << ',' << format_number(s.height_pct) << '\n';
  }
  return out.str();
}

std::string margins_csv(const TrialResult& result) {
  std::ostringstream out;
  out << "t,uphill,downhill,contacts\n";
  for (const MarginSample& m : result.margin_trace) {
    out << format_number(m.t) << ',' << format_number(m.uphill) << ',' << format_number(m.downhill) << ','
        << m.contacts << '\n';
  }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepResult>& sweeps) {
  std::ostringstream out;
  out << "theta,policy,success_rate,avg_velocity\n";
  for (const SweepResult& s : sweeps) {
    for (const SweepPoint& p : s.points) {
      out << format_number(p.incline_deg) << ',' << to_string(s.policy) << ',' << format_number(p.success_rate)
          << ',' << format_number(p.avg_velocity) << '\n';
    }
  }
  return out.str();
}

std::string schedule_csv(const PolicySchedule& schedule, double interval) {
  if (!(interval > 0.0)) throw Error(ErrorKind::InvalidParameter, "sample interval must be positive");
  std::ostringstream out;
  out << 't';
  for (int c : schedule.sequence) out << ",cable_" << c;
  out << '\n';
  const double end = schedule.duration();
  const long samples = std::lround(std::floor(end / interval + 1e-9));
  for (long i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) * interval;
    const auto targets = targets_at(schedule, t);
    out << format_number(t);
    for (int c : schedule.sequence) out << ',' << format_number(targets[c]);
    out << '\n';
  }
  return out.str();
}

std::string required_contraction_csv(const std::vector<RequiredContractionRow>& rows) {
  std::ostringstream out;
  out << "theta,step,cable,required_fraction\n";
  for (const RequiredContractionRow& r : rows) {
    out << format_number(r.incline_deg) << ',' << r.step << ',' << r.cable << ','
        << (r.fraction ? format_number(*r.fraction) : std::string("NA")) << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Config, "failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace tensegrity
