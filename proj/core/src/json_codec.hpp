#pragma once

// Shared nlohmann encoders. Private to the core library.

#include <set>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "tensegrity/error.hpp"
#include "tensegrity/harness.hpp"

namespace tensegrity::detail {

using Json = nlohmann::json;

/// Reads fields out of a JSON object and complains about leftovers, so typos
/// in config files do not silently fall back to defaults.
class ObjectReader {
 public:
  ObjectReader(const Json& object, std::string path);

  template <typename T>
  void read(const char* key, T& out) {
    const Json* value = find(key);
    if (!value) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!value->is_number_integer()) throw Error(ErrorKind::Config, path_ + "." + key + " must be an integer");
    }
    try {
      out = value->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::Config, path_ + "." + key + " has the wrong type");
    }
  }

  const Json* find(const char* key);
  const std::string& path() const { return path_; }
  void finish() const;

 private:
  const Json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const PhysicalParams& params);
Json to_json(const WorldConfig& world);
Json to_json(const PolicyParams& params);
Json to_json(const ScenarioConfig& config);
Json to_json(const TensegrityTopology& topology);
Json to_json(const Eigen::Vector3d& v);
Json to_json(const Eigen::Vector2d& v);

void from_json(const Json& j, PhysicalParams& params, const std::string& path);
void from_json(const Json& j, WorldConfig& world, const std::string& path);
void from_json(const Json& j, PolicyParams& params, const std::string& path);
ScenarioConfig scenario_from_json(const Json& j);

}  // namespace tensegrity::detail
