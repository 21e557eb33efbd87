#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace tensegrity {

inline constexpr int kNodeCount = 12;
inline constexpr int kRodCount = 6;
inline constexpr int kCableCount = 24;
inline constexpr int kStableFaceCount = 8;
inline constexpr int kActuatorCount = 6;

struct Edge {
  int a = 0;  // always a < b
  int b = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

using Face = std::array<int, 3>;

/// Which cables carry actuators, in gait order, and how far each may contract
/// (fraction of its neutral rest length). Non-actuated cables have a limit of 0.
struct ActuatorMap {
  std::vector<int> sequence;
  std::array<double, kCableCount> max_contraction{};

  bool is_actuated(int cable) const;
};

/// Six-bar spherical tensegrity. Coordinates are in cm, body frame centred on
/// the geometric centre; nodes are sorted lexicographically, rods and cables
/// by (a, b).
struct TensegrityTopology {
  std::array<Eigen::Vector3d, kNodeCount> nodes;
  std::array<Edge, kRodCount> rods;
  std::array<Edge, kCableCount> cables;
  ActuatorMap actuators;
  std::array<Face, kStableFaceCount> faces{};  // cached stable_faces()
  double rod_length = 0.0;
  double cable_rest_length = 0.0;

  /// Rod index that ends at `node`.
  int rod_of(int node) const;
  /// Opposite end of the rod touching `node`.
  int rod_partner(int node) const;
  /// Cable index joining two nodes, if any.
  std::optional<int> cable_between(int i, int j) const;
  bool is_cable(int i, int j) const { return cable_between(i, j).has_value(); }
};

/// Builds the expanded-octahedron six-bar with nodes at the cyclic permutations
/// of (0, ±L/4, ±L/2). Throws Error{InvalidParameter} for rod_length <= 0.
TensegrityTopology build_six_bar(double rod_length);

/// Attaches an actuator map. Throws Error{InvalidParameter} on duplicate or
/// out-of-range cables, or limits outside [0, 1).
TensegrityTopology with_actuators(TensegrityTopology topology, std::vector<int> sequence,
                                  double max_contraction);

/// Node triples whose three pairwise links are all cables, sorted.
std::vector<Face> stable_faces(const TensegrityTopology& topology);

/// Outward unit normal of a face in the body frame.
Eigen::Vector3d face_normal(const TensegrityTopology& topology, const Face& face);

/// Node permutation induced by an orthogonal map of the body frame, or nullopt
/// when the map is not a symmetry of the node set.
std::optional<std::array<int, kNodeCount>> node_permutation(const TensegrityTopology& topology,
                                                            const Eigen::Matrix3d& map);

/// Cable permutation induced by a node permutation.
std::array<int, kCableCount> cable_permutation(const TensegrityTopology& topology,
                                               const std::array<int, kNodeCount>& nodes);

/// Throws Error{InvalidParameter} naming the first violated structural invariant.
void validate(const TensegrityTopology& topology);

}  // namespace tensegrity
