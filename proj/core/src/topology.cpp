#include "tensegrity/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/Geometry>

#include "tensegrity/error.hpp"

namespace tensegrity {

namespace {

bool near_rel(double value, double expected, double rel) {
  return std::abs(value - expected) <= rel * std::abs(expected);
}

}  // namespace

bool ActuatorMap::is_actuated(int cable) const {
  return std::find(sequence.begin(), sequence.end(), cable) != sequence.end();
}

int TensegrityTopology::rod_of(int node) const {
  for (int r = 0; r < kRodCount; ++r) {
    if (rods[r].a == node || rods[r].b == node) return r;
  }
  throw Error(ErrorKind::InvalidParameter, "node " + std::to_string(node) + " has no rod");
}

int TensegrityTopology::rod_partner(int node) const {
  const Edge& rod = rods[rod_of(node)];
  return rod.a == node ? rod.b : rod.a;
}

std::optional<int> TensegrityTopology::cable_between(int i, int j) const {
  const Edge key{std::min(i, j), std::max(i, j)};
  const auto it = std::lower_bound(cables.begin(), cables.end(), key, [](const Edge& l, const Edge& r) {
    return l.a != r.a ? l.a < r.a : l.b < r.b;
  });
  if (it != cables.end() && *it == key) return static_cast<int>(it - cables.begin());
  return std::nullopt;
}

TensegrityTopology build_six_bar(double rod_length) {
  if (!(rod_length > 0.0) || !std::isfinite(rod_length)) {
    throw Error(ErrorKind::InvalidParameter, "rod_length must be positive");
  }
  TensegrityTopology topo;
  topo.rod_length = rod_length;
  topo.cable_rest_length = rod_length * std::sqrt(6.0) / 4.0;

  const double q = rod_length / 4.0;
  const double h = rod_length / 2.0;
  std::vector<Eigen::Vector3d> nodes;
  for (double s1 : {-1.0, 1.0}) {
    for (double s2 : {-1.0, 1.0}) {
      const Eigen::Vector3d base(0.0, s1 * q, s2 * h);
      for (int k = 0; k < 3; ++k) {
        nodes.emplace_back(base[(3 - k) % 3], base[(4 - k) % 3], base[(5 - k) % 3]);
      }
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const Eigen::Vector3d& l, const Eigen::Vector3d& r) {
    return std::lexicographical_compare(l.data(), l.data() + 3, r.data(), r.data() + 3);
  });
  std::copy(nodes.begin(), nodes.end(), topo.nodes.begin());

  // Rods join nodes at distance L, cables nearest neighbours at L*sqrt(6)/4.
  int rod = 0;
  int cable = 0;
  for (int i = 0; i < kNodeCount; ++i) {
    for (int j = i + 1; j < kNodeCount; ++j) {
      const double d = (topo.nodes[i] - topo.nodes[j]).norm();
      if (near_rel(d, rod_length, 1e-9)) {
        if (rod >= kRodCount) throw Error(ErrorKind::InvalidParameter, "too many rods");
        topo.rods[rod++] = {i, j};
      } else if (near_rel(d, topo.cable_rest_length, 1e-9)) {
        if (cable >= kCableCount) throw Error(ErrorKind::InvalidParameter, "too many cables");
        topo.cables[cable++] = {i, j};
      }
    }
  }
  const auto faces = stable_faces(topo);
  if (faces.size() != kStableFaceCount) throw Error(ErrorKind::InvalidParameter, "expected 8 stable faces");
  std::copy(faces.begin(), faces.end(), topo.faces.begin());
  validate(topo);
  return topo;
}

TensegrityTopology with_actuators(TensegrityTopology topology, std::vector<int> sequence,
                                  double max_contraction) {
  if (!(max_contraction >= 0.0 && max_contraction < 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "max contraction must lie in [0, 1)");
  }
  std::set<int> seen;
  for (int c : sequence) {
    if (c < 0 || c >= kCableCount) {
      throw Error(ErrorKind::InvalidParameter, "actuated cable " + std::to_string(c) + " out of range");
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::InvalidParameter, "actuated cable " + std::to_string(c) + " repeated");
    }
  }
  topology.actuators.max_contraction.fill(0.0);
  for (int c : sequence) topology.actuators.max_contraction[c] = max_contraction;
  topology.actuators.sequence = std::move(sequence);
  return topology;
}

std::vector<Face> stable_faces(const TensegrityTopology& topology) {
  std::vector<Face> faces;
  for (int i = 0; i < kNodeCount; ++i) {
    for (int j = i + 1; j < kNodeCount; ++j) {
      if (!topology.is_cable(i, j)) continue;
      for (int k = j + 1; k < kNodeCount; ++k) {
        if (topology.is_cable(i, k) && topology.is_cable(j, k)) faces.push_back({i, j, k});
      }
    }
  }
  return faces;
}

Eigen::Vector3d face_normal(const TensegrityTopology& topology, const Face& face) {
  const Eigen::Vector3d& p0 = topology.nodes[face[0]];
  const Eigen::Vector3d& p1 = topology.nodes[face[1]];
  const Eigen::Vector3d& p2 = topology.nodes[face[2]];
  Eigen::Vector3d n = (p1 - p0).cross(p2 - p0).normalized();
  const Eigen::Vector3d centroid = (p0 + p1 + p2) / 3.0;
  if (n.dot(centroid) < 0.0) n = -n;
  return n;
}

std::optional<std::array<int, kNodeCount>> node_permutation(const TensegrityTopology& topology,
                                                            const Eigen::Matrix3d& map) {
  std::array<int, kNodeCount> perm{};
  const double tol = 1e-9 * topology.rod_length;
  for (int i = 0; i < kNodeCount; ++i) {
    const Eigen::Vector3d image = map * topology.nodes[i];
    int match = -1;
    for (int j = 0; j < kNodeCount; ++j) {
      if ((image - topology.nodes[j]).norm() <= tol) {
        match = j;
        break;
      }
    }
    if (match < 0) return std::nullopt;
    perm[i] = match;
  }
  return perm;
}

std::array<int, kCableCount> cable_permutation(const TensegrityTopology& topology,
                                               const std::array<int, kNodeCount>& nodes) {
  std::array<int, kCableCount> perm{};
  for (int c = 0; c < kCableCount; ++c) {
    const auto image = topology.cable_between(nodes[topology.cables[c].a], nodes[topology.cables[c].b]);
    if (!image) throw Error(ErrorKind::InvalidParameter, "node permutation does not preserve cables");
    perm[c] = *image;
  }
  return perm;
}

void validate(const TensegrityTopology& topology) {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidParameter, msg); };
  std::array<int, kNodeCount> rod_degree{};
  std::array<int, kNodeCount> cable_degree{};
  for (const Edge& r : topology.rods) {
    if (!(r.a < r.b) || r.a < 0 || r.b >= kNodeCount) fail("malformed rod");
    if (!near_rel((topology.nodes[r.a] - topology.nodes[r.b]).norm(), topology.rod_length, 1e-9)) {
      fail("rod length mismatch");
    }
    ++rod_degree[r.a];
    ++rod_degree[r.b];
  }
  for (const Edge& c : topology.cables) {
    if (!(c.a < c.b) || c.a < 0 || c.b >= kNodeCount) fail("malformed cable");
    if (!near_rel((topology.nodes[c.a] - topology.nodes[c.b]).norm(), topology.cable_rest_length, 1e-9)) {
      fail("cable length mismatch");
    }
    ++cable_degree[c.a];
    ++cable_degree[c.b];
  }
  for (int i = 0; i < kNodeCount; ++i) {
    if (rod_degree[i] != 1 || cable_degree[i] != 4) fail("node " + std::to_string(i) + " has wrong degree");
  }
  if (stable_faces(topology).size() != kStableFaceCount) fail("expected 8 stable faces");
}

}  // namespace tensegrity
