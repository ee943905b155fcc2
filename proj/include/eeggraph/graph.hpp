#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eeggraph/signal.hpp"
#include "eeggraph/spectral.hpp"

namespace eeggraph {

struct ElectrodePosition {
  std::string channel_name;
  double x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// One electrode site as spherical angles, degrees. Azimuth is measured in
// the horizontal plane from the right ear (+x) counterclockwise toward the
// nasion (+y at 90); elevation is the angle above the horizontal plane.
struct ElectrodeAngle {
  std::string name;
  double azimuth_deg;
  double elevation_deg;
};

// Standard 10-20 spherical angles (BESA sphere re-expressed as
// azimuth/elevation). The same table is checked in as
// fixtures/electrode_positions_1020.txt.
inline const std::vector<ElectrodeAngle>& standard_1020_angles() {
  static const std::vector<ElectrodeAngle> table = {
      {"Fp1", 108.0, -2.0}, {"Fp2", 72.0, -2.0}, {"F7", 144.0, -2.0},
      {"F3", 129.0, 30.0},  {"Fz", 90.0, 44.0},  {"F4", 51.0, 30.0},
      {"F8", 36.0, -2.0},   {"T7", 180.0, -2.0}, {"C3", 180.0, 45.0},
      {"Cz", 0.0, 90.0},    {"C4", 0.0, 45.0},   {"T8", 0.0, -2.0},
      {"P7", 216.0, -2.0},  {"P3", 231.0, 30.0}, {"Pz", 270.0, 44.0},
      {"P4", 309.0, 30.0},  {"P8", 324.0, -2.0}, {"O1", 252.0, -2.0},
      {"O2", 288.0, -2.0},
  };
  return table;
}

inline ElectrodePosition position_from_angles(const ElectrodeAngle& a) {
  const double az = a.azimuth_deg * M_PI / 180.0;
  const double el = a.elevation_deg * M_PI / 180.0;
  return {a.name, std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
          std::sin(el)};
}

// Plain-text table: one "name azimuth_deg elevation_deg" per line, '#'
// starts a comment.
inline std::vector<ElectrodeAngle> parse_electrode_table(std::istream& in) {
  std::vector<ElectrodeAngle> table;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    ElectrodeAngle a;
    if (ls >> a.name >> a.azimuth_deg >> a.elevation_deg) table.push_back(a);
  }
  return table;
}

inline std::vector<ElectrodeAngle> load_electrode_table(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open electrode table: " + path);
  return parse_electrode_table(in);
}

inline ElectrodePosition electrode_position(
    const std::string& name,
    const std::vector<ElectrodeAngle>& table = standard_1020_angles()) {
  for (const auto& a : table)
    if (a.name == name) return position_from_angles(a);
  throw MissingChannel(name);
}

// Bipolar channel sites: the normalized spherical midpoint of the two
// constituent electrodes, in the fixed channel order.
inline std::array<ElectrodePosition, kNumChannels> standard_positions(
    const std::vector<ElectrodeAngle>& table = standard_1020_angles()) {
  std::array<ElectrodePosition, kNumChannels> out;
  for (int k = 0; k < kNumChannels; ++k) {
    const auto& pair = bipolar_pairs()[static_cast<std::size_t>(k)];
    const auto a = electrode_position(pair.first, table);
    const auto b = electrode_position(pair.second, table);
    ElectrodePosition mid{bipolar_name(k), (a.x + b.x) / 2.0,
                          (a.y + b.y) / 2.0, (a.z + b.z) / 2.0};
    const double n = mid.norm();
    if (n <= 0.0)
      throw DegenerateGeometry("antipodal electrodes in pair " + mid.channel_name);
    mid.x /= n;
    mid.y /= n;
    mid.z /= n;
    out[static_cast<std::size_t>(k)] = mid;
  }
  return out;
}

inline double geodesic_distance(const ElectrodePosition& p,
                                const ElectrodePosition& q, double r = 1.0) {
  if (std::fabs(p.norm() - r) > 1e-6)
    throw OffSphere("point " + p.channel_name + " is off the sphere");
  if (std::fabs(q.norm() - r) > 1e-6)
    throw OffSphere("point " + q.channel_name + " is off the sphere");
  double dot = (p.x * q.x + p.y * q.y + p.z * q.z) / (r * r);
  dot = std::clamp(dot, -1.0, 1.0);
  return r * std::acos(dot);
}

enum class AdjacencyKind : int { Spatial = 0, Functional = 1, Combined = 2 };

struct AdjacencyMatrix {
  AdjacencyKind kind = AdjacencyKind::Combined;
  std::array<double, kNumChannels * kNumChannels> values{};

  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i * kNumChannels + j)];
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i * kNumChannels + j)];
  }
};

// Pairwise geodesic distances, min-max scaled over the off-diagonal pairs.
// With invert_to_proximity (the default) nearer channels get larger weight.
inline AdjacencyMatrix spatial_adjacency(
    const std::array<ElectrodePosition, kNumChannels>& positions,
    bool invert_to_proximity = true) {
  AdjacencyMatrix adj;
  adj.kind = AdjacencyKind::Spatial;
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = i + 1; j < kNumChannels; ++j) {
      const double d = geodesic_distance(positions[static_cast<std::size_t>(i)],
                                         positions[static_cast<std::size_t>(j)]);
      adj.at(i, j) = adj.at(j, i) = d;
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  if (!(dmax > dmin))
    throw DegenerateGeometry("all pairwise distances are equal");
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j) {
      if (i == j) {
        adj.at(i, j) = 0.0;
        continue;
      }
      const double scaled = (adj.at(i, j) - dmin) / (dmax - dmin);
      adj.at(i, j) = invert_to_proximity ? 1.0 - scaled : scaled;
    }
  return adj;
}

inline AdjacencyMatrix functional_adjacency(const Window& w) {
  AdjacencyMatrix adj;
  adj.kind = AdjacencyKind::Functional;
  adj.values = coherence_matrix(w);
  for (int i = 0; i < kNumChannels; ++i) adj.at(i, i) = 0.0;
  return adj;
}

inline AdjacencyMatrix combine_adjacency(const AdjacencyMatrix& spatial,
                                         const AdjacencyMatrix& functional) {
  if (spatial.kind != AdjacencyKind::Spatial ||
      functional.kind != AdjacencyKind::Functional)
    throw KindMismatch("combine_adjacency expects (Spatial, Functional)");
  AdjacencyMatrix out;
  out.kind = AdjacencyKind::Combined;
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j) {
      const double s = spatial.at(i, j), f = functional.at(i, j);
      if (s < 0.0 || s > 1.0 || f < 0.0 || f > 1.0)
        throw ShapeMismatch("adjacency entries must lie in [0, 1]");
      out.at(i, j) = 0.5 * (s + f);
    }
  return out;
}

}  // namespace eeggraph
