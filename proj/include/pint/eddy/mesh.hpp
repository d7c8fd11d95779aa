#pragma once

// Triangulated cross-section of a coaxial cable: wire (r < r0), insulator
// (r0 < r < r1) and conducting shield (r1 < r < r2).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pint/error.hpp"

namespace pint::eddy {

enum class Region : int { Wire = 0, Insulator = 1, Shield = 2 };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Mesh2D {
  std::vector<Point2> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<Region> regions;         // one per triangle
  std::vector<std::size_t> boundary;   // nodes on the outer circle

  std::size_t num_nodes() const noexcept { return nodes.size(); }
  std::size_t num_triangles() const noexcept { return triangles.size(); }

  /// Signed area; positive for counter-clockwise vertex order.
  double signed_area(std::size_t t) const {
    const auto& [a, b, c] = triangles[t];
    const Point2& p = nodes[a];
    const Point2& q = nodes[b];
    const Point2& r = nodes[c];
    return 0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y));
  }

  double region_area(Region reg) const {
    double s = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      if (regions[t] == reg) s += signed_area(t);
    }
    return s;
  }

  /// Distinct undirected edges.
  std::size_t num_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    e.reserve(3 * triangles.size());
    for (const auto& t : triangles) {
      for (int k = 0; k < 3; ++k) {
        std::size_t a = t[k], b = t[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        e.emplace_back(a, b);
      }
    }
    std::sort(e.begin(), e.end());
    return static_cast<std::size_t>(std::unique(e.begin(), e.end()) - e.begin());
  }
};

struct CoaxGeometry {
  double r0 = 1e-3;
  double r1 = 2e-3;
  double r2 = 3e-3;
  std::array<std::size_t, 3> radial_layers{3, 2, 4};
  std::size_t angular_divisions = 32;
};

/// Structured concentric triangulation: a centre node, then one ring of
/// `angular_divisions` nodes per radial layer, numbered ring by ring.
inline Mesh2D generate_coax_mesh(const CoaxGeometry& g) {
  if (!(0.0 < g.r0 && g.r0 < g.r1 && g.r1 < g.r2)) {
    throw ValidationError("coax radii must satisfy 0 < r0 < r1 < r2");
  }
  if (g.angular_divisions < 8) throw ValidationError("angular_divisions must be >= 8");
  for (auto n : g.radial_layers) {
    if (n < 1) throw ValidationError("every region needs at least one radial layer");
  }

  std::vector<double> radii;  // ring radii, ring 1 first
  std::vector<Region> layer_region;
  const std::array<double, 4> bounds{0.0, g.r0, g.r1, g.r2};
  for (int reg = 0; reg < 3; ++reg) {
    const std::size_t n = g.radial_layers[static_cast<std::size_t>(reg)];
    for (std::size_t k = 1; k <= n; ++k) {
      radii.push_back(bounds[reg] + (bounds[reg + 1] - bounds[reg]) * static_cast<double>(k) /
                                        static_cast<double>(n));
      layer_region.push_back(static_cast<Region>(reg));
    }
  }

  const std::size_t na = g.angular_divisions;
  Mesh2D mesh;
  mesh.nodes.push_back({0.0, 0.0});
  for (double r : radii) {
    for (std::size_t a = 0; a < na; ++a) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(na);
      mesh.nodes.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  auto node = [&](std::size_t ring, std::size_t a) { return 1 + (ring - 1) * na + a % na; };

  auto push = [&](std::size_t p, std::size_t q, std::size_t r, Region reg) {
    mesh.triangles.push_back({p, q, r});
    mesh.regions.push_back(reg);
    if (mesh.signed_area(mesh.triangles.size() - 1) < 0.0) std::swap(mesh.triangles.back()[1], mesh.triangles.back()[2]);
  };
  for (std::size_t a = 0; a < na; ++a) push(0, node(1, a), node(1, a + 1), layer_region[0]);
  for (std::size_t ring = 1; ring < radii.size(); ++ring) {
    const Region reg = layer_region[ring];
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t p = node(ring, a), q = node(ring, a + 1);
      const std::size_t r = node(ring + 1, a + 1), s = node(ring + 1, a);
      push(p, q, r, reg);
      push(p, r, s, reg);
    }
  }
  for (std::size_t a = 0; a < na; ++a) mesh.boundary.push_back(node(radii.size(), a));
  return mesh;
}

/// Plain-text mesh format:
///   # comment lines anywhere
///   nodes N        then N lines "x y"
///   triangles M    then M lines "a b c region" (0-based nodes; region 0 wire,
///                  1 insulator, 2 shield)
///   boundary K     then K lines "node"
inline void write_mesh(std::ostream& os, const Mesh2D& mesh) {
  os << "# pint coax mesh v1\n";
  os << std::setprecision(17);
  os << "nodes " << mesh.nodes.size() << '\n';
  for (const auto& p : mesh.nodes) os << p.x << ' ' << p.y << '\n';
  os << "triangles " << mesh.triangles.size() << '\n';
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    os << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << static_cast<int>(mesh.regions[t])
       << '\n';
  }
  os << "boundary " << mesh.boundary.size() << '\n';
  for (auto b : mesh.boundary) os << b << '\n';
}

inline Mesh2D read_mesh(std::istream& is) {
  auto next_line = [&](std::string& line) {
    while (std::getline(is, line)) {
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };
  auto header = [&](const char* key) {
    std::string line, word;
    std::size_t n = 0;
    if (!next_line(line)) throw ValidationError(std::string("mesh: missing section ") + key);
    std::istringstream ss(line);
    if (!(ss >> word >> n) || word != key) {
      throw ValidationError(std::string("mesh: expected '") + key + " <count>', got '" + line + "'");
    }
    return n;
  };
  auto record = [&](auto&&... fields) {
    std::string line;
    if (!next_line(line)) throw ValidationError("mesh: unexpected end of input");
    std::istringstream ss(line);
    if (!(ss >> ... >> fields)) throw ValidationError("mesh: malformed line '" + line + "'");
  };

  Mesh2D mesh;
  mesh.nodes.resize(header("nodes"));
  for (auto& p : mesh.nodes) record(p.x, p.y);
  const std::size_t nt = header("triangles");
  mesh.triangles.resize(nt);
  mesh.regions.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    int reg = 0;
    record(mesh.triangles[t][0], mesh.triangles[t][1], mesh.triangles[t][2], reg);
    if (reg < 0 || reg > 2) throw ValidationError("mesh: region tag must be 0, 1 or 2");
    for (auto v : mesh.triangles[t]) {
      if (v >= mesh.nodes.size()) throw ValidationError("mesh: triangle references missing node");
    }
    mesh.regions[t] = static_cast<Region>(reg);
  }
  mesh.boundary.resize(header("boundary"));
  for (auto& b : mesh.boundary) {
    record(b);
    if (b >= mesh.nodes.size()) throw ValidationError("mesh: boundary references missing node");
  }
  return mesh;
}

}  // namespace pint::eddy
