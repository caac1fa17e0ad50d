#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <Eigen/Geometry>

#include "ghiest/orientation_id.hpp"

namespace ghiest {

namespace {

// x east, y north, z up.
struct Icosphere {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
};

Icosphere icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : s.vertices) v.normalize();

  // Put vertex 5 at the zenith, then turn a ring neighbour due south.
  const Eigen::Quaterniond up = Eigen::Quaterniond::FromTwoVectors(s.vertices[5], Eigen::Vector3d::UnitZ());
  for (auto& v : s.vertices) v = up * v;
  const Eigen::Vector3d& ring = s.vertices[4];
  const double ring_azimuth = std::atan2(ring.x(), ring.y());
  const Eigen::AngleAxisd turn(ring_azimuth - kPi, Eigen::Vector3d::UnitZ());
  for (auto& v : s.vertices) v = turn * v;
  return s;
}

void subdivide(Icosphere& s) {
  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
    const int id = static_cast<int>(s.vertices.size()) - 1;
    midpoints.emplace(key, id);
    return id;
  };
  std::vector<std::array<int, 3>> faces;
  faces.reserve(s.faces.size() * 4);
  for (const auto& f : s.faces) {
    const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
    faces.push_back({f[0], a, c});
    faces.push_back({f[1], b, a});
    faces.push_back({f[2], c, b});
    faces.push_back({a, b, c});
  }
  s.faces = std::move(faces);
}

}  // namespace

bool north_facing(const Orientation& o) {
  if (o.tilt <= 15.0 * kDeg) return false;
  double az = std::fmod(o.azimuth, 2.0 * kPi);
  if (az < 0.0) az += 2.0 * kPi;
  const double from_north = std::min(az, 2.0 * kPi - az);
  return from_north <= 60.0 * kDeg + 1e-9;
}

OrientationMesh generate_mesh(int subdivision, const OrientationFilter& discard) {
  if (subdivision < 1 || subdivision > 4) throw InputError("mesh subdivision must be in [1, 4]");
  auto sphere = icosahedron();
  for (int i = 0; i < subdivision; ++i) subdivide(sphere);

  OrientationMesh mesh;
  mesh.subdivision_level = subdivision;
  bool have_zenith = false;
  for (const auto& v : sphere.vertices) {
    if (v.z() < -1e-9) continue;
    Orientation o;
    if (v.z() > 1.0 - 1e-12) {
      if (have_zenith) continue;
      have_zenith = true;
    } else {
      o.tilt = std::acos(std::clamp(v.z(), 0.0, 1.0));
      o.azimuth = std::atan2(v.x(), v.y());
      if (o.azimuth < 0.0) o.azimuth += 2.0 * kPi;
      if (o.azimuth >= 2.0 * kPi) o.azimuth = 0.0;
    }
    if (discard && discard(o)) continue;
    mesh.orientations.push_back(o);
  }
  std::sort(mesh.orientations.begin(), mesh.orientations.end(), [](const Orientation& a, const Orientation& b) {
    return std::abs(a.tilt - b.tilt) > 1e-9 ? a.tilt < b.tilt : a.azimuth < b.azimuth;
  });
  return mesh;
}

}  // namespace ghiest
