#include "dnmap/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dnmap {

std::array<double, 12> Pose::to_rows() const {
  std::array<double, 12> r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(4 * i + j)] = rotation(i, j);
    r[static_cast<std::size_t>(4 * i + 3)] = translation[i];
  }
  return r;
}

Pose Pose::from_rows(const std::array<double, 12>& r) {
  Pose p;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) p.rotation(i, j) = r[static_cast<std::size_t>(4 * i + j)];
    p.translation[i] = r[static_cast<std::size_t>(4 * i + 3)];
  }
  return p;
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 x = (target - eye).normalized();
  Vec3 y = up.cross(x);
  if (y.norm() < 1e-9) y = Vec3::UnitY().cross(x);
  y.normalize();
  const Vec3 z = x.cross(y);
  Pose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = y;
  p.rotation.col(2) = z;
  p.translation = eye;
  return p;
}

AnalyticScene& AnalyticScene::add_sphere(const Vec3& center, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("sphere radius must be positive");
  prims_.push_back({Primitive::Kind::sphere, center, Vec3::Zero(), radius});
  return *this;
}

AnalyticScene& AnalyticScene::add_box(const Vec3& center, const Vec3& half_extents) {
  if ((half_extents.array() <= 0).any()) throw std::invalid_argument("box extents must be positive");
  prims_.push_back({Primitive::Kind::box, center, half_extents, 0.0});
  return *this;
}

AnalyticScene& AnalyticScene::add_plane(const Vec3& normal, double offset) {
  if (normal.norm() == 0) throw std::invalid_argument("plane normal must be nonzero");
  prims_.push_back({Primitive::Kind::plane, normal.normalized(), Vec3::Zero(), offset});
  return *this;
}

double AnalyticScene::sdf(const Vec3& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& q : prims_) {
    double di = 0;
    switch (q.kind) {
      case Primitive::Kind::sphere:
        di = (p - q.a).norm() - q.r;
        break;
      case Primitive::Kind::box: {
        const Vec3 e = (p - q.a).cwiseAbs() - q.b;
        di = e.cwiseMax(0.0).norm() + std::min(e.maxCoeff(), 0.0);
        break;
      }
      case Primitive::Kind::plane:
        di = q.a.dot(p) - q.r;
        break;
    }
    d = std::min(d, di);
  }
  return d;
}

AnalyticScene AnalyticScene::named(std::string_view name) {
  AnalyticScene s;
  if (name == "sphere") {
    s.add_sphere(Vec3::Zero(), 1.0);
  } else if (name == "box") {
    s.add_box(Vec3::Zero(), Vec3(0.8, 0.6, 0.5));
  } else if (name == "sphere_on_plane") {
    s.add_sphere(Vec3(0, 0, 0.6), 0.6);
    s.add_plane(Vec3::UnitZ(), 0.0);
  } else {
    throw std::invalid_argument("unknown scene '" + std::string(name) + "'");
  }
  return s;
}

std::vector<Vec3> grid_directions(int azimuth_count, int elevation_count, double azimuth_fov,
                                  double elevation_fov) {
  if (azimuth_count <= 0 || elevation_count <= 0) {
    throw std::invalid_argument("direction grid counts must be positive");
  }
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(azimuth_count) * static_cast<std::size_t>(elevation_count));
  for (int e = 0; e < elevation_count; ++e) {
    const double el = elevation_count == 1
                          ? 0.0
                          : -0.5 * elevation_fov + elevation_fov * e / (elevation_count - 1);
    for (int a = 0; a < azimuth_count; ++a) {
      const double az =
          azimuth_count == 1 ? 0.0 : -0.5 * azimuth_fov + azimuth_fov * a / (azimuth_count - 1);
      dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
  }
  return dirs;
}

PosedScan virtual_lidar(const AnalyticScene& scene, const Pose& pose,
                        const std::vector<Vec3>& directions, double max_range) {
  constexpr int kMaxSteps = 1024;
  constexpr double kHitTolerance = 1e-7;
  PosedScan scan;
  scan.origin = pose.translation;
  for (const Vec3& local : directions) {
    const Vec3 dir = (pose.rotation * local).normalized();
    double t = 0;
    for (int step = 0; step < kMaxSteps && t <= max_range; ++step) {
      const Vec3 p = scan.origin + t * dir;
      const double d = scene.sdf(p);
      if (std::abs(d) < kHitTolerance) {
        scan.endpoints.push_back(p);
        break;
      }
      t += d;
      if (t < 0) break;
    }
  }
  return scan;
}

std::vector<Pose> orbit_poses(int count, double distance, const Vec3& target,
                              bool upper_hemisphere) {
  std::vector<Pose> poses;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double z = count == 1 ? 0.0 : 1.0 - 2.0 * (i + 0.5) / count;
    if (upper_hemisphere) z = count == 1 ? 0.5 : 1.0 - (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    const Vec3 eye = target + distance * Vec3(r * std::cos(phi), r * std::sin(phi), z);
    poses.push_back(Pose::look_at(eye, target));
  }
  return poses;
}

}  // namespace dnmap
