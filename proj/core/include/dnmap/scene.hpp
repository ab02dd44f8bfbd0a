#pragma once

#include "dnmap/common.hpp"

#include <Eigen/Geometry>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace dnmap {

/// Rigid world-from-sensor transform.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  /// Row-major 3x4 [R | t].
  std::array<double, 12> to_rows() const;
  static Pose from_rows(const std::array<double, 12>& rows);
  /// Sensor at `eye` with its +x axis toward `target` and +z roughly along `up`.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());
};

/// A LiDAR sweep: sensor origin and ray endpoints, both in world meters.
struct PosedScan {
  Vec3 origin = Vec3::Zero();
  std::vector<Vec3> endpoints;
};

/// Union of exact-SDF primitives. Distances are negative inside.
class AnalyticScene {
 public:
  struct Primitive {
    enum class Kind { sphere, box, plane } kind;
    Vec3 a;      // sphere/box center, plane unit normal
    Vec3 b;      // box half extents
    double r;    // sphere radius, plane offset (n . p = r on the plane)
  };

  AnalyticScene& add_sphere(const Vec3& center, double radius);
  AnalyticScene& add_box(const Vec3& center, const Vec3& half_extents);
  /// Half-space n . p <= offset is solid.
  AnalyticScene& add_plane(const Vec3& normal, double offset);

  double sdf(const Vec3& p) const;
  bool empty() const noexcept { return prims_.empty(); }
  const std::vector<Primitive>& primitives() const noexcept { return prims_; }

  /// Named scenes: "sphere" (unit sphere at the origin), "box", "sphere_on_plane".
  /// Throws std::invalid_argument on an unknown name.
  static AnalyticScene named(std::string_view name);

 private:
  std::vector<Primitive> prims_;
};

/// Unit directions on a regular azimuth x elevation grid centered on the
/// sensor's +x axis.
std::vector<Vec3> grid_directions(int azimuth_count, int elevation_count, double azimuth_fov_rad,
                                  double elevation_fov_rad);

/// Sphere-traces each sensor-frame direction through `scene`. Rays that do
/// not reach the surface within `max_range` are dropped.
PosedScan virtual_lidar(const AnalyticScene& scene, const Pose& pose,
                        const std::vector<Vec3>& directions, double max_range);

/// Sensor poses on a Fibonacci sphere (or its z >= 0 half) of radius
/// `distance` around `target`, each looking at it.
std::vector<Pose> orbit_poses(int count, double distance, const Vec3& target = Vec3::Zero(),
                              bool upper_hemisphere = false);

}  // namespace dnmap
