#pragma once

#include "dnmap/scene.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace dnmap {

enum class ScanFormat { xyz_ascii, ply_binary };

/// Picks the format from the extension (.xyz / .ply). Throws InputError otherwise.
ScanFormat scan_format_for(const std::filesystem::path& path);

/// One "x y z" triple per line; blank lines and '#' comments are ignored.
/// Malformed lines raise ParseError with the 1-based line number.
std::vector<Vec3> read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, std::span<const Vec3> points);

/// Binary little-endian PLY with exactly float x, y, z vertex properties.
std::vector<Vec3> read_ply_points(const std::filesystem::path& path);
void write_ply_points(const std::filesystem::path& path, std::span<const Vec3> points);

std::vector<Vec3> read_scan(const std::filesystem::path& path);
void write_scan(const std::filesystem::path& path, std::span<const Vec3> points);

/// One row-major 3x4 world-from-sensor matrix (12 numbers) per line.
std::vector<Pose> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, std::span<const Pose> poses);

/// Dataset directory: `poses.txt` plus `scans/` holding one .xyz or .ply file
/// per pose, paired in lexicographic filename order. Endpoints are returned
/// in the world frame. Throws InputError on a count mismatch or an empty set.
std::vector<PosedScan> load_dataset(const std::filesystem::path& dir);

/// Writes sensor-frame points and poses in the layout load_dataset reads.
void write_dataset(const std::filesystem::path& dir,
                   std::span<const std::vector<Vec3>> sensor_points, std::span<const Pose> poses,
                   ScanFormat format);

}  // namespace dnmap
