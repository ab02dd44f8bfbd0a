#pragma once

#include "dnmap/meshing.hpp"

#include <filesystem>

namespace dnmap {

enum class MeshFormat { ply_binary, obj_ascii };

/// From the extension (.ply / .obj); throws InputError otherwise.
MeshFormat mesh_format_for(const std::filesystem::path& path);

/// PLY: binary little-endian, float x/y/z vertices, faces as a uchar count
/// followed by int32 indices. OBJ: "v x y z" and 1-based "f a b c" lines.
/// I/O failures raise InputError naming the path.
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Reads the formats written above. Non-triangle OBJ faces are fan-split.
TriangleMesh read_mesh(const std::filesystem::path& path);

}  // namespace dnmap
