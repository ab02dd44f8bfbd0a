#include "dnmap/mesh_io.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace dnmap {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

MeshFormat mesh_format_for(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return MeshFormat::ply_binary;
  if (ext == ".obj") return MeshFormat::obj_ascii;
  throw InputError("unsupported mesh extension '" + ext + "' in '" + path.string() + "'");
}

void write_mesh(const TriangleMesh& mesh, const fs::path& path) {
  write_mesh(mesh, path, mesh_format_for(path));
}

void write_mesh(const TriangleMesh& mesh, const fs::path& path, MeshFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  if (format == MeshFormat::obj_ascii) {
    for (const auto& v : mesh.vertices) out << fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
    for (const auto& f : mesh.faces) out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  } else {
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << mesh.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    std::vector<char> buf;
    buf.reserve(mesh.vertices.size() * 12 + mesh.faces.size() * 13);
    auto put = [&](const auto& v) {
      const auto* p = reinterpret_cast<const char*>(&v);
      buf.insert(buf.end(), p, p + sizeof(v));
    };
    for (const auto& v : mesh.vertices) {
      put(static_cast<float>(v.x()));
      put(static_cast<float>(v.y()));
      put(static_cast<float>(v.z()));
    }
    for (const auto& f : mesh.faces) {
      put(static_cast<std::uint8_t>(3));
      for (auto i : f) put(static_cast<std::int32_t>(i));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

namespace {

TriangleMesh read_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  TriangleMesh m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError(fmt::format("{}:{}: malformed vertex", path.string(), lineno), lineno);
      m.vertices.emplace_back(x, y, z);
    } else if (kw == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        const long v = std::strtol(tok.c_str(), nullptr, 10);
        if (v <= 0 || static_cast<std::size_t>(v) > m.vertices.size()) {
          throw ParseError(fmt::format("{}:{}: face index out of range", path.string(), lineno), lineno);
        }
        idx.push_back(static_cast<std::uint32_t>(v - 1));
      }
      if (idx.size() < 3) throw ParseError(fmt::format("{}:{}: face has fewer than 3 vertices", path.string(), lineno), lineno);
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return m;
}

TriangleMesh read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t nv = 0, nf = 0, lineno = 0;
  std::getline(in, line);
  ++lineno;
  if (line != "ply") throw ParseError(path.string() + ":1: missing 'ply' magic", 1);
  std::string current;
  std::vector<std::string> vprops;
  bool face_ok = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string f;
      ls >> f;
      if (f != "binary_little_endian") throw ParseError(fmt::format("{}:{}: only binary_little_endian PLY is supported", path.string(), lineno), lineno);
    } else if (kw == "element") {
      std::size_t n = 0;
      ls >> current >> n;
      if (current == "vertex") nv = n;
      else if (current == "face") nf = n;
      else if (n != 0) throw ParseError(fmt::format("{}:{}: unsupported element '{}'", path.string(), lineno, current), lineno);
    } else if (kw == "property") {
      std::string type;
      ls >> type;
      if (current == "vertex") {
        std::string name;
        ls >> name;
        if (type != "float") throw ParseError(fmt::format("{}:{}: vertex properties must be float", path.string(), lineno), lineno);
        vprops.push_back(name);
      } else if (current == "face") {
        std::string ct, it;
        ls >> ct >> it;
        face_ok = type == "list" && ct == "uchar" && (it == "int" || it == "int32" || it == "uint" || it == "uint32");
        if (!face_ok) throw ParseError(fmt::format("{}:{}: face property must be 'list uchar int'", path.string(), lineno), lineno);
      }
    }
  }
  if (vprops != std::vector<std::string>{"x", "y", "z"}) {
    throw ParseError(path.string() + ": vertex properties must be exactly x y z", lineno);
  }
  TriangleMesh m;
  m.vertices.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    float xyz[3];
    if (!in.read(reinterpret_cast<char*>(xyz), sizeof(xyz))) throw FormatError("'" + path.string() + "': truncated vertex data");
    m.vertices[i] = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    std::uint8_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), 1)) throw FormatError("'" + path.string() + "': truncated face data");
    std::vector<std::int32_t> idx(count);
    if (!in.read(reinterpret_cast<char*>(idx.data()), static_cast<std::streamsize>(count * sizeof(std::int32_t)))) {
      throw FormatError("'" + path.string() + "': truncated face data");
    }
    for (auto v : idx) {
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw FormatError("'" + path.string() + "': face index out of range");
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
      m.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                         static_cast<std::uint32_t>(idx[k + 1])});
    }
  }
  return m;
}

}  // namespace

TriangleMesh read_mesh(const fs::path& path) {
  return mesh_format_for(path) == MeshFormat::ply_binary ? read_ply(path) : read_obj(path);
}

}  // namespace dnmap
