#include "dnmap/scan_io.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace dnmap {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Parses whitespace-separated doubles; false if any token is not a number.
bool parse_numbers(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    double v = 0;
    const char* first = line.data() + i;
    const char* last = line.data() + j;
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return false;
    out.push_back(v);
    i = j;
  }
  return true;
}

}  // namespace

ScanFormat scan_format_for(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz") return ScanFormat::xyz_ascii;
  if (ext == ".ply") return ScanFormat::ply_binary;
  throw InputError("unsupported scan file extension '" + ext + "' in '" + path.string() + "'");
}

std::vector<Vec3> read_xyz(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Vec3> pts;
  std::vector<double> nums;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!parse_numbers(t, nums) || nums.size() != 3) {
      throw ParseError(fmt::format("{}:{}: expected three numbers 'x y z'", path.string(), lineno),
                       lineno);
    }
    pts.emplace_back(nums[0], nums[1], nums[2]);
  }
  return pts;
}

void write_xyz(const fs::path& path, std::span<const Vec3> points) {
  auto out = open_out(path);
  for (const auto& p : points) out << fmt::format("{} {} {}\n", p.x(), p.y(), p.z());
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::vector<Vec3> read_ply_points(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, what), lineno);
  };
  if (!std::getline(in, line) || trim(line) != "ply") {
    lineno = 1;
    fail("missing 'ply' magic");
  }
  lineno = 1;
  std::size_t count = 0;
  bool have_vertex = false;
  bool in_vertex = false;
  std::vector<std::string> props;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls{std::string(trim(line))};
    std::string kw;
    ls >> kw;
    if (kw == "end_header") {
      ended = true;
      break;
    }
    if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
    if (kw == "format") {
      std::string f, v;
      ls >> f >> v;
      if (f != "binary_little_endian") fail("only binary_little_endian PLY is supported");
    } else if (kw == "element") {
      std::string name;
      std::size_t n = 0;
      if (!(ls >> name >> n)) fail("malformed element line");
      in_vertex = name == "vertex";
      if (in_vertex) {
        have_vertex = true;
        count = n;
      } else if (n != 0) {
        fail("unsupported non-empty element '" + name + "'");
      }
    } else if (kw == "property") {
      std::string type, name;
      if (!(ls >> type >> name)) fail("malformed property line");
      if (!in_vertex) continue;
      if (type != "float" && type != "float32") fail("vertex property '" + name + "' must be float");
      props.push_back(name);
    } else {
      fail("unexpected header keyword '" + kw + "'");
    }
  }
  if (!ended) fail("missing end_header");
  if (!have_vertex) fail("no vertex element");
  if (props != std::vector<std::string>{"x", "y", "z"}) fail("vertex properties must be exactly x y z");

  std::vector<float> buf(3 * count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(float)) {
    throw FormatError("'" + path.string() + "': truncated vertex data");
  }
  std::vector<Vec3> pts(count);
  for (std::size_t i = 0; i < count; ++i) pts[i] = Vec3(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  return pts;
}

void write_ply_points(const fs::path& path, std::span<const Vec3> points) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\nend_header\n";
  std::vector<float> buf;
  buf.reserve(3 * points.size());
  for (const auto& p : points) {
    buf.push_back(static_cast<float>(p.x()));
    buf.push_back(static_cast<float>(p.y()));
    buf.push_back(static_cast<float>(p.z()));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::vector<Vec3> read_scan(const fs::path& path) {
  return scan_format_for(path) == ScanFormat::xyz_ascii ? read_xyz(path) : read_ply_points(path);
}

void write_scan(const fs::path& path, std::span<const Vec3> points) {
  if (scan_format_for(path) == ScanFormat::xyz_ascii) {
    write_xyz(path, points);
  } else {
    write_ply_points(path, points);
  }
}

std::vector<Pose> read_poses(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Pose> poses;
  std::vector<double> nums;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!parse_numbers(t, nums) || nums.size() != 12) {
      throw ParseError(fmt::format("{}:{}: expected 12 numbers (row-major 3x4 pose)", path.string(), lineno),
                       lineno);
    }
    std::array<double, 12> rows{};
    std::copy(nums.begin(), nums.end(), rows.begin());
    poses.push_back(Pose::from_rows(rows));
  }
  return poses;
}

void write_poses(const fs::path& path, std::span<const Pose> poses) {
  auto out = open_out(path);
  for (const auto& p : poses) out << fmt::format("{}\n", fmt::join(p.to_rows(), " "));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::vector<PosedScan> load_dataset(const fs::path& dir) {
  const fs::path scans_dir = dir / "scans";
  if (!fs::is_directory(scans_dir)) throw InputError("'" + scans_dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scans_dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext == ".xyz" || ext == ".ply") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const auto poses = read_poses(dir / "poses.txt");
  if (files.empty()) throw InputError("no scan files in '" + scans_dir.string() + "'");
  if (files.size() != poses.size()) {
    throw InputError(fmt::format("{} scan files but {} poses in '{}'", files.size(), poses.size(),
                                 dir.string()));
  }
  std::vector<PosedScan> scans(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto pts = read_scan(files[i]);
    scans[i].origin = poses[i].translation;
    scans[i].endpoints.reserve(pts.size());
    for (const auto& p : pts) scans[i].endpoints.push_back(poses[i].apply(p));
  }
  return scans;
}

void write_dataset(const fs::path& dir, std::span<const std::vector<Vec3>> sensor_points,
                   std::span<const Pose> poses, ScanFormat format) {
  if (sensor_points.size() != poses.size()) throw InputError("scan and pose counts differ");
  fs::create_directories(dir / "scans");
  const char* ext = format == ScanFormat::xyz_ascii ? "xyz" : "ply";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    write_scan(dir / "scans" / fmt::format("{:06}.{}", i, ext), sensor_points[i]);
  }
  write_poses(dir / "poses.txt", poses);
}

}  // namespace dnmap
