#include "dnmap/scan_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace {

using namespace dnmap;

std::vector<Vec3> float_cloud(std::size_t n, std::uint64_t seed) {
  auto pts = testutil::random_cloud(n, 50.0, seed);
  for (auto& p : pts) p = p.cast<float>().cast<double>();
  return pts;
}

TEST(ScanIo, XyzRoundTripIsExact) {
  testutil::TempDir dir("xyz");
  const auto pts = testutil::random_cloud(500, 50.0, 1);
  write_xyz(dir / "a.xyz", pts);
  EXPECT_EQ(read_xyz(dir / "a.xyz"), pts);
}

TEST(ScanIo, PlyRoundTripIsExactForFloatValues) {
  testutil::TempDir dir("ply");
  const auto pts = float_cloud(500, 2);
  write_ply_points(dir / "a.ply", pts);
  EXPECT_EQ(read_ply_points(dir / "a.ply"), pts);
  write_scan(dir / "b.ply", pts);
  EXPECT_EQ(read_scan(dir / "b.ply"), pts);
}

TEST(ScanIo, XyzSkipsCommentsAndReportsBadLine) {
  testutil::TempDir dir("xyzbad");
  {
    std::ofstream f(dir / "ok.xyz");
    f << "# header\n1 2 3\n\n4 5 6\n";
  }
  EXPECT_EQ(read_xyz(dir / "ok.xyz").size(), 2u);
  {
    std::ofstream f(dir / "bad.xyz");
    f << "1 2 3\n# c\n4 five 6\n";
  }
  try {
    read_xyz(dir / "bad.xyz");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos);
  }
  {
    std::ofstream f(dir / "short.xyz");
    f << "1 2\n";
  }
  EXPECT_THROW(read_xyz(dir / "short.xyz"), ParseError);
}

TEST(ScanIo, FormatFromExtension) {
  EXPECT_EQ(scan_format_for("a.xyz"), ScanFormat::xyz_ascii);
  EXPECT_EQ(scan_format_for("a.ply"), ScanFormat::ply_binary);
  EXPECT_THROW(scan_format_for("a.las"), InputError);
}

TEST(ScanIo, PosesRoundTrip) {
  testutil::TempDir dir("poses");
  const auto poses = orbit_poses(5, 3.0);
  write_poses(dir / "poses.txt", poses);
  const auto back = read_poses(dir / "poses.txt");
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(back[i].rotation, poses[i].rotation);
    EXPECT_EQ(back[i].translation, poses[i].translation);
  }
  {
    std::ofstream f(dir / "bad.txt");
    f << "1 0 0 0 0 1 0 0 0 0 1\n";
  }
  EXPECT_THROW(read_poses(dir / "bad.txt"), ParseError);
}

TEST(ScanIo, DatasetAppliesPoses) {
  for (auto format : {ScanFormat::xyz_ascii, ScanFormat::ply_binary}) {
    testutil::TempDir dir("dataset");
    const std::vector<std::vector<Vec3>> pts{float_cloud(20, 3), float_cloud(30, 4)};
    Pose identity;
    Pose shifted;
    shifted.translation = Vec3(1, 2, 3);
    const std::vector<Pose> poses{identity, shifted};
    write_dataset(dir.path(), pts, poses, format);
    const auto scans = load_dataset(dir.path());
    ASSERT_EQ(scans.size(), 2u);
    EXPECT_EQ(scans[0].endpoints, pts[0]);
    EXPECT_EQ(scans[0].origin, Vec3::Zero());
    EXPECT_EQ(scans[1].origin, Vec3(1, 2, 3));
    for (std::size_t i = 0; i < pts[1].size(); ++i) {
      EXPECT_EQ(scans[1].endpoints[i], pts[1][i] + Vec3(1, 2, 3));
    }
  }
}

TEST(ScanIo, DatasetCountMismatchAndEmpty) {
  testutil::TempDir dir("mismatch");
  const std::vector<std::vector<Vec3>> pts{float_cloud(5, 5), float_cloud(5, 6)};
  const std::vector<Pose> poses(2);
  write_dataset(dir.path(), pts, poses, ScanFormat::xyz_ascii);
  write_poses(dir / "poses.txt", std::vector<Pose>(3));
  EXPECT_THROW(load_dataset(dir.path()), InputError);

  testutil::TempDir empty("empty");
  EXPECT_THROW(load_dataset(empty.path()), InputError);
}

}  // namespace
