// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test fixtures: scratch directories and a synthetic KITTI-layout
// dataset with known boxes.
#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "trigsim/kitti.hpp"
#include "trigsim/rng.hpp"

namespace trigsim::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "trigsim_XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A calibration file in the stock KITTI object format (values from a real
// drive, 7 significant digits).
inline constexpr const char* kSampleCalibText =
    "P0: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 0.000000000000e+00 0.000000000000e+00 "
    "7.070493000000e+02 1.805066000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 "
    "1.000000000000e+00 0.000000000000e+00\n"
    "P1: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 -3.797842000000e+02 0.000000000000e+00 "
    "7.070493000000e+02 1.805066000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 "
    "1.000000000000e+00 0.000000000000e+00\n"
    "P2: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 4.575831000000e+01 0.000000000000e+00 "
    "7.070493000000e+02 1.805066000000e+02 -3.454157000000e-01 0.000000000000e+00 0.000000000000e+00 "
    "1.000000000000e+00 4.981016000000e-03\n"
    "P3: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 -3.341081000000e+02 0.000000000000e+00 "
    "7.070493000000e+02 1.805066000000e+02 2.330660000000e+00 0.000000000000e+00 0.000000000000e+00 "
    "1.000000000000e+00 3.201153000000e-03\n"
    "R0_rect: 9.999128000000e-01 1.009263000000e-02 -8.511932000000e-03 -1.012729000000e-02 "
    "9.999406000000e-01 -4.037671000000e-03 8.470675000000e-03 4.123522000000e-03 9.999556000000e-01\n"
    "Tr_velo_to_cam: 6.927964000000e-03 -9.999722000000e-01 -2.757829000000e-03 -2.457729000000e-02 "
    "-1.162982000000e-03 2.749836000000e-03 -9.999955000000e-01 -6.127237000000e-02 9.999753000000e-01 "
    "6.931141000000e-03 -1.143899000000e-03 -3.321029000000e-01\n"
    "Tr_imu_to_velo: 9.999976000000e-01 7.553071000000e-04 -2.035826000000e-03 -8.086759000000e-01 "
    "-7.854027000000e-04 9.998898000000e-01 -1.482298000000e-02 3.195559000000e-01 2.024406000000e-03 "
    "1.482454000000e-02 9.998881000000e-01 -7.997231000000e-01\n";

inline std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return buf;
}

// Label for a car whose box bottom center sits at LiDAR (x, y, z_ground),
// heading `yaw_velo` (radians about LiDAR z, 0 = along +x).
inline kitti::ObjectLabel car_at(const kitti::FrameTransform& tf, double x, double y, double z_ground,
                                 double yaw_velo, std::array<double, 3> dims_hwl = {1.52, 1.63, 3.88}) {
  kitti::ObjectLabel l;
  l.object_type = "Car";
  l.truncated = 0.0;
  l.occluded = 0;
  l.alpha = -1.57;
  l.bbox_2d = {587.01, 173.33, 614.12, 200.12};
  l.dims_hwl = dims_hwl;
  const Eigen::Vector3d cam = tf.velo_to_cam({x, y, z_ground});
  l.location = {std::round(cam.x() * 100) / 100, std::round(cam.y() * 100) / 100, std::round(cam.z() * 100) / 100};
  // Camera heading ry satisfies length axis (cos ry, 0, -sin ry) ~ (-sin yaw, 0, cos yaw) in camera axes.
  double ry = -yaw_velo - std::numbers::pi / 2;
  while (ry < -std::numbers::pi) ry += 2 * std::numbers::pi;
  while (ry > std::numbers::pi) ry -= 2 * std::numbers::pi;
  l.rotation_y = std::round(ry * 100) / 100;
  return l;
}

struct FixtureOptions {
  int frames = 20;
  int ineligible_frames = 0;  // appended frames holding no target-class object
  std::uint64_t seed = 7;
  bool with_images = true;
};

// Writes velodyne/, label_2/, calib/ (and image_2/ placeholders) under
// `root`. Every eligible frame holds 1-3 cars 6-40 m ahead, a pedestrian
// and a DontCare region.
inline void write_fixture_dataset(const std::filesystem::path& root, const FixtureOptions& opt = {}) {
  namespace fs = std::filesystem;
  for (const char* d : {"velodyne", "label_2", "calib"}) fs::create_directories(root / d);
  if (opt.with_images) fs::create_directories(root / "image_2");
  const auto calib = kitti::read_calibration(kSampleCalibText);
  const kitti::FrameTransform tf(calib);
  Rng rng(opt.seed);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  for (int i = 0; i < opt.frames + opt.ineligible_frames; ++i) {
    const std::string id = frame_name(i);
    const bool eligible = i < opt.frames;
    kitti::PointCloudFrame frame{id, {}};
    const int n_points = 200 + static_cast<int>(rng.below(300));
    for (int k = 0; k < n_points; ++k) {
      frame.points.push_back({static_cast<float>(uni(-10, 60)), static_cast<float>(uni(-20, 20)),
                              static_cast<float>(uni(-2, 2)), static_cast<float>(uni(0, 1))});
    }
    kitti::write_point_cloud_file(root / "velodyne" / (id + ".bin"), frame);

    std::vector<kitti::ObjectLabel> labels;
    if (eligible) {
      const int cars = 1 + static_cast<int>(rng.below(3));
      for (int c = 0; c < cars; ++c) {
        labels.push_back(car_at(tf, uni(6, 40), uni(-8, 8), -1.73, uni(-3.1, 3.1)));
      }
    }
    kitti::ObjectLabel ped;
    ped.object_type = "Pedestrian";
    ped.bbox_2d = {712.40, 143.00, 810.73, 307.92};
    ped.dims_hwl = {1.89, 0.48, 1.20};
    ped.location = {1.84, 1.47, 8.41};
    ped.rotation_y = 0.01;
    ped.alpha = -0.20;
    labels.push_back(ped);
    kitti::ObjectLabel dc;
    dc.object_type = "DontCare";
    dc.truncated = -1;
    dc.occluded = -1;
    dc.alpha = -10;
    dc.bbox_2d = {503.89, 169.71, 590.61, 190.13};
    dc.dims_hwl = {-1, -1, -1};
    dc.location = {-1000, -1000, -1000};
    dc.rotation_y = -10;
    labels.push_back(dc);
    kitti::write_file_text(root / "label_2" / (id + ".txt"), kitti::write_labels(labels));
    kitti::write_file_text(root / "calib" / (id + ".txt"), kSampleCalibText);
    if (opt.with_images) kitti::write_file_text(root / "image_2" / (id + ".png"), "not really a png " + id);
  }
}

// Byte-for-byte comparison of two directory trees.
inline bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b, std::string* why = nullptr) {
  namespace fs = std::filesystem;
  std::vector<fs::path> left, right;
  for (const auto& e : fs::recursive_directory_iterator(a)) left.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b)) right.push_back(fs::relative(e.path(), b));
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  if (left != right) {
    if (why) *why = "file sets differ";
    return false;
  }
  for (const auto& rel : left) {
    if (fs::is_directory(a / rel)) continue;
    if (kitti::read_file_bytes(a / rel) != kitti::read_file_bytes(b / rel)) {
      if (why) *why = "contents differ: " + rel.string();
      return false;
    }
  }
  return true;
}

}  // namespace trigsim::testing
