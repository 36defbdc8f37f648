// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// KITTI object-detection files: velodyne scans (.bin), object labels
// (label_2/*.txt) and calibration (calib/*.txt), plus the camera <-> LiDAR
// transforms derived from the calibration.
#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trigsim/error.hpp"

namespace trigsim::kitti {

// One velodyne return. Coordinates in meters (x forward, y left, z up).
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
};

struct PointCloudFrame {
  std::string frame_id;  // six-digit, zero-padded
  std::vector<Point> points;
};

inline constexpr std::size_t kBytesPerPoint = 16;

namespace detail {

inline float load_f32_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void store_f32_le(float v, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits);
  p[1] = static_cast<unsigned char>(bits >> 8);
  p[2] = static_cast<unsigned char>(bits >> 16);
  p[3] = static_cast<unsigned char>(bits >> 24);
}

inline bool finite(const Point& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.intensity);
}

}  // namespace detail

// Decodes consecutive little-endian float32 (x, y, z, intensity) records.
// Intensities outside [0, 1] are kept as-is.
inline PointCloudFrame read_point_cloud(std::span<const unsigned char> bytes, std::string frame_id = {}) {
  if (bytes.size() % kBytesPerPoint != 0) {
    throw ParseError("point cloud size " + std::to_string(bytes.size()) + " is not a multiple of 16 bytes");
  }
  PointCloudFrame frame{std::move(frame_id), {}};
  frame.points.resize(bytes.size() / kBytesPerPoint);
  const unsigned char* p = bytes.data();
  for (std::size_t i = 0; i < frame.points.size(); ++i, p += kBytesPerPoint) {
    Point& pt = frame.points[i];
    pt = {detail::load_f32_le(p), detail::load_f32_le(p + 4), detail::load_f32_le(p + 8),
          detail::load_f32_le(p + 12)};
    if (!detail::finite(pt)) {
      throw ParseError("non-finite value in point " + std::to_string(i), i);
    }
  }
  return frame;
}

inline std::vector<unsigned char> write_point_cloud(const PointCloudFrame& frame) {
  std::vector<unsigned char> out(frame.points.size() * kBytesPerPoint);
  unsigned char* p = out.data();
  for (std::size_t i = 0; i < frame.points.size(); ++i, p += kBytesPerPoint) {
    const Point& pt = frame.points[i];
    if (!detail::finite(pt)) throw InvalidArgument("non-finite value in point " + std::to_string(i));
    detail::store_f32_le(pt.x, p);
    detail::store_f32_le(pt.y, p + 4);
    detail::store_f32_le(pt.z, p + 8);
    detail::store_f32_le(pt.intensity, p + 12);
  }
  return out;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failed", path);
  return bytes;
}

inline std::string read_file_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create file", path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path);
}

inline void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

inline PointCloudFrame read_point_cloud_file(const std::filesystem::path& path) {
  try {
    return read_point_cloud(read_file_bytes(path), path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.location());
  }
}

inline void write_point_cloud_file(const std::filesystem::path& path, const PointCloudFrame& frame) {
  write_file_bytes(path, write_point_cloud(frame));
}

// ---------------------------------------------------------------------------
// Labels

struct ObjectLabel {
  std::string object_type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox_2d{};    // left, top, right, bottom (pixels)
  std::array<double, 3> dims_hwl{};   // height, width, length (m)
  std::array<double, 3> location{};   // camera frame, bottom center of the box (m)
  double rotation_y = 0.0;

  bool has_valid_box() const {
    return dims_hwl[0] > 0.0 && dims_hwl[1] > 0.0 && dims_hwl[2] > 0.0 && std::isfinite(dims_hwl[0]) &&
           std::isfinite(dims_hwl[1]) && std::isfinite(dims_hwl[2]) && std::isfinite(location[0]) &&
           std::isfinite(location[1]) && std::isfinite(location[2]) && std::isfinite(rotation_y);
  }

  friend bool operator==(const ObjectLabel&, const ObjectLabel&) = default;
};

inline constexpr std::size_t kLabelFieldCount = 15;

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line_no, const char* field) {
  T value{};
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse " + field + " '" +
                         std::string(token) + "'",
                     line_no);
  }
  return value;
}

}  // namespace detail

// One label per non-blank line, 15 whitespace-separated fields.
inline std::vector<ObjectLabel> read_labels(std::string_view text) {
  std::vector<ObjectLabel> labels;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto f = detail::split_ws(line);
    if (f.empty()) continue;
    if (f.size() != kLabelFieldCount) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 15 fields, found " +
                           std::to_string(f.size()),
                       line_no);
    }
    using detail::parse_number;
    ObjectLabel l;
    l.object_type = std::string(f[0]);
    l.truncated = parse_number<double>(f[1], line_no, "truncated");
    l.occluded = parse_number<int>(f[2], line_no, "occluded");
    l.alpha = parse_number<double>(f[3], line_no, "alpha");
    for (std::size_t k = 0; k < 4; ++k) l.bbox_2d[k] = parse_number<double>(f[4 + k], line_no, "bbox");
    for (std::size_t k = 0; k < 3; ++k) l.dims_hwl[k] = parse_number<double>(f[8 + k], line_no, "dimensions");
    for (std::size_t k = 0; k < 3; ++k) l.location[k] = parse_number<double>(f[11 + k], line_no, "location");
    l.rotation_y = parse_number<double>(f[14], line_no, "rotation_y");
    labels.push_back(std::move(l));
  }
  return labels;
}

// Two-decimal fixed formatting, as in the stock KITTI label files.
inline std::string write_labels(std::span<const ObjectLabel> labels) {
  std::string out;
  char buf[512];
  for (const auto& l : labels) {
    const int n = std::snprintf(buf, sizeof(buf),
                                "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f\n",
                                l.object_type.c_str(), l.truncated, l.occluded, l.alpha, l.bbox_2d[0],
                                l.bbox_2d[1], l.bbox_2d[2], l.bbox_2d[3], l.dims_hwl[0], l.dims_hwl[1],
                                l.dims_hwl[2], l.location[0], l.location[1], l.location[2], l.rotation_y);
    if (n < 0 || static_cast<std::size_t>(n) >= sizeof(buf)) throw InvalidArgument("label line too long");
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

using Mat34 = Eigen::Matrix<double, 3, 4>;

struct CalibrationSet {
  std::array<Mat34, 4> projection{Mat34::Zero(), Mat34::Zero(), Mat34::Zero(), Mat34::Zero()};
  Eigen::Matrix3d rect_rotation = Eigen::Matrix3d::Identity();  // R0_rect
  Mat34 velo_to_cam = Mat34::Identity();                         // Tr_velo_to_cam
};

inline constexpr double kOrthonormalTolerance = 1e-3;
inline constexpr double kSingularTolerance = 1e-9;

inline void validate(const CalibrationSet& c) {
  const Eigen::Matrix3d& r0 = c.rect_rotation;
  if (std::abs(r0.determinant()) < kSingularTolerance) throw DataError("R0_rect is singular");
  if ((r0 * r0.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kOrthonormalTolerance) {
    throw DataError("R0_rect is not orthonormal within 1e-3");
  }
  const Eigen::Matrix3d rot = c.velo_to_cam.leftCols<3>();
  if (std::abs(rot.determinant()) < kSingularTolerance) throw DataError("Tr_velo_to_cam is singular");
  if ((rot * rot.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kOrthonormalTolerance) {
    throw DataError("Tr_velo_to_cam rotation is not orthonormal within 1e-3");
  }
}

// Parses "KEY: v0 v1 ..." rows. P0-P3 and Tr_velo_to_cam take 12 values,
// R0_rect 9; other keys (Tr_imu_to_velo) are ignored.
inline CalibrationSet read_calibration(std::string_view text) {
  std::map<std::string, std::vector<double>, std::less<>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      if (detail::split_ws(line).empty()) continue;
      throw ParseError("line " + std::to_string(line_no) + ": missing ':'", line_no);
    }
    const auto key_tokens = detail::split_ws(line.substr(0, colon));
    if (key_tokens.size() != 1) throw ParseError("line " + std::to_string(line_no) + ": bad key", line_no);
    std::vector<double> values;
    for (auto tok : detail::split_ws(line.substr(colon + 1))) {
      values.push_back(detail::parse_number<double>(tok, line_no, "calibration value"));
    }
    rows[std::string(key_tokens[0])] = std::move(values);
  }

  auto take = [&](const char* key, std::size_t count) -> const std::vector<double>& {
    auto it = rows.find(key);
    if (it == rows.end()) throw ParseError(std::string("calibration is missing ") + key);
    if (it->second.size() != count) {
      throw ParseError(std::string("calibration ") + key + " needs " + std::to_string(count) + " values");
    }
    return it->second;
  };
  auto mat34 = [&](const char* key) {
    const auto& v = take(key, 12);
    Mat34 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
    return m;
  };

  CalibrationSet calib;
  const char* projection_keys[] = {"P0", "P1", "P2", "P3"};
  for (std::size_t i = 0; i < 4; ++i) calib.projection[i] = mat34(projection_keys[i]);
  const auto& r0 = take("R0_rect", 9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) calib.rect_rotation(r, c) = r0[static_cast<std::size_t>(r * 3 + c)];
  calib.velo_to_cam = mat34("Tr_velo_to_cam");
  validate(calib);
  return calib;
}

inline std::string write_calibration(const CalibrationSet& calib) {
  std::string out;
  char buf[64];
  auto row = [&](const char* key, const double* values, int count) {
    out += key;
    out += ':';
    for (int i = 0; i < count; ++i) {
      std::snprintf(buf, sizeof(buf), " %.12e", values[i]);
      out += buf;
    }
    out += '\n';
  };
  auto mat34 = [&](const char* key, const Mat34& m) {
    double v[12];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) v[r * 4 + c] = m(r, c);
    row(key, v, 12);
  };
  const char* projection_keys[] = {"P0", "P1", "P2", "P3"};
  for (std::size_t i = 0; i < 4; ++i) mat34(projection_keys[i], calib.projection[i]);
  double r0[9];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) r0[r * 3 + c] = calib.rect_rotation(r, c);
  row("R0_rect", r0, 9);
  mat34("Tr_velo_to_cam", calib.velo_to_cam);
  return out;
}

inline CalibrationSet read_calibration_file(const std::filesystem::path& path) {
  try {
    return read_calibration(read_file_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.location());
  }
}

// Camera <-> LiDAR mapping built from a calibration. The rotation part of
// Tr_velo_to_cam is projected onto the nearest proper rotation (files store
// ~7 significant digits), so the rigid inverse is exact in both directions.
class FrameTransform {
 public:
  explicit FrameTransform(const CalibrationSet& calib) {
    validate(calib);
    const Eigen::Matrix3d raw = calib.velo_to_cam.leftCols<3>();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
    if (rot.determinant() < 0.0) throw DataError("Tr_velo_to_cam rotation is a reflection");
    velo_rotation_ = rot;
    velo_translation_ = calib.velo_to_cam.col(3);
    rect_ = calib.rect_rotation;
    rect_inverse_ = rect_.inverse();
  }

  // x_cam = R0_rect (R x_velo + t)
  Eigen::Vector3d velo_to_cam(const Eigen::Vector3d& p) const {
    return rect_ * (velo_rotation_ * p + velo_translation_);
  }

  // x_velo = R^T (R0_rect^-1 x_cam - t)
  Eigen::Vector3d cam_to_velo(const Eigen::Vector3d& p) const {
    return velo_rotation_.transpose() * (rect_inverse_ * p - velo_translation_);
  }

  // Maps a free vector (no translation) from camera to LiDAR axes.
  Eigen::Vector3d cam_direction_to_velo(const Eigen::Vector3d& v) const {
    return velo_rotation_.transpose() * (rect_inverse_ * v);
  }

 private:
  Eigen::Matrix3d velo_rotation_;
  Eigen::Vector3d velo_translation_;
  Eigen::Matrix3d rect_;
  Eigen::Matrix3d rect_inverse_;
};

inline Eigen::Vector3d cam_to_velo(const Eigen::Vector3d& p, const CalibrationSet& calib) {
  return FrameTransform(calib).cam_to_velo(p);
}

inline Eigen::Vector3d velo_to_cam(const Eigen::Vector3d& p, const CalibrationSet& calib) {
  return FrameTransform(calib).velo_to_cam(p);
}

// Calibration whose camera axes are the LiDAR axes relabelled the KITTI way:
// cam x = -velo y, cam y = -velo z, cam z = velo x. No rectification.
inline CalibrationSet axis_aligned_calibration() {
  CalibrationSet c;
  c.velo_to_cam << 0, -1, 0, 0,
                   0, 0, -1, 0,
                   1, 0, 0, 0;
  for (auto& p : c.projection) {
    p << 700, 0, 600, 0,
         0, 700, 180, 0,
         0, 0, 1, 0;
  }
  return c;
}

}  // namespace trigsim::kitti
