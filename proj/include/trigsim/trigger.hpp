// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Digital trigger synthesis: a planar point grid of fixed physical size whose
// sampling density falls off with target depth.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trigsim/error.hpp"
#include "trigsim/intensity.hpp"
#include "trigsim/materials.hpp"

namespace trigsim {

struct TriggerConfig {
  double width_w = 0.2;    // meters, along local y
  double height_h = 0.3;   // meters, along local z
  double scale_s = 500.0;  // points per meter of extent at 1 m depth
  int min_resolution_m_l = 4;
  MaterialSpec material = find_material(builtin_database(), "TitaniumDioxide");
  IntensityMode intensity_mode;
};

inline void validate(const TriggerConfig& c) {
  if (!(c.width_w > 0.0) || !(c.height_h > 0.0) || !(c.scale_s > 0.0) || !std::isfinite(c.width_w) ||
      !std::isfinite(c.height_h) || !std::isfinite(c.scale_s)) {
    throw InvalidArgument("trigger width, height and scale must be finite and > 0");
  }
  if (c.min_resolution_m_l < 1) throw InvalidArgument("trigger minimum resolution must be >= 1");
  validate_material(c.material);
}

struct GridResolution {
  int n_y = 0;
  int n_z = 0;

  friend bool operator==(const GridResolution&, const GridResolution&) = default;
};

namespace detail {

// Ceiling that treats values within 1e-9 of an integer as that integer, so
// 500 * 0.3 / 10 lands on 15 however the product rounds.
inline int ceil_count(double x) {
  constexpr double kSnap = 1e-9;
  const double nearest = std::round(x);
  const double c = std::abs(x - nearest) <= kSnap ? nearest : std::ceil(x);
  if (c > 1e8) throw InvalidArgument("trigger resolution is unreasonably large; depth too small");
  return static_cast<int>(c);
}

}  // namespace detail

// n = max(m_l, ceil(s * extent / d)) per axis.
inline GridResolution grid_resolution(const TriggerConfig& config, double depth_d) {
  validate(config);
  if (!(depth_d > 0.0) || std::isnan(depth_d)) throw InvalidArgument("depth must be > 0");
  return {std::max(config.min_resolution_m_l, detail::ceil_count(config.scale_s * config.width_w / depth_d)),
          std::max(config.min_resolution_m_l, detail::ceil_count(config.scale_s * config.height_h / depth_d))};
}

struct PatchPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
};

// Points lie in the local y-z plane (x = 0), centered on the origin,
// row-major with z outer and y inner.
struct TriggerPatch {
  std::vector<PatchPoint> points;
  int n_y = 0;
  int n_z = 0;
  double depth_d = 0.0;
};

namespace detail {

// Endpoint-inclusive sample `i` of `n` across a centered span; n = 1 sits at 0.
inline double span_coordinate(int i, int n, double extent) {
  if (n == 1) return 0.0;
  return extent * (static_cast<double>(i) / static_cast<double>(n - 1) - 0.5);
}

}  // namespace detail

inline TriggerPatch synthesize_patch(const TriggerConfig& config, double depth_d) {
  const auto [n_y, n_z] = grid_resolution(config, depth_d);
  const auto count = static_cast<std::size_t>(n_y) * static_cast<std::size_t>(n_z);
  const std::vector<double> intensities = assign_intensity(config.intensity_mode, config.material, count);

  TriggerPatch patch{{}, n_y, n_z, depth_d};
  patch.points.reserve(count);
  for (int iz = 0; iz < n_z; ++iz) {
    const double z = detail::span_coordinate(iz, n_z, config.height_h);
    for (int iy = 0; iy < n_y; ++iy) {
      patch.points.push_back(
          {0.0, detail::span_coordinate(iy, n_y, config.width_w), z, intensities[patch.points.size()]});
    }
  }
  return patch;
}

inline nlohmann::ordered_json to_json(const TriggerConfig& c) {
  return {{"w", c.width_w},
          {"h", c.height_h},
          {"s", c.scale_s},
          {"m_l", c.min_resolution_m_l},
          {"material", to_json(c.material)},
          {"intensity_mode", to_json(c.intensity_mode)}};
}

// Reads {w, h, s, m_l, material, intensity_mode}; missing keys keep their
// defaults. `material` (alias `material_name_or_spec`) is either a name from
// `db` or an inline {name, n, k, rho, sigma} object.
inline TriggerConfig trigger_config_from_json(const nlohmann::json& j,
                                              std::span<const MaterialSpec> db) {
  if (!j.is_object()) throw InvalidArgument("trigger config must be a JSON object");
  TriggerConfig c;
  try {
    c.width_w = j.value("w", c.width_w);
    c.height_h = j.value("h", c.height_h);
    c.scale_s = j.value("s", c.scale_s);
    c.min_resolution_m_l = j.value("m_l", c.min_resolution_m_l);
    const char* material_key = j.contains("material") ? "material" : "material_name_or_spec";
    if (j.contains(material_key)) {
      const auto& m = j.at(material_key);
      if (m.is_string()) {
        c.material = find_material(db, m.get<std::string>());
      } else {
        c.material.name = m.at("name").get<std::string>();
        c.material.index = {m.at("n").get<double>(), m.value("k", 0.0)};
        c.material.diffuse_albedo_rho = m.at("rho").get<double>();
        c.material.roughness_sigma = m.at("sigma").get<double>();
      }
    }
    if (j.contains("intensity_mode")) c.intensity_mode = intensity_mode_from_json(j.at("intensity_mode"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("trigger config: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace trigsim
