// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Candidate trigger materials at 905 nm and the specular/diffuse selection
// score used to rank them.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trigsim/error.hpp"
#include "trigsim/optics.hpp"

namespace trigsim {

inline constexpr double kDefaultLambdaW = 0.2;
inline constexpr int kDefaultGridPoints = 81;
inline constexpr double kMaxScoreAngle = 80.0 * std::numbers::pi / 180.0;

inline std::vector<MaterialSpec> builtin_database() {
  return {
      {"Aluminum", {1.43, 8.33}, 0.10, 0.05},
      {"Copper", {0.23, 6.09}, 0.08, 0.05},
      {"Paper", {1.50, 0.0}, 0.75, 0.80},
      {"TitaniumDioxide", {2.51, 0.0}, 0.95, 0.70},
  };
}

inline const MaterialSpec& find_material(std::span<const MaterialSpec> db, const std::string& name) {
  auto it = std::find_if(db.begin(), db.end(), [&](const MaterialSpec& m) { return m.name == name; });
  if (it == db.end()) throw InvalidArgument("unknown material '" + name + "'");
  return *it;
}

// `points` uniform incidence angles from 0 to 80 degrees inclusive.
inline std::vector<double> uniform_angle_grid(int points = kDefaultGridPoints) {
  if (points < 1) throw InvalidArgument("angle grid needs at least one point");
  if (points == 1) return {0.0};
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step_deg = 80.0 / (points - 1);
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = (i * step_deg) * std::numbers::pi / 180.0;
  }
  grid.back() = kMaxScoreAngle;
  return grid;
}

struct MaterialScore {
  std::string material_name;
  double avg_specular = 0.0;
  double avg_diffuse = 0.0;
  double combined_score = 0.0;
  int rank = 0;  // 0 until assigned by rank_materials
};

// Backscatter Oren-Nayar value for a co-located emitter and receiver
// (theta_r = theta_i, dphi = 0) with the azimuthal max(0, cos dphi) factor
// replaced by its uniform expectation 1/pi.
inline double monostatic_diffuse(const MaterialSpec& material, double theta) {
  validate_albedo(material.diffuse_albedo_rho);
  const auto [a, b] = roughness_coefficients(material.roughness_sigma);
  return material.diffuse_albedo_rho / std::numbers::pi *
         (a + b / std::numbers::pi * std::sin(theta) * std::tan(theta));
}

inline MaterialScore score_material(const MaterialSpec& material, double lambda_w,
                                    std::span<const double> angle_grid) {
  if (!(lambda_w >= 0.0 && lambda_w <= 1.0)) throw InvalidArgument("lambda_w must lie in [0, 1]");
  if (angle_grid.empty()) throw InvalidArgument("angle grid is empty");
  validate_material(material);
  double specular_sum = 0.0;
  double diffuse_sum = 0.0;
  for (double theta : angle_grid) {
    if (!(theta >= 0.0 && theta <= kMaxScoreAngle + 1e-12)) {
      throw InvalidArgument("scoring angles must lie in [0, 80] degrees");
    }
    specular_sum += fresnel_unpolarized(material.index, theta);
    diffuse_sum += monostatic_diffuse(material, theta);
  }
  const auto count = static_cast<double>(angle_grid.size());
  MaterialScore score;
  score.material_name = material.name;
  score.avg_specular = specular_sum / count;
  score.avg_diffuse = diffuse_sum / count;
  score.combined_score = lambda_w * score.avg_specular + (1.0 - lambda_w) * score.avg_diffuse;
  return score;
}

// Scores every material and returns them best first with ranks 1..N.
// Equal scores are ordered by name.
inline std::vector<MaterialScore> rank_materials(std::span<const MaterialSpec> specs, double lambda_w,
                                                 std::span<const double> angle_grid) {
  if (specs.empty()) throw InvalidArgument("no materials to rank");
  std::vector<MaterialScore> scores;
  scores.reserve(specs.size());
  for (const auto& spec : specs) scores.push_back(score_material(spec, lambda_w, angle_grid));
  std::sort(scores.begin(), scores.end(), [](const MaterialScore& a, const MaterialScore& b) {
    if (a.combined_score != b.combined_score) return a.combined_score > b.combined_score;
    return a.material_name < b.material_name;
  });
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].rank = static_cast<int>(i + 1);
  return scores;
}

// Material database file: JSON array of {name, n, k, rho, sigma}.
inline std::vector<MaterialSpec> parse_material_database(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("material database is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("material database must be a JSON array");
  if (doc.empty()) throw DataError("material database is empty");

  std::vector<MaterialSpec> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    MaterialSpec m;
    try {
      m.name = entry.at("name").get<std::string>();
      m.index.real_part = entry.at("n").get<double>();
      m.index.imag_part = entry.value("k", 0.0);
      m.diffuse_albedo_rho = entry.at("rho").get<double>();
      m.roughness_sigma = entry.at("sigma").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("material entry " + std::to_string(i) + ": " + e.what(), i);
    }
    try {
      validate_material(m);
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }
    if (!names.insert(m.name).second) throw DataError("duplicate material name '" + m.name + "'");
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<MaterialSpec> load_material_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open material database", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_material_database(buf.str());
}

inline nlohmann::ordered_json to_json(const MaterialSpec& m) {
  return {{"name", m.name},
          {"n", m.index.real_part},
          {"k", m.index.imag_part},
          {"rho", m.diffuse_albedo_rho},
          {"sigma", m.roughness_sigma}};
}

inline nlohmann::ordered_json to_json(const MaterialScore& s) {
  return {{"name", s.material_name},
          {"avg_specular", s.avg_specular},
          {"avg_diffuse", s.avg_diffuse},
          {"score", s.combined_score},
          {"rank", s.rank}};
}

}  // namespace trigsim
