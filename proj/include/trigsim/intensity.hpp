// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Angle-independent LiDAR intensity for a rough diffuse trigger surface.
//
// The Oren-Nayar term max(0, cos dphi) sin(alpha) tan(beta) is replaced by the
// product of two expectations: E[max(0, cos dphi)] = 1/pi for dphi uniform on
// [0, 2pi), and E[sin^2(t)/cos(t)] = 4/3 for t with density proportional to
// sin(t) cos(t) on [0, pi/2) (taking theta_i = theta_r = t). This header holds
// the closed form, quadrature and Monte-Carlo checks of both constants, and
// the per-point intensity modes used for ablations.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "trigsim/error.hpp"
#include "trigsim/optics.hpp"
#include "trigsim/rng.hpp"

namespace trigsim {

inline constexpr std::size_t kMinValidationSamples = 10'000;

// Periodic rectangle rule for (1/2pi) * integral of max(0, cos) over [0, 2pi)
// with nodes at 2pi k / N.
inline double azimuthal_expectation_quadrature(std::size_t node_count) {
  if (node_count < 2) throw InvalidArgument("quadrature needs at least 2 nodes");
  double sum = 0.0;
  for (std::size_t k = 0; k < node_count; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(node_count);
    sum += std::max(0.0, std::cos(phi));
  }
  return sum / static_cast<double>(node_count);
}

struct HemisphericIntegrals {
  double numerator = 0.0;    // integral of sin^3 over [0, pi/2]
  double denominator = 0.0;  // integral of sin cos over [0, pi/2]

  double ratio() const { return numerator / denominator; }
};

// Composite trapezoid rule on [0, pi/2] with `node_count` nodes.
inline HemisphericIntegrals hemispheric_integrals(std::size_t node_count) {
  if (node_count < 2) throw InvalidArgument("quadrature needs at least 2 nodes");
  const double h = (std::numbers::pi / 2.0) / static_cast<double>(node_count - 1);
  HemisphericIntegrals out;
  for (std::size_t k = 0; k < node_count; ++k) {
    const double t = (k + 1 == node_count) ? std::numbers::pi / 2.0 : h * static_cast<double>(k);
    const double w = (k == 0 || k + 1 == node_count) ? 0.5 * h : h;
    const double s = std::sin(t);
    out.numerator += w * s * s * s;
    out.denominator += w * s * std::cos(t);
  }
  return out;
}

inline double hemispheric_expectation_quadrature(std::size_t node_count) {
  return hemispheric_integrals(node_count).ratio();
}

// Closed-form angle-independent diffuse reflectance (rho/pi)(A + 4B / (3pi)).
inline double angle_independent_diffuse(const MaterialSpec& material) {
  validate_albedo(material.diffuse_albedo_rho);
  const auto [a, b] = roughness_coefficients(material.roughness_sigma);
  return material.diffuse_albedo_rho / std::numbers::pi * (a + 4.0 * b / (3.0 * std::numbers::pi));
}

// Welford accumulator; a constant stream reproduces its value exactly.
class RunningStats {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double sample_variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double std_error() const {
    return count_ > 0 ? std::sqrt(sample_variance() / static_cast<double>(count_)) : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// One draw of the marginalization's sampling distributions.
struct AngleSample {
  double delta_phi;   // uniform on [0, 2pi)
  double theta;       // density proportional to sin cos on [0, pi/2)
  double sin2_theta;  // = sin^2(theta), the uniform variate itself
  double cos_theta;
};

inline AngleSample draw_angle_sample(Rng& rng) {
  const double delta_phi = 2.0 * std::numbers::pi * rng.uniform();
  const double u = rng.uniform();
  const double cos_theta = std::sqrt(1.0 - u);
  return {delta_phi, std::atan2(std::sqrt(u), cos_theta), u, cos_theta};
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t sample_count = 0;
};

inline McEstimate monte_carlo_azimuthal(std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 2) throw InvalidArgument("Monte-Carlo needs at least 2 samples");
  Rng rng(seed);
  RunningStats stats;
  for (std::size_t i = 0; i < sample_count; ++i) {
    stats.add(std::max(0.0, std::cos(2.0 * std::numbers::pi * rng.uniform())));
  }
  return {stats.mean(), stats.std_error(), sample_count};
}

inline McEstimate monte_carlo_hemispheric(std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 2) throw InvalidArgument("Monte-Carlo needs at least 2 samples");
  Rng rng(seed);
  RunningStats stats;
  for (std::size_t i = 0; i < sample_count; ++i) {
    const AngleSample s = draw_angle_sample(rng);
    stats.add(s.sin2_theta / s.cos_theta);
  }
  return {stats.mean(), stats.std_error(), sample_count};
}

struct ExpectationReport {
  std::string material_name;
  double azimuthal_expectation = 0.0;
  double azimuthal_std_error = 0.0;
  double hemispheric_expectation = 0.0;
  double hemispheric_std_error = 0.0;
  double closed_form_diffuse = 0.0;
  double sampled_mean_diffuse = 0.0;
  std::size_t sample_count = 0;
  double std_error = 0.0;

  double deviation() const { return std::abs(sampled_mean_diffuse - closed_form_diffuse); }
  bool within(double standard_errors) const {
    return deviation() <= standard_errors * std_error;
  }
};

// Monte-Carlo mean of the full Oren-Nayar model under the marginalization's
// sampling distributions (theta_i = theta_r), next to the closed form.
// Deterministic in `seed`.
inline ExpectationReport validate_approximation(const MaterialSpec& material, std::size_t sample_count,
                                                std::uint64_t seed) {
  if (sample_count < kMinValidationSamples) {
    throw InvalidArgument("validation needs at least " + std::to_string(kMinValidationSamples) +
                          " samples");
  }
  validate_material(material);
  Rng rng(seed);
  RunningStats diffuse;
  RunningStats azimuthal;
  RunningStats hemispheric;
  for (std::size_t i = 0; i < sample_count; ++i) {
    const AngleSample s = draw_angle_sample(rng);
    diffuse.add(oren_nayar(material, {s.theta, s.theta, s.delta_phi}));
    azimuthal.add(std::max(0.0, std::cos(s.delta_phi)));
    hemispheric.add(s.sin2_theta / s.cos_theta);
  }
  ExpectationReport report;
  report.material_name = material.name;
  report.azimuthal_expectation = azimuthal.mean();
  report.azimuthal_std_error = azimuthal.std_error();
  report.hemispheric_expectation = hemispheric.mean();
  report.hemispheric_std_error = hemispheric.std_error();
  report.closed_form_diffuse = angle_independent_diffuse(material);
  report.sampled_mean_diffuse = diffuse.mean();
  report.sample_count = sample_count;
  report.std_error = diffuse.std_error();
  return report;
}

inline nlohmann::ordered_json to_json(const ExpectationReport& r) {
  return {{"material", r.material_name},
          {"azimuthal_expectation", r.azimuthal_expectation},
          {"azimuthal_std_error", r.azimuthal_std_error},
          {"hemispheric_expectation", r.hemispheric_expectation},
          {"hemispheric_std_error", r.hemispheric_std_error},
          {"closed_form_diffuse", r.closed_form_diffuse},
          {"sampled_mean_diffuse", r.sampled_mean_diffuse},
          {"sample_count", r.sample_count},
          {"std_error", r.std_error}};
}

enum class IntensityKind { brdf, fixed, random, none };

struct IntensityMode {
  IntensityKind kind = IntensityKind::brdf;
  double fixed_value = 0.5;
  std::uint64_t seed = 0;
};

inline std::string to_string(IntensityKind kind) {
  switch (kind) {
    case IntensityKind::brdf: return "brdf";
    case IntensityKind::fixed: return "fixed";
    case IntensityKind::random: return "random";
    case IntensityKind::none: return "none";
  }
  return "unknown";
}

inline IntensityKind parse_intensity_kind(const std::string& s) {
  if (s == "brdf") return IntensityKind::brdf;
  if (s == "fixed") return IntensityKind::fixed;
  if (s == "random") return IntensityKind::random;
  if (s == "none") return IntensityKind::none;
  throw InvalidArgument("unknown intensity mode '" + s + "' (expected brdf, fixed, random or none)");
}

// Per-point intensities for a trigger of `point_count` points.
inline std::vector<double> assign_intensity(const IntensityMode& mode, const MaterialSpec& material,
                                            std::size_t point_count) {
  if (point_count < 1) throw InvalidArgument("point count must be >= 1");
  switch (mode.kind) {
    case IntensityKind::brdf:
      return std::vector<double>(point_count, angle_independent_diffuse(material));
    case IntensityKind::fixed:
      if (!(mode.fixed_value >= 0.0 && mode.fixed_value <= 1.0)) {
        throw InvalidArgument("fixed intensity must lie in [0, 1]");
      }
      return std::vector<double>(point_count, mode.fixed_value);
    case IntensityKind::random: {
      Rng rng(mode.seed);
      std::vector<double> out(point_count);
      for (auto& v : out) v = rng.uniform();
      return out;
    }
    case IntensityKind::none:
      return std::vector<double>(point_count, 0.0);
  }
  throw InvalidArgument("invalid intensity mode");
}

inline nlohmann::ordered_json to_json(const IntensityMode& m) {
  nlohmann::ordered_json j{{"kind", to_string(m.kind)}};
  if (m.kind == IntensityKind::fixed) j["fixed_value"] = m.fixed_value;
  if (m.kind == IntensityKind::random) j["seed"] = m.seed;
  return j;
}

// Accepts "brdf" or {"kind": ..., "fixed_value": ..., "seed": ...}.
inline IntensityMode intensity_mode_from_json(const nlohmann::json& j) {
  IntensityMode m;
  if (j.is_string()) {
    m.kind = parse_intensity_kind(j.get<std::string>());
  } else if (j.is_object()) {
    m.kind = parse_intensity_kind(j.value("kind", std::string("brdf")));
    m.fixed_value = j.value("fixed_value", m.fixed_value);
    m.seed = j.value("seed", m.seed);
  } else {
    throw InvalidArgument("intensity_mode must be a string or an object");
  }
  if (m.kind == IntensityKind::fixed && !(m.fixed_value >= 0.0 && m.fixed_value <= 1.0)) {
    throw InvalidArgument("fixed intensity must lie in [0, 1]");
  }
  return m;
}

}  // namespace trigsim
