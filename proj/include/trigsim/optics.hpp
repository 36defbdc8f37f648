// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form surface reflectance: Fresnel specular reflectance for complex
// refractive indices, the Oren-Nayar rough-diffuse BRDF, and the wet-surface
// and beam-divergence perturbation formulas.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "trigsim/error.hpp"

namespace trigsim {

// Refractive index n + ik at a single wavelength. k = 0 is a pure dielectric.
struct ComplexIndex {
  double real_part = 1.0;
  double imag_part = 0.0;

  std::complex<double> value() const { return {real_part, imag_part}; }
  bool is_dielectric() const { return imag_part == 0.0; }

  friend bool operator==(const ComplexIndex&, const ComplexIndex&) = default;
};

inline constexpr ComplexIndex kAirIndex{1.0, 0.0};
inline constexpr ComplexIndex kWaterIndex{1.33, 0.0};

// A named surface: optical index at the sensor wavelength, diffuse albedo rho
// in [0, 1] and Oren-Nayar roughness sigma >= 0.
struct MaterialSpec {
  std::string name;
  ComplexIndex index;
  double diffuse_albedo_rho = 0.0;
  double roughness_sigma = 0.0;

  friend bool operator==(const MaterialSpec&, const MaterialSpec&) = default;
};

inline void validate_material(const MaterialSpec& m) {
  if (!(m.diffuse_albedo_rho >= 0.0 && m.diffuse_albedo_rho <= 1.0)) {
    throw InvalidArgument("material '" + m.name + "': diffuse albedo must lie in [0, 1]");
  }
  if (!(m.roughness_sigma >= 0.0) || !std::isfinite(m.roughness_sigma)) {
    throw InvalidArgument("material '" + m.name + "': roughness must be finite and >= 0");
  }
  if (!(m.index.real_part > 0.0) || !std::isfinite(m.index.real_part) ||
      !(m.index.imag_part >= 0.0) || !std::isfinite(m.index.imag_part)) {
    throw InvalidArgument("material '" + m.name + "': index needs n > 0 and k >= 0");
  }
}

// Incident/reflected polar angles and their azimuthal difference, radians.
struct IncidenceGeometry {
  double theta_i = 0.0;
  double theta_r = 0.0;
  double delta_phi = 0.0;
};

inline void validate_geometry(const IncidenceGeometry& g) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (!(g.theta_i >= 0.0 && g.theta_i < kHalfPi) || !(g.theta_r >= 0.0 && g.theta_r < kHalfPi)) {
    throw InvalidArgument("polar angles must lie in [0, pi/2)");
  }
  if (!(g.delta_phi >= 0.0 && g.delta_phi < kTwoPi)) {
    throw InvalidArgument("azimuthal difference must lie in [0, 2pi)");
  }
}

struct RoughnessCoefficients {
  double a_coef = 1.0;
  double b_coef = 0.0;
};

// Oren-Nayar A and B terms for surface roughness sigma.
inline RoughnessCoefficients roughness_coefficients(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw InvalidArgument("roughness sigma must be finite and >= 0");
  }
  const double s2 = sigma * sigma;
  return {1.0 - s2 / (2.0 * (s2 + 0.33)), 0.45 * s2 / (s2 + 0.09)};
}

struct FresnelComponents {
  double r_s = 0.0;
  double r_p = 0.0;

  double unpolarized() const { return 0.5 * (r_s + r_p); }
};

namespace detail {

inline double clamp_reflectance(double raw, const char* what) {
  constexpr double kSpill = 1e-9;
  if (!(raw >= -kSpill && raw <= 1.0 + kSpill)) {
    throw InternalError(std::string(what) + " left [0, 1] beyond rounding noise");
  }
  return std::clamp(raw, 0.0, 1.0);
}

}  // namespace detail

// s- and p-polarized reflectance at a smooth interface from `incident` into
// `material`. The transmitted cosine follows complex Snell's law; the square
// root branch is the one with Im >= 0 so the wave decays inside absorbers.
// At grazing incidence both components are exactly 1.
inline FresnelComponents fresnel_components(const ComplexIndex& material, double theta_i,
                                            const ComplexIndex& incident = kAirIndex) {
  if (!std::isfinite(theta_i)) throw InvalidArgument("incidence angle must be finite");
  if (theta_i < 0.0 || theta_i > std::numbers::pi / 2.0) {
    throw InvalidArgument("incidence angle must lie in [0, pi/2]");
  }
  if (!(material.real_part > 0.0) || !(incident.real_part > 0.0)) {
    throw InvalidArgument("refractive index real part must be > 0");
  }
  if (theta_i == std::numbers::pi / 2.0) return {1.0, 1.0};

  const std::complex<double> n1 = incident.value();
  const std::complex<double> n2 = material.value();
  const double cos_i = std::cos(theta_i);
  const std::complex<double> sin_t = n1 * std::sin(theta_i) / n2;
  std::complex<double> cos_t = std::sqrt(1.0 - sin_t * sin_t);
  if (cos_t.imag() < 0.0) cos_t = -cos_t;

  const std::complex<double> rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t);
  const std::complex<double> rp = (n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t);
  return {detail::clamp_reflectance(std::norm(rs), "R_s"),
          detail::clamp_reflectance(std::norm(rp), "R_p")};
}

// Unpolarized specular reflectance (R_s + R_p) / 2.
inline double fresnel_unpolarized(const ComplexIndex& material, double theta_i,
                                  const ComplexIndex& incident = kAirIndex) {
  return detail::clamp_reflectance(fresnel_components(material, theta_i, incident).unpolarized(),
                                   "unpolarized reflectance");
}

// Angle at which R_p vanishes for a real-index interface.
inline double brewster_angle(const ComplexIndex& material, const ComplexIndex& incident = kAirIndex) {
  if (!material.is_dielectric() || !incident.is_dielectric()) {
    throw InvalidArgument("Brewster angle is defined for real indices only");
  }
  return std::atan2(material.real_part, incident.real_part);
}

inline void validate_albedo(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("diffuse albedo must lie in [0, 1]");
}

// Oren-Nayar diffuse reflectance
//   (rho / pi) (A + B max(0, cos dphi) sin(alpha) tan(beta)),
// alpha = max(theta_i, theta_r), beta = min(theta_i, theta_r).
inline double oren_nayar(const MaterialSpec& material, const IncidenceGeometry& geom) {
  validate_albedo(material.diffuse_albedo_rho);
  validate_geometry(geom);
  const auto [a, b] = roughness_coefficients(material.roughness_sigma);
  const double alpha = std::max(geom.theta_i, geom.theta_r);
  const double beta = std::min(geom.theta_i, geom.theta_r);
  const double azimuthal = std::max(0.0, std::cos(geom.delta_phi));
  return material.diffuse_albedo_rho / std::numbers::pi *
         (a + b * azimuthal * std::sin(alpha) * std::tan(beta));
}

// Effective index of a partially water-covered surface, mixed component-wise.
inline ComplexIndex wet_effective_index(const ComplexIndex& dry, double coverage_f) {
  if (!(coverage_f >= 0.0 && coverage_f <= 1.0)) {
    throw InvalidArgument("water coverage fraction must lie in [0, 1]");
  }
  return {coverage_f * kWaterIndex.real_part + (1.0 - coverage_f) * dry.real_part,
          coverage_f * kWaterIndex.imag_part + (1.0 - coverage_f) * dry.imag_part};
}

// Diffraction-limited beam divergence lambda / D, radians.
inline double beam_divergence(double wavelength_m, double aperture_m) {
  if (!(wavelength_m > 0.0) || !(aperture_m > 0.0) || !std::isfinite(wavelength_m) ||
      !std::isfinite(aperture_m)) {
    throw InvalidArgument("wavelength and aperture must be finite and > 0");
  }
  return wavelength_m / aperture_m;
}

}  // namespace trigsim
