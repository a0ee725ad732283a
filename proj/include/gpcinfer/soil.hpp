// Copyright 2026 The gpcinfer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>

namespace gpcinfer {

/// Heads more negative than this are reported as the cap; the retention curve
/// is numerically flat there and the exact value no longer matters.
inline constexpr double kHeadCap = -1e6;  // meters

/// Water-retention and conductivity parameters of one soil material:
///   f(h) = c_r + (c_s - c_r) [1 + |gamma h|^(1/(1-nu))]^(-nu)   for h < 0
///   k(C) = k_sat sqrt(C) [1 - (1 - C^(1/nu))^nu]^2,  C = (f - c_r)/(c_s - c_r)
/// with h pressure head (m), f volumetric water content, C effective
/// saturation in [0, 1] and k hydraulic conductivity (m/s).
struct SoilLayerParams {
  double c_r;    // residual water content
  double c_s;    // saturated water content
  double gamma;  // inverse air-entry length scale (1/m)
  double nu;     // retention shape, in (0, 1)
  double k_sat;  // saturated conductivity (m/s)

  void validate() const {
    if (!(c_r >= 0.0) || !(c_s > c_r) || !(c_s <= 1.0))
      throw InvalidArgumentError("soil: need 0 <= c_r < c_s <= 1");
    if (!(gamma > 0.0)) throw InvalidArgumentError("soil: gamma must be > 0");
    if (!(nu > 0.0 && nu < 1.0)) throw InvalidArgumentError("soil: nu must lie in (0, 1)");
    if (!(k_sat > 0.0)) throw InvalidArgumentError("soil: k_sat must be > 0");
  }
};

/// Effective saturation C = (f - c_r) / (c_s - c_r). Contents outside
/// [c_r, c_s] are a caller error and are reported with the offending value.
inline double effective_saturation(double f, const SoilLayerParams& p) {
  if (!(f >= p.c_r && f <= p.c_s))
    throw InvalidArgumentError("water content " + num(f) + " outside [" + num(p.c_r) + ", " + num(p.c_s) + "]");
  return (f - p.c_r) / (p.c_s - p.c_r);
}

/// Retention curve f(h); saturated (h >= 0) returns c_s.
inline double water_content_from_head(double h, const SoilLayerParams& p) {
  if (h >= 0.0) return p.c_s;
  const double b = std::pow(p.gamma * (-h), 1.0 / (1.0 - p.nu));
  return p.c_r + (p.c_s - p.c_r) * std::pow(1.0 + b, -p.nu);
}

/// Inverse retention curve h(f) = -(1/gamma) [C^(-1/nu) - 1]^(1-nu), capped
/// at kHeadCap near the residual content where the curve diverges.
inline double head_from_water_content(double f, const SoilLayerParams& p) {
  const double c = effective_saturation(f, p);
  if (c >= 1.0) return 0.0;
  if (c <= 0.0) return kHeadCap;
  const double h = -std::pow(std::pow(c, -1.0 / p.nu) - 1.0, 1.0 - p.nu) / p.gamma;
  return std::max(h, kHeadCap);
}

/// Unsaturated conductivity as a function of effective saturation.
inline double hydraulic_conductivity(double c, const SoilLayerParams& p) {
  if (!(c >= 0.0 && c <= 1.0))
    throw InvalidArgumentError("effective saturation " + num(c) + " outside [0, 1]");
  if (c <= 0.0) return 0.0;
  const double w = 1.0 - std::pow(1.0 - std::pow(c, 1.0 / p.nu), p.nu);
  return p.k_sat * std::sqrt(c) * w * w;
}

/// Specific moisture capacity c(h) = df/dh; zero when saturated.
inline double specific_capacity(double h, const SoilLayerParams& p) {
  if (h >= 0.0) return 0.0;
  const double gh = p.gamma * (-h);
  const double b = std::pow(gh, 1.0 / (1.0 - p.nu));
  return (p.c_s - p.c_r) * p.nu * p.gamma / (1.0 - p.nu) * std::pow(gh, p.nu / (1.0 - p.nu)) *
         std::pow(1.0 + b, -p.nu - 1.0);
}

/// dk/dC, the conductivity sensitivity to effective saturation. Together with
/// dC/df = 1/(c_s - c_r) this gives dk/df for the residual's chain rule.
inline double conductivity_dC(double c, const SoilLayerParams& p) {
  if (!(c > 0.0 && c <= 1.0))
    throw InvalidArgumentError("effective saturation " + num(c) + " outside (0, 1]");
  const double c1nu = std::pow(c, 1.0 / p.nu);
  const double w = 1.0 - std::pow(1.0 - c1nu, p.nu);
  const double dw_dc = (c1nu >= 1.0) ? 0.0 : std::pow(1.0 - c1nu, p.nu - 1.0) * c1nu / c;
  return p.k_sat * (w * w / (2.0 * std::sqrt(c)) + 2.0 * std::sqrt(c) * w * dw_dc);
}

/// dh/df, the slope of the inverse retention curve:
///   dh/df = (1-nu) / (gamma nu (c_s - c_r)) C^(-(1+nu)/nu) (C^(-1/nu) - 1)^(-nu).
inline double head_slope_df(double f, const SoilLayerParams& p) {
  const double c = effective_saturation(f, p);
  if (!(c > 0.0 && c < 1.0))
    throw InvalidArgumentError("head slope undefined at effective saturation " + num(c));
  const double a = (1.0 - p.nu) / (p.gamma * p.nu * (p.c_s - p.c_r));
  return a * std::pow(c, -(1.0 + p.nu) / p.nu) * std::pow(std::pow(c, -1.0 / p.nu) - 1.0, -p.nu);
}

/// d(dh/df)/dC, used to expand d/dz (dh/df) = head_slope_dC * dC/df * df/dz:
///   A [ -((1+nu)/nu) C^(-(1+2nu)/nu) (C^(-1/nu)-1)^(-nu)
///       + C^(-2(nu+1)/nu) (C^(-1/nu)-1)^(-nu-1) ],
///   A = (1-nu) / (gamma nu (c_s - c_r)).
inline double head_slope_dC(double c, const SoilLayerParams& p) {
  if (!(c > 0.0 && c < 1.0))
    throw InvalidArgumentError("head-slope derivative undefined at effective saturation " + num(c));
  const double a = (1.0 - p.nu) / (p.gamma * p.nu * (p.c_s - p.c_r));
  const double g = std::pow(c, -1.0 / p.nu) - 1.0;
  return a * (-((1.0 + p.nu) / p.nu) * std::pow(c, -(1.0 + 2.0 * p.nu) / p.nu) * std::pow(g, -p.nu) +
              std::pow(c, -2.0 * (p.nu + 1.0) / p.nu) * std::pow(g, -p.nu - 1.0));
}

/// Horizontally layered soil column. Layers partition depths (0, d_max] with
/// intervals (d_lo, d_hi]; a lookup exactly on a boundary returns the
/// shallower layer.
class SoilProfile {
 public:
  SoilProfile(std::vector<double> lower_depths, std::vector<SoilLayerParams> layers)
      : hi_(std::move(lower_depths)), layers_(std::move(layers)) {
    if (hi_.empty() || hi_.size() != layers_.size())
      throw InvalidArgumentError("soil profile: need one lower depth per layer");
    double prev = 0.0;
    for (std::size_t i = 0; i < hi_.size(); ++i) {
      if (!(hi_[i] > prev)) throw InvalidArgumentError("soil profile: depths must increase from 0");
      prev = hi_[i];
      layers_[i].validate();
    }
  }

  static SoilProfile uniform(const SoilLayerParams& p, double max_depth) {
    return SoilProfile({max_depth}, {p});
  }

  double max_depth() const { return hi_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  const SoilLayerParams& layer(std::size_t i) const { return layers_.at(i); }
  double layer_bottom(std::size_t i) const { return hi_.at(i); }

  /// Material at the given depth (positive meters below the surface).
  const SoilLayerParams& at_depth(double depth) const {
    if (!(depth >= 0.0 && depth <= hi_.back()))
      throw InvalidArgumentError("soil profile: depth " + num(depth) + " outside (0, " + num(hi_.back()) + "]");
    for (std::size_t i = 0; i < hi_.size(); ++i)
      if (depth <= hi_[i]) return layers_[i];
    return layers_.back();
  }

  /// Material at a vertical coordinate z <= 0 (depth = |z|).
  const SoilLayerParams& at_z(double z) const { return at_depth(-z); }

 private:
  std::vector<double> hi_;
  std::vector<SoilLayerParams> layers_;
};

/// Reads a profile table with columns z_lo,z_hi,c_r,c_s,gamma,nu,k_sat where
/// z_lo/z_hi are positive depths (m) and rows are ordered from the surface.
inline SoilProfile read_soil_profile_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int jlo = t.column("z_lo"), jhi = t.column("z_hi");
  const int jcr = t.column("c_r"), jcs = t.column("c_s");
  const int jg = t.column("gamma"), jn = t.column("nu"), jk = t.column("k_sat");
  std::vector<double> his;
  std::vector<SoilLayerParams> layers;
  double prev_hi = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double lo = t.value(i, jlo), hi = t.value(i, jhi);
    if (std::abs(lo - prev_hi) > 1e-12)
      throw ConfigError("soil profile: layer " + std::to_string(i) + " does not start at the previous bottom");
    prev_hi = hi;
    his.push_back(hi);
    layers.push_back({t.value(i, jcr), t.value(i, jcs), t.value(i, jg), t.value(i, jn), t.value(i, jk)});
  }
  return SoilProfile(std::move(his), std::move(layers));
}

inline void write_soil_profile_csv(const std::filesystem::path& path, const SoilProfile& profile) {
  std::vector<std::vector<std::string>> rows;
  double lo = 0.0;
  for (std::size_t i = 0; i < profile.layer_count(); ++i) {
    const auto& p = profile.layer(i);
    const double hi = profile.layer_bottom(i);
    rows.push_back({num(lo), num(hi), num(p.c_r), num(p.c_s), num(p.gamma), num(p.nu), num(p.k_sat)});
    lo = hi;
  }
  write_csv(path, {"z_lo", "z_hi", "c_r", "c_s", "gamma", "nu", "k_sat"}, rows);
}

}  // namespace gpcinfer
