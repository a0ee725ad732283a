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

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/environment.hpp>
#include <gpcinfer/soil.hpp>

namespace gpcinfer {

/// Root-uptake parameters under inference: beta shapes the root-density
/// profile, L_m (m) is the mature rooting depth.
struct SinkParams {
  double beta;
  double l_m;
};

/// Raised when the active root zone has non-positive extent.
class DegenerateRootZoneError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

/// Volumetric root water uptake (1/s) at vertical coordinate z <= 0 and time
/// t. With d = |z| the depth, L_r(t) = L_m Z_r(t) the current rooting depth:
///   S = (1 + beta) alpha(h) T_p(t) / L_r (1 - d/L_r)^beta   for d <= L_r,
/// zero below the root zone. The density integrates to alpha T_p over the
/// root zone when alpha is constant.
inline double sink(double h, double z, double t, const SinkParams& theta,
                   const EnvironmentModel& env) {
  const double depth = std::abs(z);
  const double l_r = theta.l_m * env.root_fraction(t);
  if (!(l_r > 0.0)) throw DegenerateRootZoneError("sink: root zone depth " + num(l_r) + " not positive");
  if (depth > l_r) return 0.0;
  const double alpha = feddes_alpha(h, env.stress(t));
  if (alpha == 0.0) return 0.0;
  const double rel = 1.0 - depth / l_r;
  return (1.0 + theta.beta) * alpha * env.transpiration(t) / l_r * std::pow(rel, theta.beta);
}

/// Gradient of the sink with respect to (beta, L_m) at fixed head. Points
/// below the root zone contribute zero. Used by the residual-based estimator.
inline Eigen::Vector2d sink_theta_gradient(double h, double z, double t, const SinkParams& theta,
                                           const EnvironmentModel& env) {
  const double depth = std::abs(z);
  const double l_r = theta.l_m * env.root_fraction(t);
  if (!(l_r > 0.0)) throw DegenerateRootZoneError("sink: root zone depth " + num(l_r) + " not positive");
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  if (depth >= l_r) return g;
  const double s = sink(h, z, t, theta, env);
  if (s == 0.0) return g;
  const double rel = 1.0 - depth / l_r;
  // d/d beta: S / (1 + beta) + S log(1 - d/L_r)
  g[0] = s / (1.0 + theta.beta) + s * std::log(rel);
  // d/d L_r = (S / L_r) (beta (d/L_r) / (1 - d/L_r) - 1); d L_r/d L_m = Z_r.
  const double ds_dlr = s / l_r * (theta.beta * (depth / l_r) / rel - 1.0);
  g[1] = ds_dlr * env.root_fraction(t);
  return g;
}

/// Field value and the partial derivatives entering the residual.
struct StateDerivatives {
  double f;       // water content
  double df_dz;   // 1/m
  double df_dt;   // 1/s
  double d2f_dz2; // 1/m^2
};

/// Strong-form residual of the water-content Richards equation with root
/// uptake, written entirely in terms of f and its derivatives:
///   G = df/dt - [ dk/df (df/dz) dh/df (df/dz)
///                 + k ( d/dz(dh/df) df/dz + dh/df d2f/dz2 )
///                 + dk/df df/dz - S(h(f), z, t) ]
/// where d/dz(dh/df) = d(dh/df)/dC * (1/(c_s - c_r)) * df/dz. A zero residual
/// means the local state is consistent with the flow equation.
inline double richards_residual(double z, double t, const StateDerivatives& w,
                                const SinkParams& theta, const SoilLayerParams& soil,
                                const EnvironmentModel& env) {
  soil.validate();
  const double c = effective_saturation(w.f, soil);
  if (!(c > 0.0 && c < 1.0))
    throw InvalidArgumentError("residual: effective saturation " + num(c) + " on the boundary of (0, 1)");
  const double width = soil.c_s - soil.c_r;
  const double k = hydraulic_conductivity(c, soil);
  const double dk_df = conductivity_dC(c, soil) / width;
  const double dh_df = head_slope_df(w.f, soil);
  const double dhdf_dz = head_slope_dC(c, soil) / width * w.df_dz;
  const double h = head_from_water_content(w.f, soil);
  const double s = sink(h, z, t, theta, env);
  const double transport = dk_df * w.df_dz * dh_df * w.df_dz +
                           k * (dhdf_dz * w.df_dz + dh_df * w.d2f_dz2) +
                           dk_df * w.df_dz;
  return w.df_dt - (transport - s);
}

}  // namespace gpcinfer
