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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>

namespace gpcinfer {

inline constexpr double kSecondsPerDay = 86400.0;

/// Water-stress thresholds of the root-uptake response, as pressure heads in
/// meters with A1 > A2 > A3 > A4 (all negative). Uptake is zero above A1
/// (near saturation, anaerobic) and below A4 (wilting), optimal in [A3, A2),
/// and ramps linearly on the flanks.
struct FeddesParams {
  double a1;
  double a2;
  double a3;
  double a4;

  void validate() const {
    if (!(a1 > a2 && a2 > a3 && a3 > a4))
      throw InvalidArgumentError("stress response: need A1 > A2 > A3 > A4");
  }
};

/// Dimensionless uptake reduction factor in [0, 1].
inline double feddes_alpha(double h, const FeddesParams& p) {
  p.validate();
  if (h >= p.a1 || h < p.a4) return 0.0;
  if (h >= p.a2) return (p.a1 - h) / (p.a1 - p.a2);
  if (h >= p.a3) return 1.0;
  return (h - p.a4) / (p.a3 - p.a4);
}

/// Logistic root-depth development: the active root zone grows from a small
/// initial fraction to the full mature depth over `maturity_days`, centered
/// halfway through the window. The returned fraction multiplies the mature
/// rooting depth L_m.
struct RootGrowth {
  double start_day = 0.0;
  double maturity_days = 60.0;
  double steepness = 10.0;    // logistic slope over the maturity window
  double min_fraction = 0.05;

  double fraction(double t_seconds) const {
    if (!(maturity_days > 0.0)) throw InvalidArgumentError("root growth: maturity must be > 0");
    const double d = t_seconds / kSecondsPerDay;
    const double mid = start_day + 0.5 * maturity_days;
    const double v = 1.0 / (1.0 + std::exp(-steepness / maturity_days * (d - mid)));
    return std::clamp(v, min_fraction, 1.0);
  }
};

/// Time-dependent forcing shared by the solver and the residual: potential
/// transpiration, surface water fluxes, stress thresholds and root growth.
/// All rates are in m/s, heads in m, time in seconds.
struct EnvironmentModel {
  std::function<double(double)> transpiration;    // T_p(t) >= 0
  std::function<double(double)> rainfall;         // R(t) >= 0, downward
  std::function<double(double)> evaporation;      // E_a(t) >= 0, upward
  std::function<double(double)> root_fraction;    // Z_r(t) in (0, 1]
  std::function<FeddesParams(double)> stress;     // A(t)

  /// Net downward flux across the soil surface.
  double surface_flux(double t) const { return rainfall(t) - evaporation(t); }

  static EnvironmentModel constant(double t_p, double rain, double evap, FeddesParams feddes,
                                   RootGrowth growth = {}) {
    feddes.validate();
    EnvironmentModel env;
    env.transpiration = [t_p](double) { return t_p; };
    env.rainfall = [rain](double) { return rain; };
    env.evaporation = [evap](double) { return evap; };
    env.root_fraction = [growth](double t) { return growth.fraction(t); };
    env.stress = [feddes](double) { return feddes; };
    return env;
  }
};

/// Daily forcing series: row d applies on day d, i.e. t in [d, d+1) days.
/// Columns: day,T_p,R,E_a,A1,A2,A3,A4 (rates m/s, heads m).
struct EnvironmentSeries {
  std::vector<double> t_p, rain, evap;
  std::vector<FeddesParams> stress;

  std::size_t day_index(double t_seconds) const {
    if (t_p.empty()) throw InvalidArgumentError("environment series: empty");
    const auto d = static_cast<std::int64_t>(std::floor(t_seconds / kSecondsPerDay));
    return static_cast<std::size_t>(std::clamp<std::int64_t>(d, 0, static_cast<std::int64_t>(t_p.size()) - 1));
  }
};

inline EnvironmentSeries read_environment_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int jd = t.column("day"), jt = t.column("T_p"), jr = t.column("R"), je = t.column("E_a");
  const int j1 = t.column("A1"), j2 = t.column("A2"), j3 = t.column("A3"), j4 = t.column("A4");
  EnvironmentSeries s;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (static_cast<std::size_t>(t.value(i, jd)) != i)
      throw ConfigError("environment series: days must run 0,1,2,... without gaps");
    s.t_p.push_back(t.value(i, jt));
    s.rain.push_back(t.value(i, jr));
    s.evap.push_back(t.value(i, je));
    FeddesParams f{t.value(i, j1), t.value(i, j2), t.value(i, j3), t.value(i, j4)};
    f.validate();
    s.stress.push_back(f);
  }
  return s;
}

inline EnvironmentModel environment_from_series(EnvironmentSeries series, RootGrowth growth = {}) {
  EnvironmentModel env;
  const auto s = std::make_shared<EnvironmentSeries>(std::move(series));
  env.transpiration = [s](double t) { return s->t_p[s->day_index(t)]; };
  env.rainfall = [s](double t) { return s->rain[s->day_index(t)]; };
  env.evaporation = [s](double t) { return s->evap[s->day_index(t)]; };
  env.root_fraction = [growth](double t) { return growth.fraction(t); };
  env.stress = [s](double t) { return s->stress[s->day_index(t)]; };
  return env;
}

}  // namespace gpcinfer
