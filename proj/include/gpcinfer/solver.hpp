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
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/dataset.hpp>
#include <gpcinfer/environment.hpp>
#include <gpcinfer/richards.hpp>
#include <gpcinfer/rng.hpp>
#include <gpcinfer/soil.hpp>
#include <gpcinfer/stats.hpp>
#include <gpcinfer/tridiag.hpp>

namespace gpcinfer {

/// Uniform vertical grid of cell-centered nodes, z ascending from the bottom
/// node to the top node, both at or below the surface (z <= 0).
struct Grid {
  double z_bottom;
  double z_top;
  int nodes;

  void validate() const {
    if (nodes < 3) throw InvalidArgumentError("grid: need at least 3 nodes");
    if (!(z_bottom < z_top) || !(z_top <= 0.0))
      throw InvalidArgumentError("grid: need z_bottom < z_top <= 0");
  }

  double dz() const { return (z_top - z_bottom) / static_cast<double>(nodes - 1); }

  double z(int i) const { return z_bottom + dz() * static_cast<double>(i); }

  Eigen::VectorXd coordinates() const {
    Eigen::VectorXd z(nodes);
    for (int i = 0; i < nodes; ++i) z[i] = this->z(i);
    return z;
  }
};

/// How face conductivities are formed from the two adjacent nodes.
enum class InterblockMean { arithmetic, geometric, upstream };

struct BoundaryConditions {
  /// Net downward flux across the surface (m/s), typically rain - evaporation.
  std::function<double(double)> upper_flux;

  enum class Lower { prescribed_flux, unit_gradient } lower_mode = Lower::unit_gradient;
  /// Downward flux at the column bottom (m/s) when prescribed. Under
  /// unit-gradient drainage the flux equals the conductivity at the bottom node.
  std::function<double(double)> lower_flux;

  /// Per-node initial state, either pressure heads or water contents.
  Eigen::VectorXd initial;
  bool initial_is_head = true;

  void validate(const Grid& grid) const {
    if (!upper_flux) throw InvalidArgumentError("boundary: upper flux is required");
    if (lower_mode == Lower::prescribed_flux && !lower_flux)
      throw InvalidArgumentError("boundary: prescribed lower flux requires a function");
    if (initial.size() != grid.nodes) throw InvalidArgumentError("boundary: initial state size != node count");
  }
};

struct SolverOptions {
  double dt = 400.0;            // base time step (s)
  double t_end = 90.0 * kSecondsPerDay;
  double picard_tol = 1e-6;     // max-norm of the head increment (m)
  int max_picard = 50;
  int max_halvings = 6;         // smallest attempted step is dt / 2^6
  InterblockMean interblock = InterblockMean::arithmetic;
  double store_every = kSecondsPerDay;  // spacing of retained columns (s)

  void validate() const {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw InvalidArgumentError("solver: dt and t_end must be > 0");
    if (!(picard_tol > 0.0) || max_picard < 1) throw InvalidArgumentError("solver: bad iteration controls");
    if (max_halvings < 0) throw InvalidArgumentError("solver: max_halvings must be >= 0");
    if (!(store_every > 0.0)) throw InvalidArgumentError("solver: store_every must be > 0");
  }
};

/// Diagnostics of one accepted time step.
struct StepStats {
  double t_start = 0.0;
  double dt = 0.0;
  int picard_iterations = 0;
  int halvings = 0;             // halvings needed before this step converged
  double g_top = 0.0;           // downward flux across the surface (m/s)
  double g_bottom = 0.0;        // downward flux across the column bottom (m/s)
  double sink_integral = 0.0;   // integral of S dz over the column (m/s)
  double mass_error = 0.0;      // storage change minus net flux, in meters
  double mass_error_rel = 0.0;
};

/// Stored solution: one column per retained time.
struct SolutionField {
  Grid grid;
  std::vector<double> times;
  Eigen::MatrixXd f;  // nodes x times, water content
  Eigen::MatrixXd h;  // nodes x times, pressure head (m)
  std::vector<StepStats> steps;
  long halving_events = 0;
  long clamp_events = 0;

  double storage(Eigen::Index col) const { return f.col(col).sum() * grid.dz(); }

  /// Bilinear interpolation of a stored quantity at (z, t).
  double interpolate(const Eigen::MatrixXd& q, double z, double t) const {
    if (times.empty()) throw InvalidArgumentError("field: empty");
    const double eps_t = 1e-9 * std::max(1.0, std::abs(times.back()));
    if (z < grid.z_bottom - 1e-12 || z > grid.z_top + 1e-12 || t < times.front() - eps_t ||
        t > times.back() + eps_t)
      throw InvalidArgumentError("field: query (" + num(z) + ", " + num(t) + ") outside the stored domain");
    // time bracket
    std::size_t j1 = 0;
    while (j1 + 1 < times.size() && times[j1 + 1] < t) ++j1;
    const std::size_t j2 = std::min(j1 + 1, times.size() - 1);
    const double tspan = times[j2] - times[j1];
    const double wt = (tspan > 0.0) ? std::clamp((t - times[j1]) / tspan, 0.0, 1.0) : 0.0;
    // depth bracket
    const double pos = (z - grid.z_bottom) / grid.dz();
    const auto i1 = static_cast<Eigen::Index>(std::clamp(std::floor(pos), 0.0, static_cast<double>(grid.nodes - 2)));
    const Eigen::Index i2 = i1 + 1;
    const double wz = std::clamp(pos - static_cast<double>(i1), 0.0, 1.0);
    const double lo = q(i1, static_cast<Eigen::Index>(j1)) * (1.0 - wt) + q(i1, static_cast<Eigen::Index>(j2)) * wt;
    const double hi = q(i2, static_cast<Eigen::Index>(j1)) * (1.0 - wt) + q(i2, static_cast<Eigen::Index>(j2)) * wt;
    return lo * (1.0 - wz) + hi * wz;
  }

  double content_at(double z, double t) const { return interpolate(f, z, t); }
  double head_at(double z, double t) const { return interpolate(h, z, t); }
};

/// Carries the partial solution up to the last completed step.
class SolverDivergedError : public NumericalError {
 public:
  SolverDivergedError(const std::string& msg, SolutionField partial)
      : NumericalError(msg), partial_field(std::move(partial)) {}
  SolutionField partial_field;
};

namespace detail {

inline double face_conductivity(double k_lower, double k_upper, double h_lower, double h_upper,
                                double dz, InterblockMean mean) {
  switch (mean) {
    case InterblockMean::arithmetic: return 0.5 * (k_lower + k_upper);
    case InterblockMean::geometric: return std::sqrt(k_lower * k_upper);
    case InterblockMean::upstream: {
      // Downward-positive face flux k (dh/dz + 1): positive gradient sends
      // water from the upper node down, so the upper node is upstream.
      const double grad = (h_upper - h_lower) / dz + 1.0;
      return grad >= 0.0 ? k_upper : k_lower;
    }
  }
  throw InvalidArgumentError("face conductivity: unknown mean");
}

}  // namespace detail

/// One linearized update of the modified Picard iteration at time level
/// t_new. All nonlinear coefficients (conductivity, capacity, sink, boundary
/// fluxes) are evaluated at the incoming iterate `h_iter`; the tridiagonal
/// system is solved for the head increment.
struct PicardStep {
  Eigen::VectorXd h_next;
  Eigen::VectorXd increment;
  double g_top = 0.0;
  double g_bottom = 0.0;
  double sink_integral = 0.0;
};

inline PicardStep picard_step(const Eigen::VectorXd& h_iter, const Eigen::VectorXd& f_prev,
                              double t_new, double dt, const Grid& grid, const SoilProfile& profile,
                              const SinkParams& theta, const EnvironmentModel& env,
                              const BoundaryConditions& bc, InterblockMean mean) {
  grid.validate();
  const int m = grid.nodes;
  if (h_iter.size() != m || f_prev.size() != m)
    throw InvalidArgumentError("picard: state size != node count");
  const double dz = grid.dz();

  Eigen::VectorXd k(m), cap(m), f(m), s(m);
  for (int i = 0; i < m; ++i) {
    const SoilLayerParams& soil = profile.at_z(grid.z(i));
    f[i] = water_content_from_head(h_iter[i], soil);
    cap[i] = specific_capacity(h_iter[i], soil);
    k[i] = hydraulic_conductivity(effective_saturation(f[i], soil), soil);
    s[i] = sink(h_iter[i], grid.z(i), t_new, theta, env);
  }

  Eigen::VectorXd k_face(m - 1);  // face i+1/2 between nodes i and i+1
  for (int i = 0; i < m - 1; ++i)
    k_face[i] = detail::face_conductivity(k[i], k[i + 1], h_iter[i], h_iter[i + 1], dz, mean);

  const double g_top = bc.upper_flux(t_new);
  const double g_bot = bc.lower_mode == BoundaryConditions::Lower::unit_gradient
                           ? k[0]
                           : bc.lower_flux(t_new);

  const double dz2 = dz * dz;
  Eigen::VectorXd sub(m - 1), dia(m), sup(m - 1), rhs(m);

  // Bottom node: prescribed (or unit-gradient) flux across the lower face.
  dia[0] = cap[0] / dt + k_face[0] / dz2;
  sup[0] = -k_face[0] / dz2;
  rhs[0] = k_face[0] * (h_iter[1] - h_iter[0]) / dz2 + (k_face[0] - g_bot) / dz -
           (f[0] - f_prev[0]) / dt - s[0];

  for (int i = 1; i < m - 1; ++i) {
    sub[i - 1] = -k_face[i - 1] / dz2;
    dia[i] = cap[i] / dt + (k_face[i] + k_face[i - 1]) / dz2;
    sup[i] = -k_face[i] / dz2;
    rhs[i] = (k_face[i] * (h_iter[i + 1] - h_iter[i]) - k_face[i - 1] * (h_iter[i] - h_iter[i - 1])) / dz2 +
             (k_face[i] - k_face[i - 1]) / dz - (f[i] - f_prev[i]) / dt - s[i];
  }

  // Top node: prescribed flux across the surface.
  sub[m - 2] = -k_face[m - 2] / dz2;
  dia[m - 1] = cap[m - 1] / dt + k_face[m - 2] / dz2;
  rhs[m - 1] = -k_face[m - 2] * (h_iter[m - 1] - h_iter[m - 2]) / dz2 + (g_top - k_face[m - 2]) / dz -
               (f[m - 1] - f_prev[m - 1]) / dt - s[m - 1];

  PicardStep out;
  out.increment = thomas_solve(sub, dia, sup, rhs);
  out.h_next = h_iter + out.increment;
  out.g_top = g_top;
  out.g_bottom = g_bot;
  out.sink_integral = s.sum() * dz;
  return out;
}

/// Integrates the column from t = 0 to t_end with the mass-conservative
/// modified Picard scheme. On non-convergence a step is retried with the
/// step size halved, down to dt / 2^max_halvings; the next step returns to
/// the base dt. Columns are stored at t = 0 and every store_every seconds
/// (plus t_end). Throws SolverDivergedError with the partial field when a
/// step fails at the smallest step size.
inline SolutionField solve_richards(const Grid& grid, const SoilProfile& profile,
                                    const SinkParams& theta, const EnvironmentModel& env,
                                    const BoundaryConditions& bc, const SolverOptions& opts) {
  grid.validate();
  opts.validate();
  bc.validate(grid);
  const int m = grid.nodes;

  Eigen::VectorXd h(m);
  for (int i = 0; i < m; ++i) {
    const SoilLayerParams& soil = profile.at_z(grid.z(i));
    h[i] = bc.initial_is_head ? bc.initial[i] : head_from_water_content(bc.initial[i], soil);
  }

  SolutionField field;
  field.grid = grid;
  const auto n_stores = static_cast<std::size_t>(std::ceil(opts.t_end / opts.store_every)) + 2;
  field.f.resize(m, static_cast<Eigen::Index>(n_stores));
  field.h.resize(m, static_cast<Eigen::Index>(n_stores));

  Eigen::VectorXd f(m);
  const auto content_of = [&](const Eigen::VectorXd& heads, Eigen::VectorXd& out) {
    for (int i = 0; i < m; ++i) {
      const SoilLayerParams& soil = profile.at_z(grid.z(i));
      double v = water_content_from_head(heads[i], soil);
      if (v < soil.c_r || v > soil.c_s) {
        v = std::clamp(v, soil.c_r, soil.c_s);
        ++field.clamp_events;
      }
      out[i] = v;
    }
  };
  content_of(h, f);

  const auto store = [&](double t) {
    const auto col = static_cast<Eigen::Index>(field.times.size());
    field.f.col(col) = f;
    field.h.col(col) = h;
    field.times.push_back(t);
  };
  store(0.0);

  const double initial_storage = f.sum() * grid.dz();
  const double t_eps = 1e-9 * opts.t_end;
  double t = 0.0;
  double next_store = opts.store_every;

  while (t < opts.t_end - t_eps) {
    const double target = std::min(next_store, opts.t_end);
    const double dt_want = std::min(opts.dt, target - t);

    bool advanced = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      const double dt_try = dt_want / std::pow(2.0, halving);
      Eigen::VectorXd h_it = h;
      PicardStep last;
      bool converged = false;
      int iters = 0;
      try {
        for (int j = 0; j < opts.max_picard; ++j) {
          last = picard_step(h_it, f, t + dt_try, dt_try, grid, profile, theta, env, bc, opts.interblock);
          h_it = last.h_next;
          ++iters;
          if (last.increment.lpNorm<Eigen::Infinity>() < opts.picard_tol) {
            converged = true;
            break;
          }
        }
      } catch (const NumericalError&) {
        converged = false;  // singular system at this step size: halve and retry
      }
      if (!converged) continue;

      Eigen::VectorXd f_new(m);
      content_of(h_it, f_new);

      StepStats st;
      st.t_start = t;
      st.dt = dt_try;
      st.picard_iterations = iters;
      st.halvings = halving;
      st.g_top = last.g_top;
      st.g_bottom = last.g_bottom;
      st.sink_integral = last.sink_integral;
      const double lhs = (f_new - f).sum() * grid.dz();
      const double rhs = dt_try * (last.g_top - last.g_bottom - last.sink_integral);
      st.mass_error = lhs - rhs;
      st.mass_error_rel = std::abs(lhs - rhs) /
                          std::max({std::abs(lhs), std::abs(rhs), 1e-12 * std::abs(initial_storage), 1e-300});
      field.steps.push_back(st);
      field.halving_events += halving;

      h = h_it;
      f = f_new;
      t += dt_try;
      advanced = true;
      break;
    }
    if (!advanced) {
      field.f.conservativeResize(m, static_cast<Eigen::Index>(field.times.size()));
      field.h.conservativeResize(m, static_cast<Eigen::Index>(field.times.size()));
      throw SolverDivergedError(
          "solver: no convergence at t = " + num(t) + " s even at dt / " + num(std::pow(2.0, opts.max_halvings)),
          std::move(field));
    }
    if (t >= target - t_eps && target == next_store) {
      store(t);
      next_store += opts.store_every;
    } else if (t >= opts.t_end - t_eps) {
      store(t);
    }
  }

  field.f.conservativeResize(m, static_cast<Eigen::Index>(field.times.size()));
  field.h.conservativeResize(m, static_cast<Eigen::Index>(field.times.size()));
  return field;
}

/// Evaluates the stored field at the given (z, t) rows and adds homoscedastic
/// Gaussian noise with variance `noise_scale` times the sample variance of
/// the noiseless values. noise_scale = 0 reproduces the field exactly.
inline Dataset sample_observations(const SolutionField& field, const Eigen::MatrixXd& x,
                                   double noise_scale, Rng& rng, double* noise_sd_out = nullptr) {
  if (x.cols() != 2) throw InvalidArgumentError("observations: design must have (z, t) columns");
  if (x.rows() == 0) throw InvalidArgumentError("observations: empty design");
  if (!(noise_scale >= 0.0)) throw InvalidArgumentError("observations: noise scale must be >= 0");
  Dataset ds;
  ds.x = x;
  ds.y.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) ds.y[i] = field.content_at(x(i, 0), x(i, 1));
  const double sd = std::sqrt(noise_scale * sample_variance(ds.y));
  if (noise_sd_out) *noise_sd_out = sd;
  if (sd > 0.0)
    for (Eigen::Index i = 0; i < ds.y.size(); ++i) ds.y[i] += sd * rng.normal();
  ds.validate();
  return ds;
}

/// Product design: one row per (depth, day) pair, z = -depth, t = day * 86400 s.
inline Eigen::MatrixXd observation_design(const std::vector<double>& depths,
                                          const std::vector<double>& days) {
  if (depths.empty() || days.empty()) throw InvalidArgumentError("observations: empty design axes");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(depths.size() * days.size()), 2);
  Eigen::Index r = 0;
  for (const double day : days)
    for (const double depth : depths) {
      x(r, 0) = -depth;
      x(r, 1) = day * kSecondsPerDay;
      ++r;
    }
  return x;
}

inline void write_field_csv(const std::filesystem::path& path, const SolutionField& field) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(field.times.size() * static_cast<std::size_t>(field.grid.nodes));
  for (std::size_t j = 0; j < field.times.size(); ++j)
    for (int i = 0; i < field.grid.nodes; ++i)
      rows.push_back({num(field.grid.z(i)), num(field.times[j]),
                      num(field.f(i, static_cast<Eigen::Index>(j))), num(field.h(i, static_cast<Eigen::Index>(j)))});
  write_csv(path, {"z", "t", "f", "h"}, rows);
}

}  // namespace gpcinfer
