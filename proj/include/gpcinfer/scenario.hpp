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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/bayes_opt.hpp>
#include <gpcinfer/common.hpp>
#include <gpcinfer/config.hpp>
#include <gpcinfer/environment.hpp>
#include <gpcinfer/gpc.hpp>
#include <gpcinfer/gppde.hpp>
#include <gpcinfer/posterior.hpp>
#include <gpcinfer/prior.hpp>
#include <gpcinfer/soil.hpp>
#include <gpcinfer/solver.hpp>

namespace gpcinfer {

/// A fully wired synthetic-study setup: column, soil, environment, boundary
/// and initial conditions, observation protocol, and the per-method options.
/// The defaults describe a 29 cm loam column observed daily at six depths for
/// 90 days (540 points), with uptake parameters theta = (beta, L_m).
struct Scenario {
  Grid grid;
  SoilProfile profile = SoilProfile::uniform({0.156, 0.60, 5.87, 0.273, 6e-6}, 1.0);
  EnvironmentModel env;
  BoundaryConditions bc;
  SolverOptions solver;
  SinkParams truth{1.9, 1.4};

  std::vector<double> depths;  // observation depths in meters (positive)
  int day_start = 1;
  int day_end = 90;
  double noise_b = 0.05;  // noise variance = b * sample variance of the field values

  Prior prior = Prior::default_sink_prior();
  TruePosteriorConfig posterior_cfg;
  GpcOptions gpc;
  BoproConfig bopro;
  GppdeOptions gppde;

  // GP initialization; non-positive variances are replaced per dataset.
  double gp_length_scale_z = 0.0;  // 0 -> 30% of the z range
  double gp_length_scale_t = 0.0;  // 0 -> 30% of the t range
  double gp_signal_variance = 0.0; // 0 -> sample variance of y
  double gp_noise_variance = 0.0;  // 0 -> 10% of the sample variance of y

  std::vector<double> days() const {
    std::vector<double> d;
    for (int day = day_start; day <= day_end; ++day) d.push_back(static_cast<double>(day));
    return d;
  }

  Eigen::MatrixXd design() const { return observation_design(depths, days()); }

  /// Solves the forward model at theta on this scenario's column.
  SolutionField solve(const SinkParams& theta) const {
    return solve_richards(grid, profile, theta, env, bc, solver);
  }

  /// Draws the noisy dataset for one replicate from a solved truth field.
  Dataset observe(const SolutionField& field, Rng& rng, double* noise_sd = nullptr) const {
    return sample_observations(field, design(), noise_b, rng, noise_sd);
  }

  /// GP hyperparameter init adapted to the dataset scale.
  GpHyperparams gp_init(const Dataset& data) const {
    GpHyperparams hp;
    hp.length_scales.resize(2);
    const double zr = data.x.col(0).maxCoeff() - data.x.col(0).minCoeff();
    const double tr = data.x.col(1).maxCoeff() - data.x.col(1).minCoeff();
    hp.length_scales[0] = gp_length_scale_z > 0.0 ? gp_length_scale_z : 0.3 * (zr > 0.0 ? zr : 1.0);
    hp.length_scales[1] = gp_length_scale_t > 0.0 ? gp_length_scale_t : 0.3 * (tr > 0.0 ? tr : 1.0);
    const double var_y = std::max(sample_variance(data.y), 1e-12);
    hp.signal_variance = gp_signal_variance > 0.0 ? gp_signal_variance : var_y;
    hp.noise_variance = gp_noise_variance > 0.0 ? gp_noise_variance : 0.1 * var_y;
    hp.mean_constant = data.y.mean();
    return hp;
  }

  TruePosterior posterior(const Dataset& data) const {
    return TruePosterior(data, prior, grid, profile, env, bc, solver, posterior_cfg);
  }
};

namespace detail {

inline Eigen::VectorXd quadratic_initial_content(const Grid& grid, double offset, double scale,
                                                 double center) {
  Eigen::VectorXd f(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) {
    const double z = grid.z(i);
    f[i] = offset + scale * (z - center) * (z - center);
  }
  return f;
}

}  // namespace detail

/// Builds a scenario from a configuration, consuming every recognized key so
/// the caller can reject unknown ones with cfg.finalize(). All keys default
/// to the 90-day loam study; an empty configuration reproduces its full
/// 540-observation layout.
inline Scenario make_scenario(Config& cfg) {
  Scenario sc;

  sc.grid.z_bottom = cfg.get_double("grid.z_bottom", -0.3);
  sc.grid.z_top = cfg.get_double("grid.z_top", -0.01);
  sc.grid.nodes = static_cast<int>(cfg.get_int("grid.nodes", 59));
  sc.grid.validate();

  const std::string profile_file = cfg.get_string("soil.profile_file", "");
  if (!profile_file.empty()) {
    sc.profile = read_soil_profile_csv(profile_file);
  } else {
    SoilLayerParams p;
    p.c_r = cfg.get_double("soil.c_r", 0.156);
    p.c_s = cfg.get_double("soil.c_s", 0.60);
    p.gamma = cfg.get_double("soil.gamma", 5.87);
    p.nu = cfg.get_double("soil.nu", 0.273);
    p.k_sat = cfg.get_double("soil.k_sat", 6e-6);
    const double cover = std::max(std::abs(sc.grid.z_bottom), 1.0);
    sc.profile = SoilProfile::uniform(p, cfg.get_double("soil.max_depth", cover));
  }
  if (sc.profile.max_depth() < std::abs(sc.grid.z_bottom))
    throw ConfigError("soil profile shallower than the column bottom");

  RootGrowth growth;
  growth.start_day = cfg.get_double("root_growth.start_day", 0.0);
  growth.maturity_days = cfg.get_double("root_growth.maturity_days", 60.0);
  growth.steepness = cfg.get_double("root_growth.steepness", 10.0);
  growth.min_fraction = cfg.get_double("root_growth.min_fraction", 0.05);

  const std::string series_file = cfg.get_string("environment.series_file", "");
  if (!series_file.empty()) {
    sc.env = environment_from_series(read_environment_csv(series_file), growth);
  } else {
    FeddesParams feddes{cfg.get_double("environment.feddes_a1", -0.01),
                        cfg.get_double("environment.feddes_a2", -0.1),
                        cfg.get_double("environment.feddes_a3", -8.0),
                        cfg.get_double("environment.feddes_a4", -80.0)};
    sc.env = EnvironmentModel::constant(cfg.get_double("environment.transpiration", 2.3148e-8),
                                        cfg.get_double("environment.rainfall", 0.0),
                                        cfg.get_double("environment.evaporation", 0.0), feddes, growth);
  }

  sc.solver.dt = cfg.get_double("solver.dt", 400.0);
  sc.solver.t_end = cfg.get_double("solver.t_end_days", 90.0) * kSecondsPerDay;
  sc.solver.picard_tol = cfg.get_double("solver.picard_tol", 1e-6);
  sc.solver.max_picard = static_cast<int>(cfg.get_int("solver.max_picard", 50));
  sc.solver.max_halvings = static_cast<int>(cfg.get_int("solver.max_halvings", 6));
  sc.solver.store_every = cfg.get_double("solver.store_every_seconds", kSecondsPerDay);
  const std::string mean = cfg.get_string("solver.interblock", "arithmetic");
  if (mean == "arithmetic") sc.solver.interblock = InterblockMean::arithmetic;
  else if (mean == "geometric") sc.solver.interblock = InterblockMean::geometric;
  else if (mean == "upstream") sc.solver.interblock = InterblockMean::upstream;
  else throw ConfigError("solver.interblock: unknown mean '" + mean + "'");
  sc.solver.validate();

  const std::string init_mode = cfg.get_string("initial.mode", "quadratic_content");
  if (init_mode == "quadratic_content") {
    sc.bc.initial = detail::quadratic_initial_content(sc.grid, cfg.get_double("initial.offset", 0.33),
                                                      cfg.get_double("initial.scale", 0.5),
                                                      cfg.get_double("initial.center", -0.1));
    sc.bc.initial_is_head = false;
  } else if (init_mode == "uniform_head") {
    sc.bc.initial = Eigen::VectorXd::Constant(sc.grid.nodes, cfg.get_double("initial.head", -2.0));
    sc.bc.initial_is_head = true;
  } else if (init_mode == "uniform_content") {
    sc.bc.initial = Eigen::VectorXd::Constant(sc.grid.nodes, cfg.get_double("initial.content", 0.33));
    sc.bc.initial_is_head = false;
  } else {
    throw ConfigError("initial.mode: unknown mode '" + init_mode + "'");
  }
  {
    const EnvironmentModel env = sc.env;  // copy for capture, keeps Scenario copyable
    sc.bc.upper_flux = [env](double t) { return env.surface_flux(t); };
  }
  const std::string lower = cfg.get_string("boundary.lower", "unit_gradient");
  if (lower == "unit_gradient") {
    sc.bc.lower_mode = BoundaryConditions::Lower::unit_gradient;
  } else if (lower == "prescribed_flux") {
    sc.bc.lower_mode = BoundaryConditions::Lower::prescribed_flux;
    const double q = cfg.get_double("boundary.lower_flux", 0.0);
    sc.bc.lower_flux = [q](double) { return q; };
  } else {
    throw ConfigError("boundary.lower: unknown mode '" + lower + "'");
  }
  sc.bc.validate(sc.grid);

  sc.truth.beta = cfg.get_double("truth.beta", 1.9);
  sc.truth.l_m = cfg.get_double("truth.L_m", 1.4);

  sc.depths = cfg.get_double_list("observation.depths", {0.05, 0.10, 0.15, 0.20, 0.25, 0.30});
  sc.day_start = static_cast<int>(cfg.get_int("observation.day_start", 1));
  sc.day_end = static_cast<int>(cfg.get_int("observation.day_end", 90));
  sc.noise_b = cfg.get_double("observation.noise_b", 0.05);
  if (sc.day_start < 0 || sc.day_end < sc.day_start) throw ConfigError("observation: bad day range");
  if (sc.depths.empty()) throw ConfigError("observation: need at least one depth");
  for (double d : sc.depths)
    if (!(d > 0.0)) throw ConfigError("observation: depths must be positive meters");

  {
    CoordinatePrior beta, lm;
    beta.lo = cfg.get_double("prior.beta_lo", 0.75);
    beta.hi = cfg.get_double("prior.beta_hi", 3.0);
    lm.lo = cfg.get_double("prior.L_m_lo", 1.0);
    lm.hi = cfg.get_double("prior.L_m_hi", 4.0);
    sc.prior = Prior{{beta, lm}, {"beta", "L_m"}};
    sc.prior.validate();
  }

  sc.posterior_cfg.alpha = cfg.get_double("posterior.alpha", 1.0);
  sc.posterior_cfg.eta = cfg.get_double("posterior.eta", 1.0);
  sc.posterior_cfg.validate();

  sc.gp_length_scale_z = cfg.get_double("gp.length_scale_z", 0.0);
  sc.gp_length_scale_t = cfg.get_double("gp.length_scale_t", 0.0);
  sc.gp_signal_variance = cfg.get_double("gp.signal_variance", 0.0);
  sc.gp_noise_variance = cfg.get_double("gp.noise_variance", 0.0);
  sc.gpc.gp_fit.restarts = static_cast<int>(cfg.get_int("gp.restarts", 5));

  sc.gpc.collocation.n_select = static_cast<int>(cfg.get_int("collocation.n_select", 10));
  sc.gpc.collocation.n_draws = static_cast<int>(cfg.get_int("collocation.n_draws", 100));
  sc.gpc.collocation.margin = cfg.get_double("collocation.margin", 0.1);
  sc.gpc.collocation.temperature = cfg.get_double("collocation.temperature", 1.0);
  sc.gpc.collocation.clamp_shrink = cfg.get_double("collocation.clamp_shrink", 1e-6);
  sc.gpc.mh_iterations = static_cast<int>(cfg.get_int("mcmc.iterations", 3000));
  sc.gpc.burn_fraction = cfg.get_double("mcmc.burn_fraction", 0.5);
  sc.gpc.n_exact = static_cast<int>(cfg.get_int("mcmc.n_exact", 15));
  sc.gpc.hpd_level = cfg.get_double("density.hpd_level", 0.95);
  sc.gpc.density_cells = static_cast<int>(cfg.get_int("density.cells", 100));
  sc.gpc.validate();

  sc.bopro.delta = cfg.get_double("bo.delta", 0.05);
  sc.bopro.tau = cfg.get_double("bo.tau", 3.0);
  sc.bopro.n0 = static_cast<int>(cfg.get_int("bo.n0", 5));
  sc.bopro.iterations = static_cast<int>(cfg.get_int("bo.iterations", 10));
  sc.bopro.candidate_count = static_cast<int>(cfg.get_int("bo.candidates", 10000));
  sc.bopro.polish_rounds = static_cast<int>(cfg.get_int("bo.polish_rounds", 3));
  sc.bopro.polish_samples = static_cast<int>(cfg.get_int("bo.polish_samples", 100));
  sc.bopro.validate();

  sc.gppde.lower = Eigen::Vector2d(sc.prior.lower());
  sc.gppde.upper = Eigen::Vector2d(sc.prior.upper());
  sc.gppde.lbfgs.max_iter = static_cast<int>(cfg.get_int("gppde.max_iter", 200));
  sc.gppde.clamp_shrink = cfg.get_double("gppde.clamp_shrink", 1e-6);
  sc.gppde.validate();

  return sc;
}

}  // namespace gpcinfer
