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
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/collocation.hpp>
#include <gpcinfer/common.hpp>
#include <gpcinfer/gp.hpp>
#include <gpcinfer/importance.hpp>
#include <gpcinfer/mcmc.hpp>
#include <gpcinfer/posterior.hpp>

namespace gpcinfer {

struct GpcOptions {
  GpFitOptions gp_fit;
  CollocationConfig collocation;
  int mh_iterations = 3000;
  double burn_fraction = 0.5;
  int n_exact = 15;  // thinned states corrected with exact solves (n_t)
  std::optional<Eigen::Vector2d> theta_anchor;       // defaults to the prior box center
  std::optional<Eigen::VectorXd> proposal_sd;        // defaults to 5% of the prior widths
  double hpd_level = 0.95;
  int density_cells = 100;
  int jobs = 1;  // concurrent exact solves

  void validate() const {
    collocation.validate();
    if (mh_iterations < 2) throw InvalidArgumentError("gpc: mh_iterations must be >= 2");
    if (!(burn_fraction >= 0.0 && burn_fraction < 1.0)) throw InvalidArgumentError("gpc: bad burn fraction");
    if (n_exact < 1) throw InvalidArgumentError("gpc: n_exact must be >= 1");
    if (jobs < 1) throw InvalidArgumentError("gpc: jobs must be >= 1");
  }
};

/// One corrected posterior sample.
struct WeightedSample {
  Eigen::Vector2d theta;
  double log_approx = 0.0;
  double log_true = 0.0;  // -inf when the exact evaluation failed
  double weight = 0.0;
};

/// Everything a single inference run produces, in memory. write() lays the
/// run record out on disk.
struct RunRecord {
  Eigen::Vector2d estimate;
  std::vector<WeightedSample> samples;
  double ess = 0.0;
  double ess_fraction = 0.0;
  double acceptance_rate = 0.0;
  GpHyperparams hyperparams;
  double gp_lml = 0.0;
  long solver_calls = 0;
  long failed_solves = 0;
  long residual_clamps = 0;
  double sigma_ridge = 0.0;
  Chain chain;
  Eigen::MatrixXd collocation_points;
  std::optional<WeightedKde> kde;
  std::optional<HpdRegion> hpd;

  void write(const std::filesystem::path& dir, const std::string& config_snapshot) const {
    std::filesystem::create_directories(dir);
    {
      std::vector<std::vector<std::string>> rows;
      for (const auto& s : samples)
        rows.push_back({num(s.theta[0]), num(s.theta[1]), num(s.log_approx), num(s.log_true), num(s.weight)});
      write_csv(dir / "samples.csv", {"beta", "L_m", "log_approx", "log_true", "weight"}, rows);
    }
    write_csv(dir / "estimate.csv", {"beta", "L_m"}, {{num(estimate[0]), num(estimate[1])}});
    if (hpd) {
      std::vector<std::vector<std::string>> kde_rows, hpd_rows;
      for (Eigen::Index i = 0; i < hpd->axis1.size(); ++i)
        for (Eigen::Index j = 0; j < hpd->axis2.size(); ++j) {
          kde_rows.push_back({num(hpd->axis1[i]), num(hpd->axis2[j]), num(hpd->density(i, j))});
          if (hpd->inside(i, j))
            hpd_rows.push_back({num(hpd->axis1[i]), num(hpd->axis2[j]), num(hpd->density(i, j))});
        }
      write_csv(dir / "kde_grid.csv", {"beta", "L_m", "density"}, kde_rows);
      write_csv(dir / "hpd.csv", {"beta", "L_m", "density"}, hpd_rows);
    }
    if (chain.length() > 0) write_chain_csv(dir / "chain.csv", chain);
    save_hyperparams(dir / "hyperparams.txt", hyperparams);
    {
      std::ofstream out(dir / "config_snapshot.txt");
      out << config_snapshot;
    }
    {
      std::ofstream out(dir / "diagnostics.txt");
      out << "ess = " << num(ess) << "\n"
          << "ess_fraction = " << num(ess_fraction) << "\n"
          << "acceptance_rate = " << num(acceptance_rate) << "\n"
          << "gp_lml = " << num(gp_lml) << "\n"
          << "solver_calls = " << solver_calls << "\n"
          << "failed_solves = " << failed_solves << "\n"
          << "residual_clamps = " << residual_clamps << "\n"
          << "sigma_ridge = " << num(sigma_ridge) << "\n";
      if (hpd) out << "hpd_threshold = " << num(hpd->threshold) << "\n"
                   << "hpd_covered_mass = " << num(hpd->covered_mass) << "\n";
    }
  }
};

/// Collocation posterior with everything needed to evaluate it at new theta:
/// the fitted field surrogate, the residual ensemble at the selected points,
/// the anchored residual covariance, and the exploration chain over it.
struct ApproxPosterior {
  Prior prior;
  GpHyperparams hyperparams;
  double gp_lml = 0.0;
  Eigen::MatrixXd points;
  ResidualEnsemble ensemble;
  ResidualCovariance covariance;
  double temperature = 1.0;
  Chain chain;

  double log_density(const Eigen::VectorXd& theta) const {
    return log_approx_posterior(theta, prior, ensemble, covariance, temperature);
  }

  /// Log densities of the retained (post burn-in) chain states.
  Eigen::VectorXd retained_log_densities(double burn_fraction) const {
    const auto burn = static_cast<Eigen::Index>(std::floor(static_cast<double>(chain.length()) * burn_fraction));
    return chain.log_target.segment(burn, chain.length() - burn);
  }
};

/// Builds the collocation posterior: fits the field surrogate, samples
/// plausible states at the selected collocation points, anchors the residual
/// covariance, and explores the result with a random walk. No forward-solver
/// runs are involved.
inline ApproxPosterior build_approx_posterior(const Dataset& data, const Prior& prior,
                                              const GpHyperparams& gp_init, const GpcOptions& opts,
                                              const SoilProfile& profile, const EnvironmentModel& env,
                                              Rng rng) {
  opts.validate();
  if (prior.dims() != 2) throw InvalidArgumentError("gpc: prior must be over (beta, L_m)");

  GpFitOptions fit_opts = opts.gp_fit;
  fit_opts.seed = rng.fork(1).seed();
  const GpFitResult fit = fit_hyperparameters(data, gp_init, fit_opts);

  Rng select_rng = rng.fork(2);
  const std::vector<int> idx = select_points(data.x, opts.collocation.margin, opts.collocation.n_select, select_rng);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t j = 0; j < idx.size(); ++j) points.row(static_cast<Eigen::Index>(j)) = data.x.row(idx[j]);
  Rng draw_rng = rng.fork(3);
  ResidualEnsemble ensemble = make_residual_ensemble(
      data, fit.hyperparams, points, opts.collocation.n_draws, profile, env, opts.collocation.clamp_shrink, draw_rng);

  const Eigen::Vector2d anchor = opts.theta_anchor.value_or(Eigen::Vector2d(prior.center()));
  if (!prior.in_support(anchor)) throw InvalidArgumentError("gpc: anchor theta outside the prior support");
  const ResidualCovariance cov = estimate_residual_covariance(ensemble, SinkParams{anchor[0], anchor[1]});

  ApproxPosterior ap{prior,    fit.hyperparams, fit.lml, std::move(points),
                     std::move(ensemble), cov,  opts.collocation.temperature, Chain{}};
  const auto log_approx = [&ap](const Eigen::VectorXd& theta) { return ap.log_density(theta); };
  const Eigen::VectorXd proposal = opts.proposal_sd.value_or(Eigen::VectorXd(0.05 * prior.widths()));
  Rng mh_rng = rng.fork(4);
  ap.chain = metropolis_hastings(log_approx, anchor, proposal, opts.mh_iterations, mh_rng);
  return ap;
}

/// Full corrected-collocation run: build the collocation posterior, thin its
/// chain, then reweight the retained states by the exact solver-based
/// posterior. The exact solver runs exactly n_exact times (failures
/// included), concurrently when jobs > 1.
inline RunRecord run_gpc_i(const Dataset& data, const TruePosterior& posterior,
                           const GpHyperparams& gp_init, const GpcOptions& opts,
                           const SoilProfile& profile, const EnvironmentModel& env, Rng rng) {
  const Prior& prior = posterior.prior();
  ApproxPosterior ap = build_approx_posterior(data, prior, gp_init, opts, profile, env, rng);

  RunRecord rec;
  rec.hyperparams = ap.hyperparams;
  rec.gp_lml = ap.gp_lml;
  rec.collocation_points = ap.points;
  rec.sigma_ridge = ap.covariance.ridge;
  rec.chain = ap.chain;
  rec.acceptance_rate = rec.chain.acceptance_rate();

  const auto thin_idx = thin_indices(rec.chain.length(), opts.burn_fraction, opts.n_exact);
  const auto n_t = static_cast<Eigen::Index>(thin_idx.size());
  Eigen::MatrixXd thetas(n_t, 2);
  Eigen::VectorXd log_a(n_t), log_t(n_t);
  for (Eigen::Index k = 0; k < n_t; ++k) {
    thetas.row(k) = rec.chain.states.row(thin_idx[static_cast<std::size_t>(k)]);
    log_a[k] = rec.chain.log_target[thin_idx[static_cast<std::size_t>(k)]];
  }

  // Exact correction: one solver run per retained state, merged by index.
  const auto eval_exact = [&](Eigen::Index k) {
    try {
      return posterior.log_density(thetas.row(k).transpose());
    } catch (const SolverDivergedError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  if (opts.jobs > 1) {
    std::vector<std::future<double>> futs;
    futs.reserve(static_cast<std::size_t>(n_t));
    for (Eigen::Index k = 0; k < n_t; ++k)
      futs.push_back(std::async(std::launch::async, eval_exact, k));
    for (Eigen::Index k = 0; k < n_t; ++k) log_t[k] = futs[static_cast<std::size_t>(k)].get();
  } else {
    for (Eigen::Index k = 0; k < n_t; ++k) log_t[k] = eval_exact(k);
  }
  rec.solver_calls = posterior.solver_calls();
  for (Eigen::Index k = 0; k < n_t; ++k)
    if (!std::isfinite(log_t[k])) ++rec.failed_solves;

  const Eigen::VectorXd w = importance_weights(log_t, log_a);
  rec.estimate = is_estimate(thetas, w);
  rec.ess = effective_sample_size(w);
  rec.ess_fraction = rec.ess / static_cast<double>(n_t);
  rec.residual_clamps = ap.ensemble.clamp_events;

  rec.samples.resize(static_cast<std::size_t>(n_t));
  for (Eigen::Index k = 0; k < n_t; ++k)
    rec.samples[static_cast<std::size_t>(k)] = {thetas.row(k).transpose(), log_a[k], log_t[k], w[k]};

  // Corrected density summary over the prior box.
  try {
    rec.kde = WeightedKde::with_scott_bandwidth(thetas, w);
    rec.hpd = hpd_region(*rec.kde, prior.lower(), prior.upper(), opts.density_cells, opts.hpd_level);
  } catch (const NumericalError&) {
    // A degenerate weight pattern (e.g. one surviving sample) has no density
    // summary; the estimate and samples are still valid.
  }
  return rec;
}

}  // namespace gpcinfer
