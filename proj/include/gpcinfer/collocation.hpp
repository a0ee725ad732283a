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
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/environment.hpp>
#include <gpcinfer/gaussian.hpp>
#include <gpcinfer/gp.hpp>
#include <gpcinfer/prior.hpp>
#include <gpcinfer/richards.hpp>
#include <gpcinfer/rng.hpp>
#include <gpcinfer/soil.hpp>

namespace gpcinfer {

struct CollocationConfig {
  int n_select = 10;        // collocation points n_s
  int n_draws = 100;        // joint field samples N
  double margin = 0.1;      // excluded fraction of the time range at each end
  double temperature = 1.0; // tempering of the ensemble likelihood factor
  double clamp_shrink = 1e-6;  // relative shrink of (c_r, c_s) when clamping f

  void validate() const {
    if (n_select < 1 || n_draws < 1) throw InvalidArgumentError("collocation: counts must be >= 1");
    if (!(margin >= 0.0 && margin < 0.5)) throw InvalidArgumentError("collocation: margin must lie in [0, 0.5)");
    if (!(temperature > 0.0)) throw InvalidArgumentError("collocation: temperature must be > 0");
    if (!(clamp_shrink > 0.0 && clamp_shrink < 0.5)) throw InvalidArgumentError("collocation: bad clamp shrink");
  }
};

/// Picks `n_select` collocation points uniformly without replacement from the
/// data design, after discarding a margin where the derivative estimates are
/// least reliable: points within `margin` times the time range of either end,
/// and points on the outermost z levels (when more than two levels exist).
/// Returns ascending row indices into x. With margin = 0 and n_select equal
/// to the number of rows the selection is the identity.
inline std::vector<int> select_points(const Eigen::MatrixXd& x, double margin, int n_select, Rng& rng) {
  if (x.cols() != 2) throw InvalidArgumentError("select points: design must have (z, t) columns");
  if (x.rows() == 0) throw InvalidArgumentError("select points: empty design");
  const double t_min = x.col(1).minCoeff(), t_max = x.col(1).maxCoeff();
  const double z_min = x.col(0).minCoeff(), z_max = x.col(0).maxCoeff();
  const double t_lo = t_min + margin * (t_max - t_min);
  const double t_hi = t_max - margin * (t_max - t_min);

  // Count distinct z levels to decide whether trimming the outer ones is possible.
  std::vector<double> levels;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool found = false;
    for (const double l : levels)
      if (x(i, 0) == l) { found = true; break; }
    if (!found) levels.push_back(x(i, 0));
  }
  const bool trim_z = margin > 0.0 && levels.size() > 2;

  std::vector<int> eligible;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x(i, 1) < t_lo || x(i, 1) > t_hi) continue;
    if (trim_z && (x(i, 0) == z_min || x(i, 0) == z_max)) continue;
    eligible.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(eligible.size()) < n_select)
    throw InvalidArgumentError("select points: only " + std::to_string(eligible.size()) +
                               " eligible rows for n_select = " + std::to_string(n_select));
  const std::vector<int> pick = rng.sample_without_replacement(static_cast<int>(eligible.size()), n_select);
  std::vector<int> out;
  out.reserve(pick.size());
  for (const int j : pick) out.push_back(eligible[static_cast<std::size_t>(j)]);
  return out;
}

/// Residuals of one sampled field state at every collocation point. The row
/// layout follows the joint block: entry b * n_s + j is functional b at point
/// j, with blocks (f, df/dz, df/dt, d2f/dz2). Water-content entries are
/// clamped into the layer interval shrunk by `clamp_shrink` relative to its
/// width; `clamp_count`, when given, accumulates how many entries needed it.
inline Eigen::VectorXd residual_vector(const Eigen::VectorXd& omega_row, const Eigen::MatrixXd& points,
                                       const SinkParams& theta, const SoilProfile& profile,
                                       const EnvironmentModel& env, double clamp_shrink,
                                       long* clamp_count = nullptr) {
  const Eigen::Index n_s = points.rows();
  if (omega_row.size() != 4 * n_s)
    throw InvalidArgumentError("residual vector: state size != 4 x point count");
  Eigen::VectorXd xi(n_s);
  for (Eigen::Index j = 0; j < n_s; ++j) {
    const double z = points(j, 0), t = points(j, 1);
    const SoilLayerParams& soil = profile.at_z(z);
    StateDerivatives w{omega_row[j], omega_row[n_s + j], omega_row[2 * n_s + j], omega_row[3 * n_s + j]};
    const double pad = clamp_shrink * (soil.c_s - soil.c_r);
    const double clamped = std::clamp(w.f, soil.c_r + pad, soil.c_s - pad);
    if (clamped != w.f && clamp_count) ++*clamp_count;
    w.f = clamped;
    xi[j] = richards_residual(z, t, w, theta, soil, env);
  }
  return xi;
}

/// Monte Carlo ensemble of plausible field states at the collocation points,
/// drawn once from the joint state-derivative posterior and reused for every
/// theta evaluation. Only the uptake term of the residual depends on theta,
/// so the transport-plus-storage part and the pressure head of each sampled
/// state are cached at construction; per-theta evaluation then multiplies the
/// stress response into a per-point factor. clamp_events counts the sampled
/// water contents pulled back inside the physical range, once per entry.
struct ResidualEnsemble {
  Eigen::MatrixXd points;  // n_s x 2 (z, t)
  Eigen::MatrixXd omega;   // n_draws x 4 n_s
  SoilProfile profile;
  EnvironmentModel env;
  double clamp_shrink = 1e-6;
  long clamp_events = 0;
  Eigen::MatrixXd base;  // n_draws x n_s residual part independent of theta
  Eigen::MatrixXd head;  // n_draws x n_s pressure head of the clamped state

  ResidualEnsemble(Eigen::MatrixXd points_in, Eigen::MatrixXd omega_in, SoilProfile profile_in,
                   EnvironmentModel env_in, double clamp_shrink_in)
      : points(std::move(points_in)), omega(std::move(omega_in)), profile(std::move(profile_in)),
        env(std::move(env_in)), clamp_shrink(clamp_shrink_in) {
    if (omega.cols() != 4 * points.rows())
      throw InvalidArgumentError("residual ensemble: state width != 4 x point count");
    const Eigen::Index n_s = n_points();
    base.resize(draws(), n_s);
    head.resize(draws(), n_s);
    const SinkParams theta_ref{1.0, 1.0};
    for (Eigen::Index i = 0; i < draws(); ++i)
      for (Eigen::Index j = 0; j < n_s; ++j) {
        const double z = points(j, 0), t = points(j, 1);
        const SoilLayerParams& soil = profile.at_z(z);
        StateDerivatives w{omega(i, j), omega(i, n_s + j), omega(i, 2 * n_s + j),
                           omega(i, 3 * n_s + j)};
        const double pad = clamp_shrink * (soil.c_s - soil.c_r);
        const double clamped = std::clamp(w.f, soil.c_r + pad, soil.c_s - pad);
        if (clamped != w.f) ++clamp_events;
        w.f = clamped;
        head(i, j) = head_from_water_content(w.f, soil);
        base(i, j) =
            richards_residual(z, t, w, theta_ref, soil, env) - sink(head(i, j), z, t, theta_ref, env);
      }
  }

  Eigen::Index draws() const { return omega.rows(); }
  Eigen::Index n_points() const { return points.rows(); }

  /// Uptake at point j per unit stress response: (1+beta) T_p / L_r
  /// (1 - d/L_r)^beta, zero below the root zone.
  double sink_multiplier(Eigen::Index j, const SinkParams& theta) const {
    const double t = points(j, 1);
    const double depth = std::abs(points(j, 0));
    const double l_r = theta.l_m * env.root_fraction(t);
    if (!(l_r > 0.0))
      throw DegenerateRootZoneError("sink: root zone depth " + num(l_r) + " not positive");
    if (depth > l_r) return 0.0;
    const double rel = 1.0 - depth / l_r;
    return (1.0 + theta.beta) * env.transpiration(t) / l_r * std::pow(rel, theta.beta);
  }

  Eigen::VectorXd residuals(Eigen::Index draw, const SinkParams& theta) const {
    Eigen::VectorXd xi(n_points());
    for (Eigen::Index j = 0; j < n_points(); ++j) {
      const double mult = sink_multiplier(j, theta);
      const FeddesParams stress = env.stress(points(j, 1));
      xi[j] = base(draw, j) + feddes_alpha(head(draw, j), stress) * mult;
    }
    return xi;
  }

  /// Fills xi (n_points x draws) with the residual vectors of every draw.
  void residual_matrix(const SinkParams& theta, Eigen::MatrixXd& xi) const {
    xi.resize(n_points(), draws());
    for (Eigen::Index j = 0; j < n_points(); ++j) {
      const double mult = sink_multiplier(j, theta);
      const FeddesParams stress = env.stress(points(j, 1));
      for (Eigen::Index i = 0; i < draws(); ++i)
        xi(j, i) = base(i, j) + feddes_alpha(head(i, j), stress) * mult;
    }
  }
};

inline ResidualEnsemble make_residual_ensemble(const Dataset& data, const GpHyperparams& hp,
                                               const Eigen::MatrixXd& points, int n_draws,
                                               const SoilProfile& profile, const EnvironmentModel& env,
                                               double clamp_shrink, Rng& rng) {
  const GaussianBlock joint = joint_state_derivative_distribution(data, hp, points);
  return ResidualEnsemble(points, sample_gaussian(joint, n_draws, rng), profile, env, clamp_shrink);
}

/// Sample covariance of the residual vectors at the anchor theta, with an
/// escalating diagonal ridge (1e-8 times the mean diagonal, tenfold per
/// retry, at most 1e-2) until the matrix factorizes. Throws
/// DegenerateCovarianceError past the cap.
struct ResidualCovariance {
  Eigen::MatrixXd sigma;
  Eigen::LLT<Eigen::MatrixXd> chol;
  double ridge = 0.0;
};

inline ResidualCovariance estimate_residual_covariance(const ResidualEnsemble& ens,
                                                       const SinkParams& theta_anchor) {
  const Eigen::Index n = ens.draws(), p = ens.n_points();
  if (n < 2) throw InvalidArgumentError("residual covariance: need at least 2 draws");
  Eigen::MatrixXd xi(n, p);
  for (Eigen::Index i = 0; i < n; ++i) xi.row(i) = ens.residuals(i, theta_anchor).transpose();
  const Eigen::RowVectorXd mu = xi.colwise().mean();
  xi.rowwise() -= mu;
  ResidualCovariance out;
  out.sigma = xi.transpose() * xi / static_cast<double>(n - 1);
  const double mean_diag = out.sigma.trace() / static_cast<double>(p);
  if (!(mean_diag > 0.0)) throw DegenerateCovarianceError("residual covariance: zero diagonal");
  // A factorization is usable only when every pivot stays clearly positive:
  // an exactly rank-deficient sample covariance (n_draws <= n_points) passes
  // Eigen's LLT with roundoff-sized pivots whose solves overflow.
  const auto usable = [mean_diag](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const double min_pivot = llt.matrixLLT().diagonal().minCoeff();
    return min_pivot > 0.0 && min_pivot * min_pivot > 1e-12 * mean_diag;
  };
  out.chol.compute(out.sigma);
  if (usable(out.chol)) return out;
  for (double rel = 1e-8; rel <= 1e-2 * (1.0 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd s = out.sigma;
    s.diagonal().array() += rel * mean_diag;
    out.chol.compute(s);
    if (usable(out.chol)) {
      out.sigma = s;
      out.ridge = rel * mean_diag;
      return out;
    }
  }
  throw DegenerateCovarianceError("residual covariance: indefinite past ridge 1e-2 x mean diagonal");
}

/// Collocation log posterior
///   log pi0(theta) + (1/tau) log sum_i exp(-1/2 xi_i^T Sigma^{-1} xi_i),
/// evaluated with a max shift. Returns -inf outside the prior support. The
/// value is invariant under permutations of the ensemble draws.
inline double log_approx_posterior(const Eigen::VectorXd& theta, const Prior& prior,
                                   const ResidualEnsemble& ens, const ResidualCovariance& cov,
                                   double temperature) {
  const double lp = prior.log_density(theta);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  const SinkParams sp{theta[0], theta[1]};
  thread_local Eigen::MatrixXd xi;
  ens.residual_matrix(sp, xi);
  cov.chol.matrixL().solveInPlace(xi);
  const Eigen::VectorXd q = -0.5 * xi.colwise().squaredNorm().transpose();
  return lp + log_sum_exp(q) / temperature;
}

}  // namespace gpcinfer
