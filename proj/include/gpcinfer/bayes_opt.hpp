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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>
#include <gpcinfer/gaussian.hpp>
#include <gpcinfer/gp.hpp>
#include <gpcinfer/kernel.hpp>
#include <gpcinfer/prior.hpp>
#include <gpcinfer/rng.hpp>
#include <gpcinfer/stats.hpp>

namespace gpcinfer {

/// Thrown when a min-max scaler cannot be built because every probe value is
/// identical (or the extremes are not finite).
class DegenerateScalingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Min-max normalization of density values onto [0,1], built from log-density
/// probes and evaluated in log space so that very small densities do not
/// underflow before the affine map is applied. Values outside the probe range
/// clip to 0 or 1. The scaler is frozen once built.
class PriorScaler {
 public:
  PriorScaler(double log_min, double log_max) : lo_(log_min), hi_(log_max) {
    if (!std::isfinite(hi_) || !(hi_ > lo_))
      throw DegenerateScalingError("prior scaler: probe extremes must satisfy max > min with a finite max");
  }

  /// Maps a log density to the scaled density (d - d_min) / (d_max - d_min),
  /// clipped into [0,1].
  double operator()(double log_density) const {
    if (log_density >= hi_) return 1.0;
    if (log_density <= lo_) return 0.0;
    const double floor_term = std::exp(lo_ - hi_);
    const double value = (std::exp(log_density - hi_) - floor_term) / (1.0 - floor_term);
    return std::clamp(value, 0.0, 1.0);
  }

  double log_min() const { return lo_; }
  double log_max() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Builds the scaler from log-density values at a probe set (typically the
/// retained states of a posterior exploration chain).
inline PriorScaler normalize_prior(const Eigen::VectorXd& log_values) {
  if (log_values.size() < 2) throw InvalidArgumentError("prior scaler: need at least two probe values");
  return PriorScaler(log_values.minCoeff(), log_values.maxCoeff());
}

/// Deterministic-objective surrogate: a GP over parameter space fit to the
/// evaluated (theta, u) pairs, queried pointwise for its predictive mean and
/// standard deviation.
class Surrogate {
 public:
  Surrogate(Eigen::MatrixXd thetas, Eigen::VectorXd u, GpHyperparams hyperparams)
      : thetas_(std::move(thetas)), u_(std::move(u)), hp_(std::move(hyperparams)) {
    if (thetas_.rows() != u_.size() || thetas_.rows() < 1)
      throw InvalidArgumentError("surrogate: design size mismatch");
    hp_.validate(static_cast<int>(thetas_.cols()));
    Eigen::MatrixXd k = kernel_matrix(thetas_, thetas_, hp_);
    k.diagonal().array() += hp_.noise_variance;
    chol_ = jittered_llt(k);
    alpha_ = chol_.llt.solve((u_.array() - hp_.mean_constant).matrix());
  }

  /// Predictive mean and standard deviation of the latent objective at theta.
  void predict(const Eigen::VectorXd& theta, double& mean, double& sd) const {
    Eigen::VectorXd ks(thetas_.rows());
    for (Eigen::Index i = 0; i < thetas_.rows(); ++i)
      ks[i] = kernel_eval(thetas_.row(i).transpose(), theta, hp_);
    mean = hp_.mean_constant + ks.dot(alpha_);
    const double var = hp_.signal_variance - ks.dot(chol_.llt.solve(ks));
    sd = std::sqrt(std::max(var, 0.0));
  }

  const Eigen::MatrixXd& thetas() const { return thetas_; }
  const Eigen::VectorXd& u() const { return u_; }
  const GpHyperparams& hyperparams() const { return hp_; }

 private:
  Eigen::MatrixXd thetas_;
  Eigen::VectorXd u_;
  GpHyperparams hp_;
  JitteredCholesky chol_;
  Eigen::VectorXd alpha_;
};

/// Refits the surrogate hyperparameters by marginal likelihood. The objective
/// is deterministic, so the fitted noise variance is clamped up to
/// `noise_floor` only to keep the kernel matrix well conditioned.
inline Surrogate fit_surrogate(const Eigen::MatrixXd& thetas, const Eigen::VectorXd& u,
                               int restarts, double noise_floor, std::uint64_t seed) {
  const auto m = thetas.cols();
  GpHyperparams init;
  init.length_scales.resize(m);
  for (Eigen::Index d = 0; d < m; ++d) {
    const double spread = thetas.col(d).maxCoeff() - thetas.col(d).minCoeff();
    init.length_scales[d] = spread > 0.0 ? 0.5 * spread : 1.0;
  }
  const double var_u = sample_variance(u);
  init.signal_variance = var_u > 0.0 ? var_u : 1.0;
  init.noise_variance = std::max(noise_floor, 1e-6 * init.signal_variance);
  GpFitOptions opts;
  opts.restarts = restarts;
  opts.mean_from_sample = true;
  opts.seed = seed;
  GpHyperparams hp = init;
  hp.mean_constant = u.mean();
  try {
    hp = fit_hyperparameters(Dataset{thetas, u}, init, opts).hyperparams;
  } catch (const OptimizationFailedError&) {
    // Fall back to the heuristic init; a usable surrogate beats a hard stop.
  }
  hp.noise_variance = std::max(hp.noise_variance, noise_floor);
  return Surrogate(thetas, u, hp);
}

/// Closed-form expected improvement for minimization. With zero predictive
/// spread this degenerates to max(u_min - mean, 0).
inline double expected_improvement(const Eigen::VectorXd& theta, const Surrogate& surrogate,
                                   double u_min) {
  double mean = 0.0, sd = 0.0;
  surrogate.predict(theta, mean, sd);
  const double gap = u_min - mean;
  if (sd <= 0.0) return std::max(gap, 0.0);
  const double d = gap / sd;
  return gap * normal_cdf(d) + sd * normal_pdf(d);
}

/// Probability that the objective at theta lies below the threshold f_delta
/// under the surrogate predictive. With zero spread this is the indicator
/// mean < f_delta.
inline double probability_of_improvement(const Eigen::VectorXd& theta, const Surrogate& surrogate,
                                         double f_delta) {
  double mean = 0.0, sd = 0.0;
  surrogate.predict(theta, mean, sd);
  if (sd <= 0.0) return mean < f_delta ? 1.0 : 0.0;
  return normal_cdf((f_delta - mean) / sd);
}

/// Log of the prior-guided acquisition ratio
///   (1-p) (1-M)^(t/tau) / (p M^(t/tau)),
/// where p is the scaled prior density and M the model probability of
/// improvement, both clipped into [eps, 1-eps]. Minimizing the ratio trades
/// off prior mass against model-predicted improvement, with the prior
/// dominating early (small t) and the model taking over as t grows.
inline double bopro_log_ratio(double scaled_prior, double model_prob, double t, double tau,
                              double eps = 1e-6) {
  if (!(tau > 0.0)) throw InvalidArgumentError("bopro: tau must be positive");
  const double p = std::clamp(scaled_prior, eps, 1.0 - eps);
  const double m = std::clamp(model_prob, eps, 1.0 - eps);
  return std::log1p(-p) - std::log(p) + (t / tau) * (std::log1p(-m) - std::log(m));
}

/// The acquisition ratio itself (exp of the log form above).
inline double bopro_acquisition(double scaled_prior, double model_prob, double t, double tau,
                                double eps = 1e-6) {
  return std::exp(bopro_log_ratio(scaled_prior, model_prob, t, tau, eps));
}

enum class BoMode { plain, prior_guided };

/// Settings for a Bayesian-optimization run. `iterations` is the number of
/// acquisition steps after the `n0` random initial evaluations, so the total
/// objective budget is exactly n0 + iterations.
struct BoproConfig {
  double delta = 0.05;  // improvement quantile for the model probability
  double tau = 3.0;     // prior-decay constant
  int n0 = 5;
  int iterations = 10;
  std::optional<PriorScaler> prior_scaler;  // required in prior_guided mode
  double epsilon = 1e-6;                    // clip for prior/model probabilities
  double failure_penalty = 10.0;            // failed evaluations score worst + penalty
  int candidate_count = 10000;
  int polish_rounds = 3;
  int polish_samples = 100;
  double surrogate_noise_floor = 1e-6;
  int surrogate_restarts = 3;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgumentError("bayes-opt: delta must lie in (0,1)");
    if (!(tau > 0.0)) throw InvalidArgumentError("bayes-opt: tau must be positive");
    if (n0 < 1 || iterations < 0) throw InvalidArgumentError("bayes-opt: need n0 >= 1 and iterations >= 0");
    if (candidate_count < 1) throw InvalidArgumentError("bayes-opt: need at least one candidate");
    if (polish_rounds < 0 || polish_samples < 0) throw InvalidArgumentError("bayes-opt: negative polish settings");
    if (!(failure_penalty > 0.0)) throw InvalidArgumentError("bayes-opt: failure penalty must be positive");
  }
};

struct BoTraceRow {
  int t = 0;  // sequential objective-call index, 0-based
  Eigen::VectorXd theta;
  double u = 0.0;  // raw objective value; NaN when the evaluation failed
  std::string mode;  // "init" or "bo"
};

struct BoResult {
  Eigen::VectorXd best_theta;
  double best_u = 0.0;
  std::vector<BoTraceRow> trace;
  long objective_calls = 0;
  long failed_calls = 0;
};

namespace detail {

/// Quasi-random candidate set over the box: van der Corput sequences in bases
/// 2 and 3 (and onward for higher dimensions) with a random rotation modulo 1.
inline Eigen::MatrixXd halton_candidates(int count, const Eigen::VectorXd& lower,
                                         const Eigen::VectorXd& upper, Rng& rng) {
  static constexpr int kBases[] = {2, 3, 5, 7, 11, 13};
  const auto m = lower.size();
  if (m > static_cast<Eigen::Index>(std::size(kBases)))
    throw InvalidArgumentError("bayes-opt: candidate generator supports at most 6 dimensions");
  Eigen::VectorXd rot(m);
  for (Eigen::Index d = 0; d < m; ++d) rot[d] = rng.uniform();
  Eigen::MatrixXd c(count, m);
  for (int i = 0; i < count; ++i)
    for (Eigen::Index d = 0; d < m; ++d) {
      double v = van_der_corput(i + 1, kBases[d]) + rot[d];
      v -= std::floor(v);
      c(i, d) = lower[d] + v * (upper[d] - lower[d]);
    }
  return c;
}

}  // namespace detail

/// Runs Bayesian optimization of a (possibly failing) objective over the
/// prior box. Plain mode maximizes expected improvement; prior-guided mode
/// minimizes the acquisition ratio combining the scaled prior with the model
/// probability of improvement. The acquisition is optimized over a
/// quasi-random candidate set followed by a shrinking Gaussian polish around
/// the best candidate. Returns the best successfully evaluated point; throws
/// OptimizationFailedError if every evaluation failed.
///
/// `objective` maps theta to u (lower is better); it signals failure by
/// throwing a gpcinfer::Error or returning a non-finite value. In
/// prior_guided mode `log_prior_density` supplies the unscaled log prior
/// density that cfg.prior_scaler maps onto [0,1].
inline BoResult run_bo(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const Prior& box, const BoproConfig& cfg, BoMode mode,
                       const std::function<double(const Eigen::VectorXd&)>& log_prior_density,
                       Rng rng) {
  cfg.validate();
  if (mode == BoMode::prior_guided) {
    if (!cfg.prior_scaler) throw InvalidArgumentError("bayes-opt: prior_guided mode needs a prior scaler");
    if (!log_prior_density) throw InvalidArgumentError("bayes-opt: prior_guided mode needs a prior density");
  }
  const auto m = static_cast<Eigen::Index>(box.dims());
  const Eigen::VectorXd lower = box.lower();
  const Eigen::VectorXd upper = box.upper();
  const Eigen::VectorXd widths = box.widths();

  BoResult result;
  const int total = cfg.n0 + cfg.iterations;
  Eigen::MatrixXd thetas(total, m);
  std::vector<std::optional<double>> raw(static_cast<std::size_t>(total));
  int evaluated = 0;

  const auto evaluate = [&](const Eigen::VectorXd& theta, const std::string& tag) {
    double u = std::numeric_limits<double>::quiet_NaN();
    bool ok = true;
    try {
      u = objective(theta);
      ok = std::isfinite(u);
    } catch (const Error&) {
      ok = false;
    }
    thetas.row(evaluated) = theta.transpose();
    raw[static_cast<std::size_t>(evaluated)] = ok ? std::optional<double>(u) : std::nullopt;
    result.trace.push_back({evaluated, theta, ok ? u : std::numeric_limits<double>::quiet_NaN(), tag});
    ++result.objective_calls;
    if (!ok) ++result.failed_calls;
    ++evaluated;
  };

  // Sentinel-filled objective values for the surrogate: failures sit just
  // above the current worst success so the search is repelled but finite.
  const auto filled_values = [&]() {
    double worst = 0.0;
    bool any = false;
    for (int i = 0; i < evaluated; ++i)
      if (raw[static_cast<std::size_t>(i)]) {
        worst = any ? std::max(worst, *raw[static_cast<std::size_t>(i)]) : *raw[static_cast<std::size_t>(i)];
        any = true;
      }
    Eigen::VectorXd u(evaluated);
    for (int i = 0; i < evaluated; ++i)
      u[i] = raw[static_cast<std::size_t>(i)] ? *raw[static_cast<std::size_t>(i)]
                                              : worst + cfg.failure_penalty;
    return u;
  };

  Rng init_rng = rng.fork(1);
  for (int i = 0; i < cfg.n0; ++i) evaluate(box.sample(init_rng), "init");

  for (int t = 0; t < cfg.iterations; ++t) {
    const Eigen::VectorXd u = filled_values();
    const Surrogate surrogate =
        fit_surrogate(thetas.topRows(evaluated), u, cfg.surrogate_restarts,
                      cfg.surrogate_noise_floor, rng.fork(100 + static_cast<std::uint64_t>(t)).seed());

    std::vector<double> uv(u.data(), u.data() + u.size());
    const double u_min = u.minCoeff();
    const double f_delta = quantile(uv, cfg.delta);

    // Higher score is better in both modes.
    const auto score = [&](const Eigen::VectorXd& theta) {
      if (mode == BoMode::plain) return expected_improvement(theta, surrogate, u_min);
      const double p = (*cfg.prior_scaler)(log_prior_density(theta));
      const double mprob = probability_of_improvement(theta, surrogate, f_delta);
      return -bopro_log_ratio(p, mprob, static_cast<double>(t), cfg.tau, cfg.epsilon);
    };

    Rng cand_rng = rng.fork(200 + static_cast<std::uint64_t>(t));
    const Eigen::MatrixXd candidates =
        detail::halton_candidates(cfg.candidate_count, lower, upper, cand_rng);
    Eigen::VectorXd best = candidates.row(0).transpose();
    double best_score = score(best);
    for (Eigen::Index i = 1; i < candidates.rows(); ++i) {
      const Eigen::VectorXd theta = candidates.row(i).transpose();
      const double s = score(theta);
      if (s > best_score) {
        best_score = s;
        best = theta;
      }
    }
    for (int round = 0; round < cfg.polish_rounds; ++round) {
      const double scale = 0.05 / static_cast<double>(1 << round);
      for (int k = 0; k < cfg.polish_samples; ++k) {
        Eigen::VectorXd theta(m);
        for (Eigen::Index d = 0; d < m; ++d)
          theta[d] = std::clamp(best[d] + scale * widths[d] * cand_rng.normal(), lower[d], upper[d]);
        const double s = score(theta);
        if (s > best_score) {
          best_score = s;
          best = theta;
        }
      }
    }
    evaluate(best, "bo");
  }

  int best_idx = -1;
  for (int i = 0; i < evaluated; ++i)
    if (raw[static_cast<std::size_t>(i)] &&
        (best_idx < 0 || *raw[static_cast<std::size_t>(i)] < *raw[static_cast<std::size_t>(best_idx)]))
      best_idx = i;
  if (best_idx < 0) throw OptimizationFailedError("bayes-opt: every objective evaluation failed");
  result.best_theta = thetas.row(best_idx).transpose();
  result.best_u = *raw[static_cast<std::size_t>(best_idx)];
  return result;
}

/// Writes the evaluation trace of a two-parameter run.
inline void write_bo_trace(const std::filesystem::path& path, const std::vector<BoTraceRow>& trace) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(trace.size());
  for (const auto& row : trace) {
    if (row.theta.size() != 2) throw InvalidArgumentError("bo trace: expected two parameters per row");
    rows.push_back({std::to_string(row.t), num(row.theta[0]), num(row.theta[1]), num(row.u), row.mode});
  }
  write_csv(path, {"t", "beta", "L_m", "u", "mode"}, rows);
}

}  // namespace gpcinfer
