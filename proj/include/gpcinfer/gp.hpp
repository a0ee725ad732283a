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
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/config.hpp>
#include <gpcinfer/dataset.hpp>
#include <gpcinfer/gaussian.hpp>
#include <gpcinfer/kernel.hpp>
#include <gpcinfer/optim.hpp>
#include <gpcinfer/rng.hpp>
#include <gpcinfer/stats.hpp>

namespace gpcinfer {

/// Affine map taking each input dimension of the training data onto [0, 1].
/// All marginal-likelihood work happens in scaled units; derivative
/// covariances pick up chain-rule factors (1 / range)^order on the way back
/// to physical units.
struct InputScaler {
  Eigen::VectorXd lo;
  Eigen::VectorXd range;  // 1 where the data are constant in a dimension

  static InputScaler fit(const Eigen::MatrixXd& x) {
    InputScaler s;
    s.lo = x.colwise().minCoeff();
    s.range = x.colwise().maxCoeff() - x.colwise().minCoeff();
    for (Eigen::Index d = 0; d < s.range.size(); ++d)
      if (!(s.range[d] > 0.0)) s.range[d] = 1.0;
    return s;
  }

  Eigen::MatrixXd scale(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - lo.transpose()).array().rowwise() / range.transpose().array();
  }

  GpHyperparams to_scaled(const GpHyperparams& hp) const {
    GpHyperparams s = hp;
    s.length_scales = hp.length_scales.array() / range.array();
    return s;
  }

  GpHyperparams to_physical(const GpHyperparams& hp_scaled) const {
    GpHyperparams p = hp_scaled;
    p.length_scales = hp_scaled.length_scales.array() * range.array();
    return p;
  }
};

namespace detail {

/// Marginal-likelihood workspace: squared-distance matrices are fixed per
/// dataset, so repeated evaluations during optimization only pay for the
/// kernel exponential and the factorization.
class GpProblem {
 public:
  GpProblem(const Dataset& data, double mean_constant) : mean_constant_(mean_constant) {
    data.validate();
    scaler_ = InputScaler::fit(data.x);
    xs_ = scaler_.scale(data.x);
    r_ = data.y.array() - mean_constant;
    const Eigen::Index n = xs_.rows(), m = xs_.cols();
    d2_.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index d = 0; d < m; ++d) {
      Eigen::MatrixXd dm(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double u = xs_(i, d) - xs_(j, d);
          dm(i, j) = u * u;
        }
      d2_.push_back(std::move(dm));
    }
  }

  Eigen::Index n() const { return xs_.rows(); }
  Eigen::Index dims() const { return xs_.cols(); }
  const InputScaler& scaler() const { return scaler_; }

  Eigen::MatrixXd signal_kernel(const GpHyperparams& scaled) const {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n(), n());
    for (Eigen::Index d = 0; d < dims(); ++d) {
      const double l = scaled.length_scales[d];
      q += d2_[static_cast<std::size_t>(d)] / (l * l);
    }
    return scaled.signal_variance * (-0.5 * q.array()).exp().matrix();
  }

  /// Log marginal likelihood
  ///   -1/2 r^T K_y^{-1} r - 1/2 log|K_y| - n/2 log(2 pi),  r = y - mean.
  double lml(const GpHyperparams& scaled) const {
    Eigen::MatrixXd ky = signal_kernel(scaled);
    ky.diagonal().array() += scaled.noise_variance;
    const auto chol = jittered_llt(ky);
    const Eigen::VectorXd alpha = chol.llt.solve(r_);
    const double logdet = 2.0 * chol.llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * r_.dot(alpha) - 0.5 * logdet -
           0.5 * static_cast<double>(n()) * std::log(2.0 * std::numbers::pi);
  }

  /// Gradient of the log marginal likelihood with respect to
  /// zeta = (log l_1..m, log signal_variance, log noise_variance):
  ///   d lml / d zeta_h = 1/2 tr( (alpha alpha^T - K_y^{-1}) dK_y/d zeta_h ).
  double lml_with_gradient(const GpHyperparams& scaled, Eigen::VectorXd& grad) const {
    const Eigen::Index m = dims();
    const Eigen::MatrixXd ks = signal_kernel(scaled);
    Eigen::MatrixXd ky = ks;
    ky.diagonal().array() += scaled.noise_variance;
    const auto chol = jittered_llt(ky);
    const Eigen::VectorXd alpha = chol.llt.solve(r_);
    const Eigen::MatrixXd kinv = chol.llt.solve(Eigen::MatrixXd::Identity(n(), n()));
    const Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;

    grad.resize(m + 2);
    for (Eigen::Index d = 0; d < m; ++d) {
      const double l = scaled.length_scales[d];
      grad[d] = 0.5 * (a.array() * ks.array() * d2_[static_cast<std::size_t>(d)].array()).sum() / (l * l);
    }
    grad[m] = 0.5 * (a.array() * ks.array()).sum();
    grad[m + 1] = 0.5 * scaled.noise_variance * a.trace();

    const double logdet = 2.0 * chol.llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * r_.dot(alpha) - 0.5 * logdet -
           0.5 * static_cast<double>(n()) * std::log(2.0 * std::numbers::pi);
  }

 private:
  double mean_constant_;
  InputScaler scaler_;
  Eigen::MatrixXd xs_;
  Eigen::VectorXd r_;
  std::vector<Eigen::MatrixXd> d2_;
};

}  // namespace detail

inline double log_marginal_likelihood(const Dataset& data, const GpHyperparams& hp) {
  hp.validate(data.dims());
  const detail::GpProblem prob(data, hp.mean_constant);
  return prob.lml(prob.scaler().to_scaled(hp));
}

/// Gradient in the log-parameterization (log l_1..m, log sv, log nv). The
/// entries are invariant under the internal input scaling because d/d(log l)
/// does not see constant rescalings of l.
inline Eigen::VectorXd log_marginal_gradient(const Dataset& data, const GpHyperparams& hp) {
  hp.validate(data.dims());
  const detail::GpProblem prob(data, hp.mean_constant);
  Eigen::VectorXd grad;
  prob.lml_with_gradient(prob.scaler().to_scaled(hp), grad);
  return grad;
}

struct GpFitOptions {
  int restarts = 5;
  bool mean_from_sample = false;  // override init mean with mean(y)
  std::uint64_t seed = 0;
  LbfgsOptions lbfgs{.max_iter = 80, .memory = 8, .grad_tol = 1e-6};
};

struct GpFitResult {
  GpHyperparams hyperparams;
  double lml = 0.0;
  int starts = 0;
};

/// Carries the best hyperparameters seen before every start failed.
class OptimizationFailedError : public NumericalError {
 public:
  explicit OptimizationFailedError(const std::string& msg) : NumericalError(msg) {}
  OptimizationFailedError(const std::string& msg, GpHyperparams best, double best_lml)
      : NumericalError(msg), best_hyperparams(std::move(best)), best_lml(best_lml) {}
  GpHyperparams best_hyperparams;
  double best_lml = -std::numeric_limits<double>::infinity();
};

/// Maximizes the marginal likelihood over zeta with a quasi-Newton loop from
/// the given init plus `restarts` random starts: length scales log-uniform in
/// [1e-2, 1e2] times the (scaled) input range, variances log-uniform around
/// the response variance. Returns the best start; never below the init value.
inline GpFitResult fit_hyperparameters(const Dataset& data, const GpHyperparams& init,
                                       const GpFitOptions& opts = {}) {
  init.validate(data.dims());
  const double mean_c = opts.mean_from_sample ? data.y.mean() : init.mean_constant;
  const detail::GpProblem prob(data, mean_c);
  const Eigen::Index m = data.dims();
  const double var_y = std::max(sample_variance(Eigen::VectorXd(data.y.array() - mean_c)), 1e-12);

  GradFn objective = [&](const Eigen::VectorXd& zeta, Eigen::VectorXd& grad) {
    if (zeta.lpNorm<Eigen::Infinity>() > 40.0) {
      grad = Eigen::VectorXd::Zero(zeta.size());
      return std::numeric_limits<double>::infinity();
    }
    const GpHyperparams hp = GpHyperparams::from_zeta(zeta, mean_c);
    Eigen::VectorXd g;
    const double value = prob.lml_with_gradient(hp, g);
    grad = -g;
    return -value;
  };

  GpHyperparams init_scaled = prob.scaler().to_scaled(init);
  init_scaled.mean_constant = mean_c;
  init_scaled.noise_variance = std::max(init_scaled.noise_variance, 1e-12);

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(init_scaled.to_zeta());
  Rng rng(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    GpHyperparams h;
    h.length_scales.resize(m);
    for (Eigen::Index d = 0; d < m; ++d) h.length_scales[d] = rng.log_uniform(1e-2, 1e2);
    h.signal_variance = rng.log_uniform(0.1, 10.0) * var_y;
    h.noise_variance = rng.log_uniform(1e-4, 1.0) * var_y;
    h.mean_constant = mean_c;
    starts.push_back(h.to_zeta());
  }

  bool any_progress = false;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_zeta;
  for (const auto& z0 : starts) {
    OptimResult r;
    try {
      r = lbfgs_minimize(objective, z0, opts.lbfgs);
    } catch (const NumericalError&) {
      continue;  // factorization failed even with jitter at this start
    }
    if (!r.stuck_at_start || r.converged) any_progress = true;
    if (-r.f > best) {
      best = -r.f;
      best_zeta = r.x;
    }
  }
  if (best_zeta.size() == 0)
    throw OptimizationFailedError("gp fit: every start failed", init, log_marginal_likelihood(data, init));
  GpFitResult out;
  out.hyperparams = prob.scaler().to_physical(GpHyperparams::from_zeta(best_zeta, mean_c));
  out.lml = best;
  out.starts = static_cast<int>(starts.size());
  if (!any_progress)
    throw OptimizationFailedError("gp fit: line search failed at every start", out.hyperparams, out.lml);
  return out;
}

namespace detail {

struct TagInfo {
  Deriv tag;
  int order;
  int dim;
};

inline const std::vector<TagInfo>& richards_tags() {
  static const std::vector<TagInfo> tags = {
      {Deriv::value, 0, 0}, {Deriv::dz, 1, 0}, {Deriv::dt, 1, 1}, {Deriv::dzz, 2, 0}};
  return tags;
}

/// Chain-rule factor converting a scaled-input derivative covariance back to
/// physical units: (1 / range_dim)^order.
inline double physical_factor(const TagInfo& t, const InputScaler& s) {
  if (t.order == 0) return 1.0;
  return std::pow(1.0 / s.range[t.dim], t.order);
}

}  // namespace detail

/// Posterior of the field values at the rows of x_star. Labels are (j, value).
inline GaussianBlock predictive_distribution(const Dataset& data, const GpHyperparams& hp,
                                             const Eigen::MatrixXd& x_star) {
  data.validate();
  hp.validate(data.dims());
  if (x_star.cols() != data.dims()) throw InvalidArgumentError("predict: input dimension mismatch");
  const InputScaler scaler = InputScaler::fit(data.x);
  const GpHyperparams sc = scaler.to_scaled(hp);
  const Eigen::MatrixXd xs = scaler.scale(data.x);
  const Eigen::MatrixXd xq = scaler.scale(x_star);

  Eigen::MatrixXd ky = kernel_matrix(xs, xs, sc);
  ky.diagonal().array() += sc.noise_variance;
  const auto chol = jittered_llt(ky);
  const Eigen::VectorXd r = data.y.array() - hp.mean_constant;
  const Eigen::MatrixXd kxq = kernel_matrix(xs, xq, sc);

  GaussianBlock out;
  out.mean = Eigen::VectorXd::Constant(xq.rows(), hp.mean_constant) + kxq.transpose() * chol.llt.solve(r);
  out.cov = kernel_matrix(xq, xq, sc) - kxq.transpose() * chol.llt.solve(kxq);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.labels.reserve(static_cast<std::size_t>(xq.rows()));
  for (Eigen::Index j = 0; j < xq.rows(); ++j)
    out.labels.push_back({static_cast<int>(j), Deriv::value});
  return out;
}

/// Joint posterior of (f, df/dz, df/dt, d2f/dz2) at the rows of x_sel, in
/// that block order: entry b * n_sel + j refers to block b at point j.
/// Inputs must be (z, t) pairs. Means and covariances are in physical units.
inline GaussianBlock joint_state_derivative_distribution(const Dataset& data, const GpHyperparams& hp,
                                                         const Eigen::MatrixXd& x_sel) {
  data.validate();
  hp.validate(data.dims());
  if (data.dims() != 2) throw InvalidArgumentError("joint distribution: inputs must be (z, t)");
  if (x_sel.cols() != 2) throw InvalidArgumentError("joint distribution: selected points must be (z, t)");
  if (x_sel.rows() == 0) throw InvalidArgumentError("joint distribution: empty point set");

  const InputScaler scaler = InputScaler::fit(data.x);
  const GpHyperparams sc = scaler.to_scaled(hp);
  const Eigen::MatrixXd xs = scaler.scale(data.x);
  const Eigen::MatrixXd xq = scaler.scale(x_sel);
  const auto& tags = detail::richards_tags();
  const Eigen::Index ns = xq.rows();
  const Eigen::Index total = ns * static_cast<Eigen::Index>(tags.size());

  Eigen::MatrixXd ky = kernel_matrix(xs, xs, sc);
  ky.diagonal().array() += sc.noise_variance;
  const auto chol = jittered_llt(ky);
  const Eigen::VectorXd r = data.y.array() - hp.mean_constant;

  // Cross covariances between the data (no derivative) and each block.
  Eigen::MatrixXd c1(data.size(), total);
  for (std::size_t b = 0; b < tags.size(); ++b) {
    const auto& tb = tags[b];
    const DerivativeOrderSpec spec{0, 0, tb.order, tb.dim};
    c1.middleCols(static_cast<Eigen::Index>(b) * ns, ns) =
        kernel_derivative_block(xs, xq, sc, spec) * detail::physical_factor(tb, scaler);
  }

  // Prior covariance among the blocks.
  Eigen::MatrixXd c2(total, total);
  for (std::size_t a = 0; a < tags.size(); ++a)
    for (std::size_t b = 0; b < tags.size(); ++b) {
      const auto& ta = tags[a];
      const auto& tb = tags[b];
      const DerivativeOrderSpec spec{ta.order, ta.dim, tb.order, tb.dim};
      c2.block(static_cast<Eigen::Index>(a) * ns, static_cast<Eigen::Index>(b) * ns, ns, ns) =
          kernel_derivative_block(xq, xq, sc, spec) *
          (detail::physical_factor(ta, scaler) * detail::physical_factor(tb, scaler));
    }

  GaussianBlock out;
  out.mean = c1.transpose() * chol.llt.solve(r);
  out.mean.head(ns).array() += hp.mean_constant;  // derivative blocks have zero prior mean
  out.cov = c2 - c1.transpose() * chol.llt.solve(c1);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.labels.reserve(static_cast<std::size_t>(total));
  for (std::size_t b = 0; b < tags.size(); ++b)
    for (Eigen::Index j = 0; j < ns; ++j) out.labels.push_back({static_cast<int>(j), tags[b].tag});
  return out;
}

/// Posterior means of (f, df/dz, df/dt, d2f/dz2) at the rows of x_query,
/// one row per point, in physical units.
inline Eigen::MatrixXd state_derivative_means(const Dataset& data, const GpHyperparams& hp,
                                              const Eigen::MatrixXd& x_query) {
  data.validate();
  hp.validate(data.dims());
  if (data.dims() != 2 || x_query.cols() != 2)
    throw InvalidArgumentError("state derivative means: inputs must be (z, t)");
  const InputScaler scaler = InputScaler::fit(data.x);
  const GpHyperparams sc = scaler.to_scaled(hp);
  const Eigen::MatrixXd xs = scaler.scale(data.x);
  const Eigen::MatrixXd xq = scaler.scale(x_query);

  Eigen::MatrixXd ky = kernel_matrix(xs, xs, sc);
  ky.diagonal().array() += sc.noise_variance;
  const auto chol = jittered_llt(ky);
  const Eigen::VectorXd alpha = chol.llt.solve(Eigen::VectorXd(data.y.array() - hp.mean_constant));

  const auto& tags = detail::richards_tags();
  Eigen::MatrixXd out(xq.rows(), static_cast<Eigen::Index>(tags.size()));
  for (std::size_t b = 0; b < tags.size(); ++b) {
    const auto& tb = tags[b];
    const DerivativeOrderSpec spec{0, 0, tb.order, tb.dim};
    out.col(static_cast<Eigen::Index>(b)) =
        (kernel_derivative_block(xs, xq, sc, spec) * detail::physical_factor(tb, scaler)).transpose() * alpha;
  }
  out.col(0).array() += hp.mean_constant;
  return out;
}

inline void save_hyperparams(const std::filesystem::path& path, const GpHyperparams& hp) {
  std::ofstream out(path);
  if (!out) throw ConfigError("hyperparams: cannot write " + path.string());
  char buf[64];
  const auto emit = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  if (hp.length_scales.size() != 2)
    throw InvalidArgumentError("hyperparams file: expects the (z, t) parameterization");
  emit("length_scale_z", hp.length_scales[0]);
  emit("length_scale_t", hp.length_scales[1]);
  emit("signal_variance", hp.signal_variance);
  emit("noise_variance", hp.noise_variance);
  emit("mean_constant", hp.mean_constant);
}

inline GpHyperparams load_hyperparams(const std::filesystem::path& path) {
  const Config cfg = Config::parse_file(path);
  GpHyperparams hp;
  hp.length_scales.resize(2);
  hp.length_scales[0] = cfg.get_double("length_scale_z", -1.0);
  hp.length_scales[1] = cfg.get_double("length_scale_t", -1.0);
  hp.signal_variance = cfg.get_double("signal_variance", -1.0);
  hp.noise_variance = cfg.get_double("noise_variance", -1.0);
  hp.mean_constant = cfg.get_double("mean_constant", 0.0);
  cfg.finalize();
  hp.validate(2);
  return hp;
}

}  // namespace gpcinfer
