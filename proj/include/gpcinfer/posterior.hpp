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

#include <atomic>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/dataset.hpp>
#include <gpcinfer/prior.hpp>
#include <gpcinfer/solver.hpp>

namespace gpcinfer {

/// Marginalized-noise likelihood settings: an inverse-gamma(alpha, eta) prior
/// on the observation variance is integrated out analytically, leaving
///   log pi(theta | y) = log pi0(theta) - (alpha + n/2) log( RSS/2 + eta ).
struct TruePosteriorConfig {
  double alpha = 1.0;
  double eta = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !(eta > 0.0)) throw InvalidArgumentError("posterior: alpha, eta must be > 0");
  }
};

/// Exact posterior backed by the flow solver: every density evaluation runs
/// one forward simulation at theta and interpolates the stored field at the
/// observation points. Invocations are counted so budgets can be audited.
class TruePosterior {
 public:
  TruePosterior(Dataset data, Prior prior, Grid grid, SoilProfile profile, EnvironmentModel env,
                BoundaryConditions bc, SolverOptions solver, TruePosteriorConfig cfg = {})
      : data_(std::move(data)),
        prior_(std::move(prior)),
        grid_(grid),
        profile_(std::move(profile)),
        env_(std::move(env)),
        bc_(std::move(bc)),
        solver_(solver),
        cfg_(cfg) {
    data_.validate();
    prior_.validate();
    cfg_.validate();
    if (data_.dims() != 2) throw InvalidArgumentError("posterior: data inputs must be (z, t)");
  }

  long solver_calls() const { return calls_.load(); }
  const Prior& prior() const { return prior_; }
  const Dataset& data() const { return data_; }

  /// Residual sum of squares at theta. Counts one solver invocation; lets
  /// SolverDivergedError propagate to the caller.
  double rss(const Eigen::VectorXd& theta) const {
    if (theta.size() != 2) throw InvalidArgumentError("posterior: theta must be (beta, L_m)");
    calls_.fetch_add(1);
    const SinkParams sp{theta[0], theta[1]};
    const SolutionField field = solve_richards(grid_, profile_, sp, env_, bc_, solver_);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < data_.size(); ++i) {
      const double r = data_.y[i] - field.content_at(data_.x(i, 0), data_.x(i, 1));
      ss += r * r;
    }
    return ss;
  }

  /// Unnormalized log posterior; -inf outside the prior support (without
  /// spending a solver call).
  double log_density(const Eigen::VectorXd& theta) const {
    const double lp = prior_.log_density(theta);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    const double ss = rss(theta);
    const double n = static_cast<double>(data_.size());
    return lp - (cfg_.alpha + 0.5 * n) * std::log(0.5 * ss + cfg_.eta);
  }

 private:
  Dataset data_;
  Prior prior_;
  Grid grid_;
  SoilProfile profile_;
  EnvironmentModel env_;
  BoundaryConditions bc_;
  SolverOptions solver_;
  TruePosteriorConfig cfg_;
  mutable std::atomic<long> calls_{0};
};

}  // namespace gpcinfer
