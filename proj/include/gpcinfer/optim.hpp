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
#include <deque>
#include <functional>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>

namespace gpcinfer {

/// Objective with gradient: returns f(x) and fills grad (same size as x).
using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsOptions {
  int max_iter = 200;
  int memory = 8;
  double grad_tol = 1e-7;   // infinity norm
  double f_tol = 1e-12;     // relative decrease per iteration
  int max_backtracks = 40;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
  /// No descent step could be taken from the starting point.
  bool stuck_at_start = false;
};

/// Limited-memory BFGS minimizer with Armijo backtracking. Non-finite trial
/// values are treated as line-search rejections, so objectives may return
/// inf/nan near the boundary of their domain.
inline OptimResult lbfgs_minimize(const GradFn& fn, const Eigen::VectorXd& x0,
                                  const LbfgsOptions& opts = {}) {
  const auto n = x0.size();
  OptimResult res;
  res.x = x0;
  res.grad.resize(n);
  res.f = fn(res.x, res.grad);
  if (!std::isfinite(res.f)) throw InvalidArgumentError("lbfgs: objective non-finite at start");

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd g = res.grad;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    const auto k = static_cast<int>(s_hist.size());
    Eigen::VectorXd alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[i] * y_hist[static_cast<std::size_t>(i)];
    }
    if (k > 0) {
      const auto& sl = s_hist.back();
      const auto& yl = y_hist.back();
      q *= sl.dot(yl) / yl.squaredNorm();
    }
    for (int i = 0; i < k; ++i) {
      const double beta = rho_hist[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)].dot(q);
      q += (alpha[i] - beta) * s_hist[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // fall back to steepest descent
      dir = -g;
      slope = -g.squaredNorm();
    }

    // Armijo backtracking.
    double step = (k == 0) ? std::min(1.0, 1.0 / std::max(1e-12, g.lpNorm<Eigen::Infinity>())) : 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new(n), g_new(n);
    double f_new = 0.0;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      x_new = res.x + step * dir;
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (iter == 0 && s_hist.empty()) res.stuck_at_start = true;
      break;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = res.f - f_new;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    res.iterations = iter + 1;
    if (decrease < opts.f_tol * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      break;
    }
  }
  res.grad = g;
  if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) res.converged = true;
  return res;
}

/// Smooth bijection from R^n onto an axis-aligned box, used to run the
/// unconstrained minimizer on bound-constrained problems. Gradients are
/// mapped by the exact chain rule; saturation at a bound shows up as a
/// vanishing transformed gradient.
class BoxTransform {
 public:
  BoxTransform(Eigen::VectorXd lo, Eigen::VectorXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || ((hi_ - lo_).array() <= 0.0).any())
      throw InvalidArgumentError("box transform: need lo < hi per coordinate");
  }

  Eigen::VectorXd to_box(const Eigen::VectorXd& s) const {
    Eigen::VectorXd x(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      x[i] = lo_[i] + (hi_[i] - lo_[i]) * sigmoid(s[i]);
    return x;
  }

  Eigen::VectorXd from_box(const Eigen::VectorXd& x) const {
    Eigen::VectorXd s(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = std::clamp((x[i] - lo_[i]) / (hi_[i] - lo_[i]), 1e-12, 1.0 - 1e-12);
      s[i] = std::log(u / (1.0 - u));
    }
    return s;
  }

  /// d x_i / d s_i at the unconstrained point s.
  Eigen::VectorXd jacobian_diag(const Eigen::VectorXd& s) const {
    Eigen::VectorXd j(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double sig = sigmoid(s[i]);
      j[i] = (hi_[i] - lo_[i]) * sig * (1.0 - sig);
    }
    return j;
  }

 private:
  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
  Eigen::VectorXd lo_, hi_;
};

}  // namespace gpcinfer
