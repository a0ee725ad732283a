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
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>

namespace gpcinfer {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// log(sum_i exp(v_i)) with the usual max shift. Returns -inf for an empty
/// input or when every term is -inf.
inline double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

/// Linear-interpolation quantile (the common "type 7" rule): for order
/// statistics x_(1..n), q = x_(floor(g)+1) interpolated with fraction g-floor(g),
/// g = (n-1) p.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidArgumentError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgumentError("quantile: p outside [0,1]");
  std::sort(v.begin(), v.end());
  const double g = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(g));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = g - std::floor(g);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw InvalidArgumentError("mean: empty sample");
  return v.mean();
}

/// Unbiased sample variance (n-1 denominator); zero for n == 1.
inline double sample_variance(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw InvalidArgumentError("sample_variance: empty sample");
  if (n == 1) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

/// Weighted mean with weights that sum to one.
inline double weighted_mean(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  if (v.size() != w.size() || v.size() == 0) throw InvalidArgumentError("weighted_mean: size mismatch");
  return (v.array() * w.array()).sum();
}

/// Weighted variance about the weighted mean (no small-sample correction).
inline double weighted_variance(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  const double m = weighted_mean(v, w);
  return (w.array() * (v.array() - m).square()).sum();
}

/// Kish effective sample size 1 / sum(w_i^2) for normalized weights.
inline double effective_sample_size(const Eigen::VectorXd& w) {
  const double s2 = w.squaredNorm();
  if (!(s2 > 0.0)) throw InvalidArgumentError("effective_sample_size: all-zero weights");
  return 1.0 / s2;
}

/// i-th element (1-based) of the van der Corput sequence in the given base.
inline double van_der_corput(std::uint64_t i, std::uint64_t base) {
  double q = 0.0;
  double bk = 1.0 / static_cast<double>(base);
  while (i > 0) {
    q += static_cast<double>(i % base) * bk;
    i /= base;
    bk /= static_cast<double>(base);
  }
  return q;
}

}  // namespace gpcinfer
