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
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/stats.hpp>

namespace gpcinfer {

class NoValidSamplesError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvalidBandwidthError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Self-normalized importance weights w_i proportional to
/// exp(log_true_i - log_approx_i), computed with a max shift. Entries where
/// either log density is non-finite (failed exact evaluations, zero-density
/// proposals) get weight zero. Throws NoValidSamplesError when nothing
/// survives. The result sums to one and is permutation-equivariant.
inline Eigen::VectorXd importance_weights(const Eigen::VectorXd& log_true,
                                          const Eigen::VectorXd& log_approx) {
  if (log_true.size() != log_approx.size() || log_true.size() == 0)
    throw InvalidArgumentError("importance weights: size mismatch");
  const Eigen::Index n = log_true.size();
  Eigen::VectorXd log_w(n);
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool ok = std::isfinite(log_true[i]) && std::isfinite(log_approx[i]);
    log_w[i] = ok ? log_true[i] - log_approx[i] : -std::numeric_limits<double>::infinity();
    if (log_w[i] > shift) shift = log_w[i];
  }
  if (!std::isfinite(shift)) throw NoValidSamplesError("importance weights: no valid samples");
  Eigen::VectorXd w(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - shift) : 0.0;
    total += w[i];
  }
  return w / total;
}

/// Weighted posterior mean over the sampled parameter rows.
inline Eigen::VectorXd is_estimate(const Eigen::MatrixXd& thetas, const Eigen::VectorXd& weights) {
  if (thetas.rows() != weights.size() || thetas.rows() == 0)
    throw InvalidArgumentError("is estimate: size mismatch");
  return thetas.transpose() * weights;
}

/// Weighted Gaussian kernel density over parameter samples. The default
/// bandwidth follows the weighted Scott rule
///   H^(1/2) = diag(sigma_w,k) * n_eff^(-1/6),  n_eff = 1 / sum w_i^2,
/// using the weighted standard deviation per coordinate.
class WeightedKde {
 public:
  WeightedKde(Eigen::MatrixXd points, Eigen::VectorXd weights, Eigen::VectorXd bandwidth_sd)
      : points_(std::move(points)), weights_(std::move(weights)), sd_(std::move(bandwidth_sd)) {
    if (points_.rows() != weights_.size() || points_.rows() == 0)
      throw InvalidArgumentError("kde: size mismatch");
    if (sd_.size() != points_.cols()) throw InvalidArgumentError("kde: bandwidth dimension mismatch");
    if ((sd_.array() <= 0.0).any() || !sd_.allFinite())
      throw InvalidBandwidthError("kde: bandwidth must be positive and finite per coordinate");
    const double wsum = weights_.sum();
    if (!(wsum > 0.0)) throw InvalidArgumentError("kde: weights must sum to a positive value");
    weights_ /= wsum;
    log_norm_ = -0.5 * static_cast<double>(sd_.size()) * std::log(2.0 * std::numbers::pi) -
                sd_.array().log().sum();
  }

  static WeightedKde with_scott_bandwidth(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights) {
    if (points.rows() != weights.size() || points.rows() == 0)
      throw InvalidArgumentError("kde: size mismatch");
    Eigen::VectorXd w = weights / weights.sum();
    const double n_eff = effective_sample_size(w);
    Eigen::VectorXd sd(points.cols());
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      const double var = weighted_variance(points.col(d), w);
      if (!(var > 0.0))
        throw InvalidBandwidthError("kde: weighted variance vanished in coordinate " + std::to_string(d));
      sd[d] = std::sqrt(var) * std::pow(n_eff, -1.0 / 6.0);
    }
    return WeightedKde(points, w, sd);
  }

  double density(const Eigen::VectorXd& x) const {
    if (x.size() != points_.cols()) throw InvalidArgumentError("kde: query dimension mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
      if (weights_[i] == 0.0) continue;
      double q = 0.0;
      for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double u = (x[d] - points_(i, d)) / sd_[d];
        q += u * u;
      }
      acc += weights_[i] * std::exp(log_norm_ - 0.5 * q);
    }
    return acc;
  }

  const Eigen::VectorXd& bandwidth_sd() const { return sd_; }

 private:
  Eigen::MatrixXd points_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd sd_;
  double log_norm_ = 0.0;
};

/// Highest-posterior-density region of a two-dimensional density on a regular
/// cell-center grid over [lo, hi]: cells are ranked by density and included
/// until the target probability mass is reached. `threshold` is the density
/// of the last cell in; a point belongs to the region when its density
/// reaches the threshold.
struct HpdRegion {
  Eigen::VectorXd axis1;   // cell centers, first coordinate
  Eigen::VectorXd axis2;   // cell centers, second coordinate
  Eigen::MatrixXd density; // axis1.size() x axis2.size()
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> inside;
  double threshold = 0.0;
  double level = 0.0;
  double covered_mass = 0.0;  // achieved mass, >= level

  bool contains_by_threshold(const Eigen::VectorXd& x, const WeightedKde& kde) const {
    return kde.density(x) >= threshold;
  }
};

class DegenerateDensityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline HpdRegion hpd_region(const WeightedKde& kde, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            int cells_per_dim, double level) {
  if (lo.size() != 2 || hi.size() != 2 || ((hi - lo).array() <= 0.0).any())
    throw InvalidArgumentError("hpd: need a two-dimensional box with lo < hi");
  if (cells_per_dim < 2) throw InvalidArgumentError("hpd: need at least 2 cells per dimension");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgumentError("hpd: level must lie in (0, 1)");

  HpdRegion out;
  out.level = level;
  const int n = cells_per_dim;
  const double d1 = (hi[0] - lo[0]) / n, d2 = (hi[1] - lo[1]) / n;
  out.axis1.resize(n);
  out.axis2.resize(n);
  for (int i = 0; i < n; ++i) out.axis1[i] = lo[0] + (i + 0.5) * d1;
  for (int j = 0; j < n; ++j) out.axis2[j] = lo[1] + (j + 0.5) * d2;
  out.density.resize(n, n);
  Eigen::VectorXd x(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      x[0] = out.axis1[i];
      x[1] = out.axis2[j];
      out.density(i, j) = kde.density(x);
    }
  const double total = out.density.sum();
  if (!(total > 0.0)) throw DegenerateDensityError("hpd: density vanishes on the whole grid");

  std::vector<std::pair<double, std::pair<int, int>>> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cells.push_back({out.density(i, j), {i, j}});
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  out.inside = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  double mass = 0.0;
  out.threshold = cells.front().first;
  for (const auto& [dens, ij] : cells) {
    mass += dens / total;
    out.inside(ij.first, ij.second) = true;
    out.threshold = dens;
    if (mass >= level) break;
  }
  out.covered_mass = mass;
  return out;
}

}  // namespace gpcinfer
