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

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>

namespace gpcinfer {

/// Anisotropic squared-exponential kernel
///   k(x, x') = signal_variance * prod_d exp(-(x_d - x'_d)^2 / (2 l_d^2)).
/// Because the kernel factorizes over input dimensions, covariances between
/// derivatives of the process reduce to one-dimensional derivatives of the
/// Gaussian factor, which this header evaluates in closed form.
struct GpHyperparams {
  Eigen::VectorXd length_scales;  // one per input dimension, > 0
  double signal_variance = 1.0;   // > 0
  double noise_variance = 1e-6;   // >= 0
  double mean_constant = 0.0;     // constant prior mean

  void validate(Eigen::Index dims) const {
    if (length_scales.size() != dims) throw InvalidArgumentError("hyperparams: length scale count != input dims");
    if ((length_scales.array() <= 0.0).any()) throw InvalidArgumentError("hyperparams: length scales must be > 0");
    if (!(signal_variance > 0.0)) throw InvalidArgumentError("hyperparams: signal variance must be > 0");
    if (!(noise_variance >= 0.0)) throw InvalidArgumentError("hyperparams: noise variance must be >= 0");
  }

  /// Log-parameterization (log l_1..m, log signal_variance, log noise_variance)
  /// used by the marginal-likelihood optimizer. The mean is not optimized.
  Eigen::VectorXd to_zeta() const {
    Eigen::VectorXd z(length_scales.size() + 2);
    for (Eigen::Index d = 0; d < length_scales.size(); ++d) z[d] = std::log(length_scales[d]);
    z[length_scales.size()] = std::log(signal_variance);
    z[length_scales.size() + 1] = std::log(noise_variance);
    return z;
  }

  static GpHyperparams from_zeta(const Eigen::VectorXd& zeta, double mean_constant) {
    if (zeta.size() < 3) throw InvalidArgumentError("hyperparams: zeta needs at least 3 entries");
    GpHyperparams hp;
    const Eigen::Index m = zeta.size() - 2;
    hp.length_scales = zeta.head(m).array().exp();
    hp.signal_variance = std::exp(zeta[m]);
    hp.noise_variance = std::exp(zeta[m + 1]);
    hp.mean_constant = mean_constant;
    return hp;
  }
};

/// Derivative orders attached to the two kernel arguments: order `left` with
/// respect to dimension `left_dim` of the first argument and order `right`
/// with respect to dimension `right_dim` of the second. Order 0 means no
/// derivative (the dimension index is ignored).
///
/// Supported orders are left, right in {0, 1, 2}. The single excluded corner
/// is left == right == 2 acting on two different dimensions, which the
/// closed-form table does not cover.
struct DerivativeOrderSpec {
  int left = 0;
  int left_dim = 0;
  int right = 0;
  int right_dim = 0;

  void validate(Eigen::Index dims) const {
    if (left < 0 || left > 2 || right < 0 || right > 2)
      throw UnsupportedDerivativeError("derivative spec: orders must lie in {0,1,2}");
    if (left > 0 && (left_dim < 0 || left_dim >= dims))
      throw UnsupportedDerivativeError("derivative spec: left dimension out of range");
    if (right > 0 && (right_dim < 0 || right_dim >= dims))
      throw UnsupportedDerivativeError("derivative spec: right dimension out of range");
    if (left + right == 4 && left_dim != right_dim)
      throw UnsupportedDerivativeError("derivative spec: order-4 combinations must act on one dimension");
  }
};

namespace detail {

/// Ratios g^(k)(u) / g(u) for the one-dimensional factor
/// g(u) = exp(-u^2 / (2 l^2)), with a = 1 / l^2:
///   g'    = -a u g
///   g''   = (a^2 u^2 - a) g
///   g'''  = (3 a^2 u - a^3 u^3) g
///   g'''' = (3 a^2 - 6 a^3 u^2 + a^4 u^4) g
inline double factor_ratio(int order, double u, double a) {
  switch (order) {
    case 0: return 1.0;
    case 1: return -a * u;
    case 2: return a * a * u * u - a;
    case 3: return 3.0 * a * a * u - a * a * a * u * u * u;
    case 4: {
      const double a2 = a * a, u2 = u * u;
      return 3.0 * a2 - 6.0 * a2 * a * u2 + a2 * a2 * u2 * u2;
    }
    default: throw UnsupportedDerivativeError("derivative spec: factor order " + std::to_string(order));
  }
}

}  // namespace detail

inline double kernel_eval(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const GpHyperparams& hp) {
  hp.validate(x1.size());
  if (x1.size() != x2.size()) throw InvalidArgumentError("kernel: input dimension mismatch");
  double q = 0.0;
  for (Eigen::Index d = 0; d < x1.size(); ++d) {
    const double u = (x1[d] - x2[d]) / hp.length_scales[d];
    q += u * u;
  }
  return hp.signal_variance * std::exp(-0.5 * q);
}

/// Covariance between derivatives of the process:
///   cov( d^left f(x1) / d x1[left_dim]^left ,
///        d^right f(x2) / d x2[right_dim]^right ).
/// Derivatives with respect to the second argument contribute a (-1)^right
/// sign relative to derivatives of g in u = x1 - x2.
inline double kernel_derivative_eval(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                     const GpHyperparams& hp, const DerivativeOrderSpec& spec) {
  hp.validate(x1.size());
  spec.validate(x1.size());
  if (x1.size() != x2.size()) throw InvalidArgumentError("kernel: input dimension mismatch");
  const double base = kernel_eval(x1, x2, hp);
  const double sign = (spec.right % 2 == 0) ? 1.0 : -1.0;
  double ratio;
  if (spec.left > 0 && spec.right > 0 && spec.left_dim == spec.right_dim) {
    const double l = hp.length_scales[spec.left_dim];
    const double u = x1[spec.left_dim] - x2[spec.left_dim];
    ratio = detail::factor_ratio(spec.left + spec.right, u, 1.0 / (l * l));
  } else {
    ratio = 1.0;
    if (spec.left > 0) {
      const double l = hp.length_scales[spec.left_dim];
      ratio *= detail::factor_ratio(spec.left, x1[spec.left_dim] - x2[spec.left_dim], 1.0 / (l * l));
    }
    if (spec.right > 0) {
      const double l = hp.length_scales[spec.right_dim];
      ratio *= detail::factor_ratio(spec.right, x1[spec.right_dim] - x2[spec.right_dim], 1.0 / (l * l));
    }
  }
  return sign * ratio * base;
}

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                                     const GpHyperparams& hp) {
  hp.validate(x1.cols());
  if (x1.cols() != x2.cols()) throw InvalidArgumentError("kernel: input dimension mismatch");
  Eigen::MatrixXd k(x1.rows(), x2.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i)
    for (Eigen::Index j = 0; j < x2.rows(); ++j) {
      double q = 0.0;
      for (Eigen::Index d = 0; d < x1.cols(); ++d) {
        const double u = (x1(i, d) - x2(j, d)) / hp.length_scales[d];
        q += u * u;
      }
      k(i, j) = hp.signal_variance * std::exp(-0.5 * q);
    }
  return k;
}

/// Matrix of kernel_derivative_eval over all row pairs (x1_i, x2_j).
inline Eigen::MatrixXd kernel_derivative_block(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                                               const GpHyperparams& hp, const DerivativeOrderSpec& spec) {
  hp.validate(x1.cols());
  spec.validate(x1.cols());
  Eigen::MatrixXd k(x1.rows(), x2.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i)
    for (Eigen::Index j = 0; j < x2.rows(); ++j)
      k(i, j) = kernel_derivative_eval(x1.row(i), x2.row(j), hp, spec);
  return k;
}

}  // namespace gpcinfer
