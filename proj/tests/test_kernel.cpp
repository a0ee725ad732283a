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

// Tests for the squared-exponential kernel and its closed-form derivative
// covariances. Every derivative formula is validated against nested central
// finite differences of the plain kernel, which share no code with the
// closed-form table.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include <gpcinfer/kernel.hpp>
#include <gpcinfer/rng.hpp>

#include "derivative_checks.hpp"
#include "oracles.hpp"

namespace {

using namespace gpcinfer;

using derivative_checks::fd_left;
using derivative_checks::fd_right_plain;

GpHyperparams make_hp(double lz, double lt, double s2 = 1.0) {
  GpHyperparams hp;
  hp.length_scales.resize(2);
  hp.length_scales << lz, lt;
  hp.signal_variance = s2;
  hp.noise_variance = 1e-6;
  return hp;
}

// ---------------------------------------------------------------------------
// Plain kernel values
// ---------------------------------------------------------------------------

TEST(Kernel, ValueAtCoincidentPointsIsSignalVariance) {
  const GpHyperparams hp = make_hp(0.7, 1.3, 2.5);
  Eigen::VectorXd x(2);
  x << 0.4, -1.0;
  EXPECT_DOUBLE_EQ(kernel_eval(x, x, hp), 2.5);
}

TEST(Kernel, HalfValueAtCharacteristicSeparation) {
  // In one active dimension, k = s2/2 exactly when |d| = l * sqrt(2 ln 2).
  GpHyperparams hp = make_hp(0.9, 1.0, 1.0);
  Eigen::VectorXd x1(2), x2(2);
  x1 << 0.0, 0.5;
  x2 << 0.9 * std::sqrt(2.0 * std::log(2.0)), 0.5;
  EXPECT_NEAR(kernel_eval(x1, x2, hp), 0.5, 1e-14);
}

TEST(Kernel, FactorizesOverDimensions) {
  // l = (1, 2), d = (1, 2): exponent = -(1/2 + 4/8) = -1.
  const GpHyperparams hp = make_hp(1.0, 2.0, 1.0);
  Eigen::VectorXd x1(2), x2(2);
  x1 << 0.0, 0.0;
  x2 << 1.0, 2.0;
  EXPECT_NEAR(kernel_eval(x1, x2, hp), std::exp(-1.0), 1e-14);
}

TEST(Kernel, SymmetricAndBoundedBySignalVariance) {
  const GpHyperparams hp = make_hp(0.3, 2.0, 1.8);
  Rng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd x1(2), x2(2);
    x1 << rng.normal(), rng.normal();
    x2 << rng.normal(), rng.normal();
    const double k12 = kernel_eval(x1, x2, hp);
    EXPECT_DOUBLE_EQ(k12, kernel_eval(x2, x1, hp));
    EXPECT_GT(k12, 0.0);
    EXPECT_LE(k12, 1.8);
  }
}

TEST(Kernel, MatrixIsPositiveSemiDefinite) {
  const GpHyperparams hp = make_hp(0.5, 0.8, 1.2);
  Rng rng(62);
  Eigen::MatrixXd x(12, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
  }
  const Eigen::MatrixXd k = kernel_matrix(x, x, hp);
  EXPECT_NEAR((k - k.transpose()).lpNorm<Eigen::Infinity>(), 0.0, 1e-14);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * k.diagonal().maxCoeff());
}

TEST(Kernel, InvalidHyperparamsRejected) {
  GpHyperparams hp = make_hp(1.0, 1.0);
  EXPECT_NO_THROW(hp.validate(2));
  EXPECT_THROW(hp.validate(3), InvalidArgumentError);
  hp.length_scales[0] = 0.0;
  EXPECT_THROW(hp.validate(2), InvalidArgumentError);
  hp = make_hp(1.0, 1.0);
  hp.signal_variance = -1.0;
  EXPECT_THROW(hp.validate(2), InvalidArgumentError);
  hp = make_hp(1.0, 1.0);
  hp.noise_variance = -1e-9;
  EXPECT_THROW(hp.validate(2), InvalidArgumentError);
}

TEST(Kernel, ZetaRoundTrip) {
  const GpHyperparams hp = make_hp(0.37, 2.9, 1.7);
  const Eigen::VectorXd zeta = hp.to_zeta();
  ASSERT_EQ(zeta.size(), 4);
  const GpHyperparams back = GpHyperparams::from_zeta(zeta, hp.mean_constant);
  EXPECT_NEAR(back.length_scales[0], 0.37, 1e-14);
  EXPECT_NEAR(back.length_scales[1], 2.9, 1e-14);
  EXPECT_NEAR(back.signal_variance, 1.7, 1e-14);
  EXPECT_NEAR(back.noise_variance, hp.noise_variance, 1e-20);
}

// ---------------------------------------------------------------------------
// Derivative covariances: exact point values
// ---------------------------------------------------------------------------

TEST(KernelDerivative, FirstFirstSameDimAtCoincidence) {
  // cov(df/dz(x), df/dz(x)) = s2 / l^2; with s2 = 1, l = 2 this is 1/4.
  const GpHyperparams hp = make_hp(2.0, 1.0, 1.0);
  Eigen::VectorXd x(2);
  x << 0.3, 0.7;
  const DerivativeOrderSpec spec{1, 0, 1, 0};
  EXPECT_NEAR(kernel_derivative_eval(x, x, hp, spec), 0.25, 1e-14);
}

TEST(KernelDerivative, SecondSecondSameDimAtCoincidence) {
  // cov(d2f/dz2, d2f/dz2) at x = x' equals 3 s2 / l^4; s2 = l = 1 gives 3.
  const GpHyperparams hp = make_hp(1.0, 1.0, 1.0);
  Eigen::VectorXd x(2);
  x << -0.2, 1.4;
  const DerivativeOrderSpec spec{2, 0, 2, 0};
  EXPECT_NEAR(kernel_derivative_eval(x, x, hp, spec), 3.0, 1e-14);
}

TEST(KernelDerivative, OddOrdersVanishAtCoincidence) {
  const GpHyperparams hp = make_hp(0.6, 1.1, 2.0);
  Eigen::VectorXd x(2);
  x << 0.1, 0.2;
  EXPECT_DOUBLE_EQ(kernel_derivative_eval(x, x, hp, {0, 0, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(kernel_derivative_eval(x, x, hp, {1, 1, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(kernel_derivative_eval(x, x, hp, {2, 0, 1, 0}), 0.0);
}

TEST(KernelDerivative, ValueSecondAtCoincidenceIsNegativeCurvatureScale) {
  // cov(f, d2f/dz'^2) at x = x' equals -s2 / l^2.
  const GpHyperparams hp = make_hp(0.5, 1.0, 2.0);
  Eigen::VectorXd x(2);
  x << 0.0, 0.0;
  EXPECT_NEAR(kernel_derivative_eval(x, x, hp, {0, 0, 2, 0}), -2.0 / 0.25, 1e-12);
}

TEST(KernelDerivative, CrossDimFactorsMultiply) {
  // Mixed first derivatives in different dimensions factorize:
  // cov(df/dz(x1), df/dt(x2)) = g_z'(u_z)/g_z * (-g_t'(u_t))/g_t * k(x1,x2)
  // = (u_z / l_z^2) * (-u_t / l_t^2) * ... with signs from the table.
  const GpHyperparams hp = make_hp(0.8, 1.5, 1.3);
  Eigen::VectorXd x1(2), x2(2);
  x1 << 0.4, 0.9;
  x2 << 0.1, 0.2;
  const double uz = x1[0] - x2[0], ut = x1[1] - x2[1];
  const double az = 1.0 / (0.8 * 0.8), at = 1.0 / (1.5 * 1.5);
  const double k = kernel_eval(x1, x2, hp);
  const double want = (-az * uz) * (-1.0) * (-at * ut) * k;
  EXPECT_NEAR(kernel_derivative_eval(x1, x2, hp, {1, 0, 1, 1}), want, 1e-14);
}

TEST(KernelDerivative, TransposeSymmetryOfMixedBlocks) {
  // cov(d^L f(x1), d^R f(x2)) must equal cov(d^R f(x2), d^L f(x1)).
  const GpHyperparams hp = make_hp(0.6, 1.2, 0.9);
  Rng rng(63);
  const std::vector<DerivativeOrderSpec> specs = {
      {0, 0, 1, 0}, {0, 0, 1, 1}, {0, 0, 2, 0}, {1, 0, 1, 1}, {1, 1, 2, 1}, {2, 0, 2, 0}};
  for (const auto& spec : specs) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x1(2), x2(2);
      x1 << rng.normal(), rng.normal();
      x2 << rng.normal(), rng.normal();
      const DerivativeOrderSpec flipped{spec.right, spec.right_dim, spec.left, spec.left_dim};
      EXPECT_NEAR(kernel_derivative_eval(x1, x2, hp, spec),
                  kernel_derivative_eval(x2, x1, hp, flipped), 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Derivative covariances: finite-difference validation
// ---------------------------------------------------------------------------

/// Runs one validation link over `n_pairs` random point pairs, comparing the
/// closed form against the supplied finite-difference oracle. The error
/// measurement is shared with the acceptance harness; see
/// derivative_checks.hpp for the telescoping protocol and the rationale for
/// the sample-scaled denominator.
void check_fd_link(const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& closed,
                   const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& fd,
                   Rng& rng, int n_pairs, const char* label) {
  const derivative_checks::LinkErrors err = derivative_checks::measure_fd_link(closed, fd, rng, n_pairs);
  ASSERT_GT(err.scale, 0.0) << label;
  EXPECT_LT(err.scaled, 1e-6) << label;
  EXPECT_LT(err.pointwise, 1e-6) << label;
}

TEST(KernelDerivative, AllSupportedOrdersMatchFiniteDifferences) {
  const GpHyperparams hp = make_hp(0.45, 1.6, 1.7);
  Rng rng(64);
  const double h1z = 1e-5 * hp.length_scales[0], h1t = 1e-5 * hp.length_scales[1];
  const double h2z = 1e-4 * hp.length_scales[0], h2t = 1e-4 * hp.length_scales[1];

  // First derivative of the second argument, against the plain kernel.
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {0, 0, 1, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_right_plain(a, b, hp, 1, 0, h1z);
      },
      rng, 100, "value-dz");
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {0, 0, 1, 1});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_right_plain(a, b, hp, 1, 1, h1t);
      },
      rng, 100, "value-dt");

  // Mixed first/first, differentiating the validated first-derivative form.
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {1, 0, 1, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 1, 0}, 1, 0, h1z);
      },
      rng, 100, "dz-dz");
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {1, 0, 1, 1});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 1, 1}, 1, 0, h1z);
      },
      rng, 100, "dz-dt");

  // Second derivative of the second argument, against the plain kernel.
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {0, 0, 2, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_right_plain(a, b, hp, 2, 0, h2z);
      },
      rng, 100, "value-dzz");

  // Third order (first x second), differentiating the validated second form.
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {1, 1, 2, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 2, 0}, 1, 1, h1t);
      },
      rng, 100, "dt-dzz");
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {1, 0, 2, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 2, 0}, 1, 0, h1z);
      },
      rng, 100, "dz-dzz");

  // Fourth order same dimension (second x second).
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {2, 0, 2, 0});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 2, 0}, 2, 0, h2z);
      },
      rng, 100, "dzz-dzz");
  check_fd_link(
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return kernel_derivative_eval(a, b, hp, {2, 1, 2, 1});
      },
      [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return fd_left(a, b, hp, {0, 0, 2, 1}, 2, 1, h2t);
      },
      rng, 100, "dtt-dtt");
}

TEST(KernelDerivative, OrderZeroReducesToPlainKernel) {
  const GpHyperparams hp = make_hp(0.7, 1.1, 1.4);
  Rng rng(65);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x1(2), x2(2);
    x1 << rng.normal(), rng.normal();
    x2 << rng.normal(), rng.normal();
    EXPECT_DOUBLE_EQ(kernel_derivative_eval(x1, x2, hp, {0, 0, 0, 0}), kernel_eval(x1, x2, hp));
    EXPECT_DOUBLE_EQ(kernel_derivative_eval(x1, x2, hp, {0, 1, 0, 1}), kernel_eval(x1, x2, hp));
  }
}

TEST(KernelDerivative, UnsupportedCombinationsThrow) {
  const GpHyperparams hp = make_hp(1.0, 1.0);
  Eigen::VectorXd x(2);
  x << 0.0, 0.0;
  // Fourth total order split across two dimensions is outside the table.
  EXPECT_THROW(kernel_derivative_eval(x, x, hp, {2, 0, 2, 1}), UnsupportedDerivativeError);
  EXPECT_THROW(kernel_derivative_eval(x, x, hp, {2, 1, 2, 0}), UnsupportedDerivativeError);
  // Orders above 2 are rejected.
  EXPECT_THROW(kernel_derivative_eval(x, x, hp, {3, 0, 0, 0}), UnsupportedDerivativeError);
  EXPECT_THROW(kernel_derivative_eval(x, x, hp, {0, 0, -1, 0}), UnsupportedDerivativeError);
  // Dimension indices out of range are rejected.
  EXPECT_THROW(kernel_derivative_eval(x, x, hp, {1, 2, 0, 0}), UnsupportedDerivativeError);
  // Same-dimension order 4 is supported.
  EXPECT_NO_THROW(kernel_derivative_eval(x, x, hp, {2, 0, 2, 0}));
}

TEST(KernelDerivative, BlockMatchesEntrywiseEvaluation) {
  const GpHyperparams hp = make_hp(0.5, 1.5, 1.1);
  Rng rng(66);
  Eigen::MatrixXd x1(6, 2), x2(4, 2);
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    x1(i, 0) = rng.normal();
    x1(i, 1) = rng.normal();
  }
  for (Eigen::Index i = 0; i < x2.rows(); ++i) {
    x2(i, 0) = rng.normal();
    x2(i, 1) = rng.normal();
  }
  const DerivativeOrderSpec spec{1, 0, 2, 0};
  const Eigen::MatrixXd block = kernel_derivative_block(x1, x2, hp, spec);
  ASSERT_EQ(block.rows(), 6);
  ASSERT_EQ(block.cols(), 4);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(block(i, j),
                       kernel_derivative_eval(x1.row(i).transpose(), x2.row(j).transpose(), hp, spec));
}

TEST(KernelDerivative, FactorRatioTable) {
  // Direct check of the one-dimensional ratio table at a generic point.
  const double u = 0.7, a = 1.0 / (0.6 * 0.6);
  EXPECT_DOUBLE_EQ(detail::factor_ratio(0, u, a), 1.0);
  EXPECT_DOUBLE_EQ(detail::factor_ratio(1, u, a), -a * u);
  EXPECT_DOUBLE_EQ(detail::factor_ratio(2, u, a), a * a * u * u - a);
  EXPECT_DOUBLE_EQ(detail::factor_ratio(3, u, a), 3.0 * a * a * u - a * a * a * u * u * u);
  EXPECT_DOUBLE_EQ(detail::factor_ratio(4, u, a),
                   3.0 * a * a - 6.0 * a * a * a * u * u + a * a * a * a * u * u * u * u);
  // Each ratio is d^k g / d u^k divided by g, validated by finite differences.
  const auto g = [&](double v) { return std::exp(-0.5 * a * v * v); };
  for (int order = 1; order <= 2; ++order) {
    const double fd = oracle::fd_apply(g, order, u, 1e-5) / g(u);
    EXPECT_LT(oracle::rel_err(detail::factor_ratio(order, u, a), fd, 1e-8), 1e-5);
  }
}

}  // namespace
