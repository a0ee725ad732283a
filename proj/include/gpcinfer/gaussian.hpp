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

#include <string>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/rng.hpp>

namespace gpcinfer {

/// Which functional of the latent field an entry of a Gaussian block refers to.
enum class Deriv { value, dz, dt, dzz };

inline std::string to_string(Deriv d) {
  switch (d) {
    case Deriv::value: return "value";
    case Deriv::dz: return "dz";
    case Deriv::dt: return "dt";
    case Deriv::dzz: return "dzz";
  }
  return "?";
}

/// A finite-dimensional Gaussian over labeled functionals of the field.
struct GaussianBlock {
  struct Label {
    int point = 0;  // index into the point set the block was built from
    Deriv tag = Deriv::value;
  };

  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<Label> labels;

  Eigen::Index size() const { return mean.size(); }
};

struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // amount added to the diagonal, 0 when none was needed
};

/// Cholesky factorization with an escalating diagonal jitter: starting at
/// 1e-10 times the largest diagonal entry and growing tenfold per retry, up
/// to 1e-4 times that entry. Throws NumericalError when the cap is reached.
inline JitteredCholesky jittered_llt(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgumentError("cholesky: matrix is not square");
  const double max_diag = a.diagonal().maxCoeff();
  JitteredCholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;
  if (!(max_diag > 0.0))
    throw NumericalError("cholesky: matrix has non-positive diagonal and is not factorizable");
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += rel * max_diag;
    out.llt.compute(aj);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = rel * max_diag;
      return out;
    }
  }
  throw NumericalError("cholesky: factorization failed up to jitter 1e-4 * max diagonal");
}

/// Draws `count` joint samples, one per row. A fixed seed reproduces the same
/// matrix. An all-zero covariance returns copies of the mean.
inline Eigen::MatrixXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       int count, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidArgumentError("sample_gaussian: covariance shape mismatch");
  if (count < 0) throw InvalidArgumentError("sample_gaussian: negative count");
  const auto dim = mean.size();
  Eigen::MatrixXd draws(count, dim);
  if (count == 0) return draws;
  if (!(cov.diagonal().maxCoeff() > 0.0)) {
    for (int i = 0; i < count; ++i) draws.row(i) = mean.transpose();
    return draws;
  }
  const Eigen::MatrixXd l = jittered_llt(cov).llt.matrixL();
  Eigen::VectorXd z(dim);
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) z[j] = rng.normal();
    draws.row(i) = (mean + l * z).transpose();
  }
  return draws;
}

inline Eigen::MatrixXd sample_gaussian(const GaussianBlock& block, int count, Rng& rng) {
  return sample_gaussian(block.mean, block.cov, count, rng);
}

}  // namespace gpcinfer
