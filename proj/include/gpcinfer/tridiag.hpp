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

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>

namespace gpcinfer {

/// Thomas algorithm for a tridiagonal system: `sub` (length n-1) holds the
/// subdiagonal, `diag` (n) the diagonal, `sup` (n-1) the superdiagonal and
/// `rhs` (n) the right-hand side. O(n) forward elimination plus back
/// substitution; throws SingularSystemError on a vanishing pivot.
inline Eigen::VectorXd thomas_solve(const Eigen::VectorXd& sub, const Eigen::VectorXd& diag,
                                    const Eigen::VectorXd& sup, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  if (n == 0) throw InvalidArgumentError("thomas: empty system");
  if (sub.size() != n - 1 || sup.size() != n - 1 || rhs.size() != n)
    throw InvalidArgumentError("thomas: band lengths inconsistent with diagonal");

  const double scale = diag.cwiseAbs().maxCoeff();
  const double tiny = 1e-14 * (scale > 0.0 ? scale : 1.0);

  Eigen::VectorXd c_star(n), d_star(n);
  if (std::abs(diag[0]) <= tiny) throw SingularSystemError("thomas: zero pivot at row 0");
  c_star[0] = (n > 1) ? sup[0] / diag[0] : 0.0;
  d_star[0] = rhs[0] / diag[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const double denom = diag[i] - sub[i - 1] * c_star[i - 1];
    if (std::abs(denom) <= tiny) throw SingularSystemError("thomas: zero pivot at row " + std::to_string(i));
    c_star[i] = (i < n - 1) ? sup[i] / denom : 0.0;
    d_star[i] = (rhs[i] - sub[i - 1] * d_star[i - 1]) / denom;
  }
  Eigen::VectorXd x(n);
  x[n - 1] = d_star[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d_star[i] - c_star[i] * x[i + 1];
  return x;
}

}  // namespace gpcinfer
