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
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>
#include <gpcinfer/rng.hpp>

namespace gpcinfer {

/// Raised when the chain cannot start (non-finite target at the init).
class InvalidStartError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

/// Recorded random-walk chain. Row k of `states` is the state after
/// iteration k; `length() == iterations` and the initial point itself is not
/// recorded.
struct Chain {
  Eigen::MatrixXd states;
  Eigen::VectorXd log_target;
  std::vector<char> accepted;  // 1 where the iteration's proposal was accepted

  Eigen::Index length() const { return states.rows(); }

  double acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    double s = 0.0;
    for (const char a : accepted) s += a;
    return s / static_cast<double>(accepted.size());
  }
};

/// Metropolis random walk with independent Gaussian steps per coordinate.
/// Proposals outside the target's support (log target = -inf) are rejected;
/// the comparison never sees NaN because the current state always has a
/// finite value.
inline Chain metropolis_hastings(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                 const Eigen::VectorXd& init, const Eigen::VectorXd& proposal_sd,
                                 int iterations, Rng& rng) {
  if (iterations < 1) throw InvalidArgumentError("mcmc: iterations must be >= 1");
  if (proposal_sd.size() != init.size() || (proposal_sd.array() <= 0.0).any())
    throw InvalidArgumentError("mcmc: proposal sd must be positive per coordinate");
  double cur_lt = log_target(init);
  if (!std::isfinite(cur_lt))
    throw InvalidStartError("mcmc: log target not finite at the initial state");

  const Eigen::Index d = init.size();
  Chain chain;
  chain.states.resize(iterations, d);
  chain.log_target.resize(iterations);
  chain.accepted.resize(static_cast<std::size_t>(iterations));

  Eigen::VectorXd cur = init, prop(d);
  for (int k = 0; k < iterations; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) prop[j] = cur[j] + proposal_sd[j] * rng.normal();
    const double prop_lt = log_target(prop);
    const double u = rng.uniform();
    bool accept = false;
    if (std::isfinite(prop_lt)) accept = std::log(std::max(u, 1e-300)) < prop_lt - cur_lt;
    if (accept) {
      cur = prop;
      cur_lt = prop_lt;
    }
    chain.states.row(k) = cur.transpose();
    chain.log_target[k] = cur_lt;
    chain.accepted[static_cast<std::size_t>(k)] = accept ? 1 : 0;
  }
  return chain;
}

/// Evenly strided indices into the post-burn-in tail: with L states left
/// after discarding floor(length * burn_fraction), index k (0-based) is
/// burn + ceil((k+1) L / n_t) - 1. The final state is always included, and
/// with n_t = L the whole tail is returned.
inline std::vector<Eigen::Index> thin_indices(Eigen::Index length, double burn_fraction, int n_t) {
  if (!(burn_fraction >= 0.0 && burn_fraction < 1.0))
    throw InvalidArgumentError("thin: burn fraction must lie in [0, 1)");
  const auto burn = static_cast<Eigen::Index>(std::floor(static_cast<double>(length) * burn_fraction));
  const Eigen::Index tail = length - burn;
  if (n_t < 1 || static_cast<Eigen::Index>(n_t) > tail)
    throw InvalidArgumentError("thin: n_t = " + std::to_string(n_t) + " not in [1, " + std::to_string(tail) + "]");
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(n_t));
  for (int k = 1; k <= n_t; ++k) {
    const Eigen::Index offset = (static_cast<Eigen::Index>(k) * tail + n_t - 1) / n_t;  // ceil(k tail / n_t)
    idx.push_back(burn + offset - 1);
  }
  return idx;
}

inline Eigen::MatrixXd thin_chain(const Chain& chain, double burn_fraction, int n_t) {
  const auto idx = thin_indices(chain.length(), burn_fraction, n_t);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), chain.states.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = chain.states.row(idx[k]);
  return out;
}

/// Chain export: iter,beta,L_m,log_target,accepted.
inline void write_chain_csv(const std::filesystem::path& path, const Chain& chain) {
  if (chain.states.cols() != 2) throw InvalidArgumentError("chain csv: expects (beta, L_m) chains");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(chain.length()));
  for (Eigen::Index k = 0; k < chain.length(); ++k)
    rows.push_back({std::to_string(k), num(chain.states(k, 0)), num(chain.states(k, 1)),
                    num(chain.log_target[k]), chain.accepted[static_cast<std::size_t>(k)] ? "1" : "0"});
  write_csv(path, {"iter", "beta", "L_m", "log_target", "accepted"}, rows);
}

}  // namespace gpcinfer
