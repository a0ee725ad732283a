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
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/rng.hpp>
#include <gpcinfer/stats.hpp>

namespace gpcinfer {

/// Independent one-dimensional prior on a parameter coordinate: uniform on
/// [lo, hi] or a normal truncated to [lo, hi]. Every coordinate has a finite
/// support box, which doubles as the search domain for optimization and the
/// density grids.
struct CoordinatePrior {
  enum class Kind { uniform, truncated_normal } kind = Kind::uniform;
  double lo = 0.0;
  double hi = 1.0;
  double mu = 0.0;  // truncated_normal only
  double sd = 1.0;  // truncated_normal only

  void validate() const {
    if (!(lo < hi)) throw InvalidArgumentError("prior: need lo < hi");
    if (kind == Kind::truncated_normal && !(sd > 0.0))
      throw InvalidArgumentError("prior: normal sd must be > 0");
  }

  double log_density(double x) const {
    if (x < lo || x > hi) return -std::numeric_limits<double>::infinity();
    if (kind == Kind::uniform) return -std::log(hi - lo);
    const double zl = (lo - mu) / sd, zh = (hi - mu) / sd;
    const double mass = normal_cdf(zh) - normal_cdf(zl);
    const double zz = (x - mu) / sd;
    return -0.5 * zz * zz - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(mass);
  }

  double sample(Rng& rng) const {
    if (kind == Kind::uniform) return rng.uniform(lo, hi);
    for (int tries = 0; tries < 10000; ++tries) {
      const double x = rng.normal(mu, sd);
      if (x >= lo && x <= hi) return x;
    }
    throw NumericalError("prior: truncated normal rejection sampler exhausted");
  }
};

struct Prior {
  std::vector<CoordinatePrior> coords;
  std::vector<std::string> names;

  void validate() const {
    if (coords.empty() || coords.size() != names.size())
      throw InvalidArgumentError("prior: need one named prior per coordinate");
    for (const auto& c : coords) c.validate();
  }

  Eigen::Index dims() const { return static_cast<Eigen::Index>(coords.size()); }

  double log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dims()) throw InvalidArgumentError("prior: dimension mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      s += coords[static_cast<std::size_t>(i)].log_density(x[i]);
      if (!std::isfinite(s)) return -std::numeric_limits<double>::infinity();
    }
    return s;
  }

  bool in_support(const Eigen::VectorXd& x) const { return std::isfinite(log_density(x)); }

  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd x(dims());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = coords[static_cast<std::size_t>(i)].sample(rng);
    return x;
  }

  Eigen::VectorXd lower() const {
    Eigen::VectorXd v(dims());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = coords[static_cast<std::size_t>(i)].lo;
    return v;
  }

  Eigen::VectorXd upper() const {
    Eigen::VectorXd v(dims());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = coords[static_cast<std::size_t>(i)].hi;
    return v;
  }

  Eigen::VectorXd center() const { return 0.5 * (lower() + upper()); }
  Eigen::VectorXd widths() const { return upper() - lower(); }

  /// Default root-uptake prior: beta uniform on (0.75, 3), L_m uniform on (1, 4) m.
  static Prior default_sink_prior() {
    Prior p;
    p.coords = {{CoordinatePrior::Kind::uniform, 0.75, 3.0},
                {CoordinatePrior::Kind::uniform, 1.0, 4.0}};
    p.names = {"beta", "L_m"};
    return p;
  }
};

}  // namespace gpcinfer
