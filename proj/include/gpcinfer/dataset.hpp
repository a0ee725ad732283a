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

#include <filesystem>

#include <Eigen/Dense>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>

namespace gpcinfer {

/// Noisy scalar observations over continuous inputs. For field data the input
/// columns are (z, t): vertical coordinate in meters (negative below the
/// surface) and time in seconds.
struct Dataset {
  Eigen::MatrixXd x;  // n x m inputs
  Eigen::VectorXd y;  // n responses

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dims() const { return x.cols(); }

  void validate() const {
    if (x.rows() != y.size()) throw InvalidArgumentError("dataset: x rows != y length");
    if (y.size() == 0) throw InvalidArgumentError("dataset: empty");
    if (!x.allFinite() || !y.allFinite()) throw InvalidArgumentError("dataset: non-finite entries");
  }
};

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int jz = t.column("z"), jt = t.column("t"), jy = t.column("y");
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  ds.x.resize(n, 2);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    ds.x(i, 0) = t.value(r, jz);
    ds.x(i, 1) = t.value(r, jt);
    ds.y[i] = t.value(r, jy);
  }
  ds.validate();
  return ds;
}

inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(ds.size()));
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    rows.push_back({num(ds.x(i, 0)), num(ds.x(i, 1)), num(ds.y[i])});
  write_csv(path, {"z", "t", "y"}, rows);
}

}  // namespace gpcinfer
