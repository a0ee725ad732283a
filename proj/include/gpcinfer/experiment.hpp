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
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/bayes_opt.hpp>
#include <gpcinfer/common.hpp>
#include <gpcinfer/config.hpp>
#include <gpcinfer/gpc.hpp>
#include <gpcinfer/gppde.hpp>
#include <gpcinfer/scenario.hpp>

namespace gpcinfer {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> k{"gppde", "gpc-i", "bo-gpc", "bo"};
  return k;
}

struct ExperimentSpec {
  Scenario scenario;
  std::vector<double> noise_levels{0.05};
  std::vector<std::string> methods{"gpc-i"};
  int replicates = 10;
  std::uint64_t seed_base = 1;
  int jobs = 1;

  void validate() const {
    if (noise_levels.empty()) throw InvalidArgumentError("experiment: need at least one noise level");
    for (double b : noise_levels)
      if (!(b >= 0.0)) throw InvalidArgumentError("experiment: noise levels must be >= 0");
    if (methods.empty()) throw InvalidArgumentError("experiment: need at least one method");
    for (const auto& m : methods)
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
        throw ConfigError("experiment: unknown method '" + m + "'");
    if (replicates < 1) throw InvalidArgumentError("experiment: need at least one replicate");
    if (jobs < 1) throw InvalidArgumentError("experiment: jobs must be >= 1");
  }
};

/// Reads the [experiment] section on top of the scenario keys.
inline ExperimentSpec make_experiment_spec(Config& cfg) {
  ExperimentSpec spec;
  spec.scenario = make_scenario(cfg);
  spec.noise_levels = cfg.get_double_list("experiment.noise_levels", {0.05});
  const std::string methods = cfg.get_string("experiment.methods", "gpc-i");
  spec.methods.clear();
  for (const auto& tok : split_csv_line(methods)) {
    const std::string m = strip(tok);
    if (!m.empty()) spec.methods.push_back(m);
  }
  spec.replicates = static_cast<int>(cfg.get_int("experiment.replicates", 10));
  spec.seed_base = static_cast<std::uint64_t>(cfg.get_int("experiment.seed_base", 1));
  spec.jobs = static_cast<int>(cfg.get_int("experiment.jobs", 1));
  spec.validate();
  return spec;
}

struct ReplicateResult {
  std::string method;
  double noise_b = 0.0;
  int replicate = 0;
  Eigen::Vector2d estimate{std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()};
  bool ok = false;
  double runtime_seconds = 0.0;
  long solver_calls = 0;
  double ess = std::numeric_limits<double>::quiet_NaN();
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct AggregateRow {
  std::string method;
  double noise_b = 0.0;
  std::string param;  // "beta" or "L_m"
  double mean = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  int n_ok = 0;
};

struct ExperimentResult {
  std::vector<ReplicateResult> results;
  std::vector<AggregateRow> table;
};

/// Runs one method on one dataset. The caller owns seeding; identical inputs
/// reproduce identical results.
inline ReplicateResult run_method(const Scenario& sc, const std::string& method,
                                  const Dataset& data, Rng rng) {
  if (std::find(known_methods().begin(), known_methods().end(), method) == known_methods().end())
    throw ConfigError("infer: unknown method '" + method + "'");
  ReplicateResult rr;
  rr.method = method;
  rr.noise_b = sc.noise_b;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (method == "gpc-i") {
      const TruePosterior posterior = sc.posterior(data);
      const RunRecord rec = run_gpc_i(data, posterior, sc.gp_init(data), sc.gpc, sc.profile, sc.env, rng);
      rr.estimate = rec.estimate;
      rr.solver_calls = rec.solver_calls;
      rr.ess = rec.ess;
      rr.acceptance_rate = rec.acceptance_rate;
    } else if (method == "bo" || method == "bo-gpc") {
      const TruePosterior posterior = sc.posterior(data);
      const auto objective = [&posterior](const Eigen::VectorXd& theta) {
        return -posterior.log_density(theta);
      };
      BoproConfig cfg = sc.bopro;
      BoResult bo;
      if (method == "bo") {
        bo = run_bo(objective, sc.prior, cfg, BoMode::plain, nullptr, rng.fork(1));
      } else {
        const auto ap = std::make_shared<ApproxPosterior>(
            build_approx_posterior(data, sc.prior, sc.gp_init(data), sc.gpc, sc.profile, sc.env, rng.fork(2)));
        rr.acceptance_rate = ap->chain.acceptance_rate();
        cfg.prior_scaler = normalize_prior(ap->retained_log_densities(sc.gpc.burn_fraction));
        const auto log_prior = [ap](const Eigen::VectorXd& theta) { return ap->log_density(theta); };
        bo = run_bo(objective, sc.prior, cfg, BoMode::prior_guided, log_prior, rng.fork(1));
      }
      rr.estimate = bo.best_theta;
      rr.solver_calls = posterior.solver_calls();
    } else {  // gppde
      GpFitOptions fit_opts = sc.gpc.gp_fit;
      fit_opts.seed = rng.fork(1).seed();
      const GpFitResult fit = fit_hyperparameters(data, sc.gp_init(data), fit_opts);
      const GppdeResult res = gppde_estimate(data, fit.hyperparams, sc.profile, sc.env, sc.gppde);
      rr.estimate = res.theta;
      rr.solver_calls = 0;
    }
    rr.ok = true;
  } catch (const Error& e) {
    rr.ok = false;
    rr.error = e.what();
  }
  rr.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rr;
}

/// Mean and root-mean-square error of the estimates against the truth,
/// per method, noise level, and parameter, over the successful replicates.
inline std::vector<AggregateRow> aggregate_results(const std::vector<ReplicateResult>& results,
                                                   const Eigen::Vector2d& truth,
                                                   const std::vector<std::string>& methods,
                                                   const std::vector<double>& noise_levels) {
  static const char* kParams[2] = {"beta", "L_m"};
  std::vector<AggregateRow> table;
  for (const auto& method : methods)
    for (double b : noise_levels)
      for (int p = 0; p < 2; ++p) {
        AggregateRow row;
        row.method = method;
        row.noise_b = b;
        row.param = kParams[p];
        double sum = 0.0, sq = 0.0;
        for (const auto& r : results) {
          if (r.method != method || r.noise_b != b || !r.ok) continue;
          sum += r.estimate[p];
          sq += (r.estimate[p] - truth[p]) * (r.estimate[p] - truth[p]);
          ++row.n_ok;
        }
        if (row.n_ok > 0) {
          row.mean = sum / row.n_ok;
          row.rmse = std::sqrt(sq / row.n_ok);
        }
        table.push_back(row);
      }
  return table;
}

namespace detail {

inline std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail

inline void write_results_csv(const std::filesystem::path& path,
                              const std::vector<ReplicateResult>& results) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(results.size());
  for (const auto& r : results)
    rows.push_back({r.method, num17(r.noise_b), std::to_string(r.replicate), num17(r.estimate[0]),
                    num17(r.estimate[1]), r.ok ? "1" : "0", num(r.runtime_seconds),
                    std::to_string(r.solver_calls), num(r.ess), num(r.acceptance_rate),
                    detail::csv_safe(r.error)});
  write_csv(path, {"method", "b", "replicate", "beta_hat", "L_m_hat", "ok", "runtime_seconds",
                   "solver_calls", "ess", "acceptance_rate", "error"},
            rows);
}

inline void write_table_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& table) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.size());
  for (const auto& row : table)
    rows.push_back({row.method, num17(row.noise_b), row.param, num17(row.mean), num17(row.rmse),
                    std::to_string(row.n_ok)});
  write_csv(path, {"method", "b", "param", "mean", "rmse", "n_ok"}, rows);
}

/// Runs the full (method x noise level x replicate) sweep. The truth field is
/// solved once and shared; every method within a cell sees the same noisy
/// dataset, so comparisons are paired. Replicate cells run concurrently when
/// jobs > 1. Writes results.csv and table.csv under out_dir when given.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir = {}) {
  spec.validate();
  const SolutionField truth_field = spec.scenario.solve(spec.scenario.truth);

  struct Task {
    std::string method;
    double b;
    int replicate;
    std::function<ReplicateResult()> run;
  };
  std::vector<Task> tasks;
  Rng root(spec.seed_base);
  for (std::size_t bi = 0; bi < spec.noise_levels.size(); ++bi) {
    const double b = spec.noise_levels[bi];
    Scenario cell = spec.scenario;
    cell.noise_b = b;
    for (int rep = 0; rep < spec.replicates; ++rep) {
      Rng rep_rng = root.fork(1000003 * (bi + 1) + static_cast<std::uint64_t>(rep));
      Rng data_rng = rep_rng.fork(1);
      const auto data = std::make_shared<Dataset>(cell.observe(truth_field, data_rng));
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        const std::string method = spec.methods[mi];
        Rng method_rng = rep_rng.fork(2 + mi);
        tasks.push_back({method, b, rep, [cell, method, data, method_rng, rep]() {
                           ReplicateResult rr = run_method(cell, method, *data, method_rng);
                           rr.replicate = rep;
                           return rr;
                         }});
      }
    }
  }

  ExperimentResult out;
  out.results.resize(tasks.size());
  if (spec.jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) out.results[i] = tasks[i].run();
  } else {
    for (std::size_t begin = 0; begin < tasks.size(); begin += static_cast<std::size_t>(spec.jobs)) {
      const std::size_t end = std::min(tasks.size(), begin + static_cast<std::size_t>(spec.jobs));
      std::vector<std::future<ReplicateResult>> futs;
      for (std::size_t i = begin; i < end; ++i)
        futs.push_back(std::async(std::launch::async, tasks[i].run));
      for (std::size_t i = begin; i < end; ++i) out.results[i] = futs[i - begin].get();
    }
  }

  out.table = aggregate_results(out.results,
                                Eigen::Vector2d(spec.scenario.truth.beta, spec.scenario.truth.l_m),
                                spec.methods, spec.noise_levels);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_results_csv(out_dir / "results.csv", out.results);
    write_table_csv(out_dir / "table.csv", out.table);
  }
  return out;
}

}  // namespace gpcinfer
