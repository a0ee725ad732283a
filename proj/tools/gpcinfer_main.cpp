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

// Command-line front end: simulate synthetic soil-moisture studies, fit the
// field surrogate, run the inference and optimization methods, sweep full
// experiments, and reshape run records into plot-ready CSV files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <gpcinfer/bayes_opt.hpp>
#include <gpcinfer/experiment.hpp>
#include <gpcinfer/gpc.hpp>
#include <gpcinfer/gppde.hpp>
#include <gpcinfer/scenario.hpp>

namespace fs = std::filesystem;
using namespace gpcinfer;

namespace {

Config load_config(const std::string& path) {
  return path.empty() ? Config::parse_string("", "<defaults>") : Config::parse_file(path);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_provenance(const fs::path& dir, const std::string& command, std::uint64_t seed,
                      const std::string& extra = "") {
  std::string text = "tool = gpcinfer\ncommand = " + command + "\nseed = " + std::to_string(seed) + "\n";
  if (!extra.empty()) text += extra;
  write_text(dir / "provenance.txt", text);
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const fs::path& out) {
  Config cfg = load_config(config_path);
  Scenario sc = make_scenario(cfg);
  cfg.finalize();

  const SolutionField field = sc.solve(sc.truth);
  Rng rng = Rng(seed).fork(1);
  double noise_sd = 0.0;
  const Dataset data = sc.observe(field, rng, &noise_sd);

  fs::create_directories(out);
  write_dataset_csv(out / "data.csv", data);
  write_field_csv(out / "field.csv", field);
  write_text(out / "config_snapshot.txt", cfg.snapshot());
  double max_rel = 0.0;
  long halvings = field.halving_events;
  for (const auto& s : field.steps) max_rel = std::max(max_rel, std::abs(s.mass_error_rel));
  write_provenance(out, "simulate", seed,
                   "noise_sd = " + num(noise_sd) + "\nobservations = " + std::to_string(data.size()) +
                       "\ntruth_beta = " + num(sc.truth.beta) + "\ntruth_L_m = " + num(sc.truth.l_m) +
                       "\nmax_mass_error_rel = " + num(max_rel) +
                       "\nhalving_events = " + std::to_string(halvings) + "\n");
  std::cout << "simulate: wrote " << data.size() << " observations to " << (out / "data.csv").string()
            << " (noise sd " << num(noise_sd) << ", " << halvings << " step halvings)\n";
  return 0;
}

int cmd_fit_gp(const std::string& config_path, const std::string& data_path, std::uint64_t seed,
               const fs::path& out) {
  Config cfg = load_config(config_path);
  Scenario sc = make_scenario(cfg);
  cfg.finalize();
  const Dataset data = read_dataset_csv(data_path);
  GpFitOptions opts = sc.gpc.gp_fit;
  opts.seed = Rng(seed).fork(1).seed();
  const GpFitResult fit = fit_hyperparameters(data, sc.gp_init(data), opts);

  fs::create_directories(out);
  save_hyperparams(out / "hyperparams.txt", fit.hyperparams);
  write_text(out / "config_snapshot.txt", cfg.snapshot());
  write_provenance(out, "fit-gp", seed, "lml = " + num(fit.lml) + "\nstarts = " + std::to_string(fit.starts) + "\n");
  std::cout << "fit-gp: log marginal likelihood " << num(fit.lml) << ", hyperparameters in "
            << (out / "hyperparams.txt").string() << "\n";
  return 0;
}

int cmd_infer(const std::string& config_path, const std::string& data_path, const std::string& method,
              std::uint64_t seed, const fs::path& out) {
  Config cfg = load_config(config_path);
  Scenario sc = make_scenario(cfg);
  cfg.finalize();
  const Dataset data = read_dataset_csv(data_path);
  Rng rng(seed);
  fs::create_directories(out);

  ReplicateResult rr;
  rr.method = method;
  rr.noise_b = sc.noise_b;
  const auto t0 = std::chrono::steady_clock::now();

  if (method == "gpc-i") {
    const TruePosterior posterior = sc.posterior(data);
    const RunRecord rec = run_gpc_i(data, posterior, sc.gp_init(data), sc.gpc, sc.profile, sc.env, rng);
    rec.write(out, cfg.snapshot());
    rr.estimate = rec.estimate;
    rr.solver_calls = rec.solver_calls;
    rr.ess = rec.ess;
    rr.acceptance_rate = rec.acceptance_rate;
  } else if (method == "bo" || method == "bo-gpc") {
    const TruePosterior posterior = sc.posterior(data);
    const auto objective = [&posterior](const Eigen::VectorXd& theta) {
      return -posterior.log_density(theta);
    };
    BoproConfig bocfg = sc.bopro;
    BoResult bo;
    if (method == "bo") {
      bo = run_bo(objective, sc.prior, bocfg, BoMode::plain, nullptr, rng.fork(1));
    } else {
      const auto ap = std::make_shared<ApproxPosterior>(
          build_approx_posterior(data, sc.prior, sc.gp_init(data), sc.gpc, sc.profile, sc.env, rng.fork(2)));
      rr.acceptance_rate = ap->chain.acceptance_rate();
      bocfg.prior_scaler = normalize_prior(ap->retained_log_densities(sc.gpc.burn_fraction));
      write_chain_csv(out / "chain.csv", ap->chain);
      save_hyperparams(out / "hyperparams.txt", ap->hyperparams);
      const auto log_prior = [ap](const Eigen::VectorXd& theta) { return ap->log_density(theta); };
      bo = run_bo(objective, sc.prior, bocfg, BoMode::prior_guided, log_prior, rng.fork(1));
    }
    write_bo_trace(out / "trace.csv", bo.trace);
    write_csv(out / "estimate.csv", {"beta", "L_m"}, {{num(bo.best_theta[0]), num(bo.best_theta[1])}});
    write_text(out / "diagnostics.txt", "best_u = " + num(bo.best_u) + "\nobjective_calls = " +
                                            std::to_string(bo.objective_calls) + "\nfailed_calls = " +
                                            std::to_string(bo.failed_calls) + "\n");
    write_text(out / "config_snapshot.txt", cfg.snapshot());
    rr.estimate = Eigen::Vector2d(bo.best_theta[0], bo.best_theta[1]);
    rr.solver_calls = posterior.solver_calls();
  } else if (method == "gppde") {
    GpFitOptions opts = sc.gpc.gp_fit;
    opts.seed = rng.fork(1).seed();
    const GpFitResult fit = fit_hyperparameters(data, sc.gp_init(data), opts);
    const GppdeResult res = gppde_estimate(data, fit.hyperparams, sc.profile, sc.env, sc.gppde);
    save_hyperparams(out / "hyperparams.txt", fit.hyperparams);
    write_csv(out / "estimate.csv", {"beta", "L_m"}, {{num(res.theta[0]), num(res.theta[1])}});
    write_text(out / "diagnostics.txt",
               "ssre = " + num(res.ssre) + "\nssre_init = " + num(res.ssre_init) + "\niterations = " +
                   std::to_string(res.iterations) + "\nconverged = " + (res.converged ? "1" : "0") +
                   "\nclamped = " + std::to_string(res.clamped) + "\n");
    write_text(out / "config_snapshot.txt", cfg.snapshot());
    rr.estimate = res.theta;
    rr.solver_calls = 0;
  } else {
    throw ConfigError("infer: unknown method '" + method + "'");
  }

  rr.ok = true;
  rr.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_results_csv(out / "result.csv", {rr});
  write_provenance(out, "infer --method " + method, seed);
  std::cout << "infer (" << method << "): estimate beta = " << num(rr.estimate[0])
            << ", L_m = " << num(rr.estimate[1]) << " (" << rr.solver_calls << " forward solves, "
            << num(rr.runtime_seconds) << " s)\n";
  return 0;
}

int cmd_experiment(const std::string& spec_path, const fs::path& out, int jobs_flag) {
  Config cfg = Config::parse_file(spec_path);
  ExperimentSpec spec = make_experiment_spec(cfg);
  cfg.finalize();
  if (jobs_flag > 0) {
    spec.jobs = jobs_flag;
  } else if (const char* env = std::getenv("GPCINFER_JOBS")) {
    const int j = std::atoi(env);
    if (j > 0) spec.jobs = j;
  }

  const ExperimentResult res = run_experiment(spec, out);
  write_text(out / "config_snapshot.txt", cfg.snapshot());

  int failed = 0;
  for (const auto& r : res.results) failed += r.ok ? 0 : 1;
  std::cout << "experiment: " << res.results.size() << " runs (" << failed << " failed), tables in "
            << out.string() << "\n";
  std::cout << "method        b      param   mean        rmse        n_ok\n";
  for (const auto& row : res.table) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s  %-5g  %-6s  %-10.4g  %-10.4g  %d\n", row.method.c_str(),
                  row.noise_b, row.param.c_str(), row.mean, row.rmse, row.n_ok);
    std::cout << line;
  }
  return 0;
}

int cmd_plotdata(const std::string& run_dir, const std::string& results_path, const fs::path& out) {
  if (run_dir.empty() && results_path.empty())
    throw ConfigError("plotdata: pass --run and/or --results");
  fs::create_directories(out);

  if (!run_dir.empty()) {
    const fs::path run(run_dir);
    {
      const CsvTable chain = read_csv(run / "chain.csv");
      const int ji = chain.column("iter");
      std::vector<std::vector<std::string>> rows;
      for (const char* param : {"beta", "L_m"}) {
        const int jp = chain.column(param);
        for (const auto& r : chain.rows)
          rows.push_back({r[static_cast<std::size_t>(ji)], param, r[static_cast<std::size_t>(jp)]});
      }
      write_csv(out / "trace.csv", {"iter", "param", "value"}, rows);
    }
    {
      const CsvTable grid = read_csv(run / "kde_grid.csv");
      write_csv(out / "contour.csv", grid.header, grid.rows);
    }
    if (fs::exists(run / "samples.csv")) {
      const CsvTable s = read_csv(run / "samples.csv");
      std::vector<std::vector<std::string>> rows;
      const int jb = s.column("beta"), jl = s.column("L_m"), jw = s.column("weight");
      for (std::size_t i = 0; i < s.rows.size(); ++i)
        rows.push_back({std::to_string(i), s.rows[i][static_cast<std::size_t>(jb)],
                        s.rows[i][static_cast<std::size_t>(jl)], s.rows[i][static_cast<std::size_t>(jw)]});
      write_csv(out / "weights.csv", {"index", "beta", "L_m", "weight"}, rows);
    }
  }

  if (!results_path.empty()) {
    const CsvTable t = read_csv(results_path);
    const int jm = t.column("method"), jb = t.column("b"), jok = t.column("ok");
    const int jest[2] = {t.column("beta_hat"), t.column("L_m_hat")};
    static const char* kParams[2] = {"beta", "L_m"};
    // Group estimates per (method, b, param) and summarize as quartiles.
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> seen;
    for (const auto& r : t.rows) {
      const auto key = std::make_pair(r[static_cast<std::size_t>(jm)], r[static_cast<std::size_t>(jb)]);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);
      for (int p = 0; p < 2; ++p) {
        std::vector<double> v;
        for (const auto& rr : t.rows)
          if (rr[static_cast<std::size_t>(jm)] == key.first &&
              rr[static_cast<std::size_t>(jb)] == key.second && rr[static_cast<std::size_t>(jok)] == "1")
            v.push_back(std::stod(rr[static_cast<std::size_t>(jest[p])]));
        if (v.empty()) continue;
        rows.push_back({key.first, key.second, kParams[p], num(quantile(v, 0.0)), num(quantile(v, 0.25)),
                        num(quantile(v, 0.5)), num(quantile(v, 0.75)), num(quantile(v, 1.0)),
                        std::to_string(v.size())});
      }
    }
    write_csv(out / "boxplot.csv", {"method", "b", "param", "min", "q1", "median", "q3", "max", "n"}, rows);
  }
  std::cout << "plotdata: wrote plot tables to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear-PDE parameter estimation from noisy field observations via "
               "Gaussian-process collocation, importance-sampling correction, and "
               "prior-guided Bayesian optimization; instantiated for unsaturated flow "
               "with root uptake."};
  app.require_subcommand(1);

  std::string config_path, data_path, method, mode, spec_path, run_dir, results_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int jobs = 0;

  auto* sim = app.add_subcommand("simulate", "Solve the forward model and draw a noisy dataset");
  sim->add_option("--config", config_path, "configuration file (defaults describe the 90-day loam study)");
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit-gp", "Fit field-surrogate hyperparameters to a dataset");
  fit->add_option("--config", config_path, "configuration file");
  fit->add_option("--data", data_path, "dataset CSV (z,t,y)")->required();
  fit->add_option("--seed", seed, "random seed");
  fit->add_option("--out", out_dir, "output directory");

  auto* inf = app.add_subcommand("infer", "Estimate the uptake parameters from a dataset");
  inf->add_option("--config", config_path, "configuration file");
  inf->add_option("--data", data_path, "dataset CSV (z,t,y)")->required();
  inf->add_option("--method", method, "gpc-i | bo | bo-gpc | gppde")->required();
  inf->add_option("--seed", seed, "random seed");
  inf->add_option("--out", out_dir, "output directory");

  auto* opt = app.add_subcommand("optimize", "Posterior maximization (objective-based methods)");
  opt->add_option("--config", config_path, "configuration file");
  opt->add_option("--data", data_path, "dataset CSV (z,t,y)")->required();
  opt->add_option("--mode", mode, "bo | bo-gpc | gppde")->required();
  opt->add_option("--seed", seed, "random seed");
  opt->add_option("--out", out_dir, "output directory");

  auto* exp = app.add_subcommand("experiment", "Run a (method x noise x replicate) sweep");
  exp->add_option("--spec", spec_path, "experiment configuration file")->required();
  exp->add_option("--jobs", jobs, "concurrent replicate runs (overrides GPCINFER_JOBS)");
  exp->add_option("--out", out_dir, "output directory");

  auto* plot = app.add_subcommand("plotdata", "Reshape run records into plot-ready CSV tables");
  plot->add_option("--run", run_dir, "inference run directory");
  plot->add_option("--results", results_path, "experiment results.csv for boxplot summaries");
  plot->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (fit->parsed()) return cmd_fit_gp(config_path, data_path, seed, out_dir);
    if (inf->parsed()) return cmd_infer(config_path, data_path, method, seed, out_dir);
    if (opt->parsed()) {
      if (mode != "bo" && mode != "bo-gpc" && mode != "gppde")
        throw ConfigError("optimize: unknown mode '" + mode + "'");
      return cmd_infer(config_path, data_path, mode, seed, out_dir);
    }
    if (exp->parsed()) return cmd_experiment(spec_path, out_dir, jobs);
    if (plot->parsed()) return cmd_plotdata(run_dir, results_path, out_dir);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
