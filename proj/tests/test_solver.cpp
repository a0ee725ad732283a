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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include <gpcinfer/config.hpp>
#include <gpcinfer/scenario.hpp>
#include <gpcinfer/solver.hpp>
#include <gpcinfer/tridiag.hpp>

#include "oracles.hpp"

namespace gpcinfer {
namespace {

SoilLayerParams study_soil() { return {0.156, 0.60, 5.87, 0.273, 6e-6}; }

FeddesParams study_feddes() { return {-0.01, -0.1, -8.0, -80.0}; }

/// Environment with no transpiration, rain, or evaporation: the column only
/// redistributes and drains.
EnvironmentModel quiet_env() {
  RootGrowth growth;
  return EnvironmentModel::constant(0.0, 0.0, 0.0, study_feddes(), growth);
}

/// Environment with a fully developed root zone and constant transpiration.
EnvironmentModel transpiring_env(double t_p = 2.3148e-8) {
  RootGrowth growth;
  EnvironmentModel env = EnvironmentModel::constant(t_p, 0.0, 0.0, study_feddes(), growth);
  env.root_fraction = [](double) { return 1.0; };
  return env;
}

BoundaryConditions sealed_column(const Eigen::VectorXd& initial, bool is_head) {
  BoundaryConditions bc;
  bc.upper_flux = [](double) { return 0.0; };
  bc.lower_mode = BoundaryConditions::Lower::prescribed_flux;
  bc.lower_flux = [](double) { return 0.0; };
  bc.initial = initial;
  bc.initial_is_head = is_head;
  return bc;
}

/// The default 90-day loam study produced by an empty configuration.
Scenario default_study() {
  Config cfg;
  return make_scenario(cfg);
}

// ---------------------------------------------------------------------------
// Tridiagonal solves
// ---------------------------------------------------------------------------

TEST(Tridiag, IdentitySystemReturnsRhs) {
  const Eigen::VectorXd sub = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd dia = Eigen::VectorXd::Ones(5);
  const Eigen::VectorXd sup = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd rhs(5);
  rhs << -2.0, 0.5, 3.25, 7.0, -0.125;
  const Eigen::VectorXd x = thomas_solve(sub, dia, sup, rhs);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x[i], rhs[i]);
}

TEST(Tridiag, HandSolvedThreeByThree) {
  // [ 2 -1  0 ] [1]   [1]
  // [-1  2 -1 ] [1] = [0]
  // [ 0 -1  2 ] [1]   [1]
  Eigen::VectorXd sub(2), dia(3), sup(2), rhs(3);
  sub << -1.0, -1.0;
  dia << 2.0, 2.0, 2.0;
  sup << -1.0, -1.0;
  rhs << 1.0, 0.0, 1.0;
  const Eigen::VectorXd x = thomas_solve(sub, dia, sup, rhs);
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
  EXPECT_NEAR(x[2], 1.0, 1e-14);
}

TEST(Tridiag, MatchesDenseSolverOnRandomDominantSystems) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(3, 101);
    Eigen::VectorXd sub(n - 1), dia(n), sup(n - 1), rhs(n);
    for (int i = 0; i < n - 1; ++i) {
      sub[i] = rng.uniform(-1.0, 1.0);
      sup[i] = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < n; ++i) {
      rhs[i] = rng.uniform(-5.0, 5.0);
      // Strict diagonal dominance keeps both solvers well conditioned.
      const double off = (i > 0 ? std::abs(sub[i - 1]) : 0.0) + (i < n - 1 ? std::abs(sup[i]) : 0.0);
      dia[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (off + rng.uniform(0.5, 2.0));
    }
    const Eigen::VectorXd got = thomas_solve(sub, dia, sup, rhs);
    const Eigen::VectorXd want = oracle::dense_tridiag_solve(sub, dia, sup, rhs);
    const double scale = std::max(1.0, want.lpNorm<Eigen::Infinity>());
    EXPECT_LT((got - want).lpNorm<Eigen::Infinity>() / scale, 1e-10)
        << "trial " << trial << " with n = " << n;
  }
}

TEST(Tridiag, SingularPivotThrows) {
  // Zero leading pivot.
  {
    Eigen::VectorXd sub(1), dia(2), sup(1), rhs(2);
    sub << 1.0;
    dia << 0.0, 1.0;
    sup << 1.0;
    rhs << 1.0, 1.0;
    EXPECT_THROW(thomas_solve(sub, dia, sup, rhs), SingularSystemError);
  }
  // Pivot vanishes during elimination: row 2 becomes 1 - 1 * 1 = 0.
  {
    Eigen::VectorXd sub(1), dia(2), sup(1), rhs(2);
    sub << 1.0;
    dia << 1.0, 1.0;
    sup << 1.0;
    rhs << 1.0, 1.0;
    EXPECT_THROW(thomas_solve(sub, dia, sup, rhs), SingularSystemError);
  }
}

TEST(Tridiag, RejectsInconsistentBandLengths) {
  const Eigen::VectorXd band3 = Eigen::VectorXd::Ones(3);
  const Eigen::VectorXd band2 = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(thomas_solve(band3, band3, band2, band3), InvalidArgumentError);
  EXPECT_THROW(thomas_solve(band2, band3, band2, band2), InvalidArgumentError);
  EXPECT_THROW(thomas_solve(Eigen::VectorXd(), Eigen::VectorXd(), Eigen::VectorXd(), Eigen::VectorXd()),
               InvalidArgumentError);
}

// ---------------------------------------------------------------------------
// Grid and face conductivities
// ---------------------------------------------------------------------------

TEST(Grid, SpacingAndCoordinates) {
  const Grid grid{-0.3, -0.01, 59};
  grid.validate();
  EXPECT_NEAR(grid.dz(), 0.005, 1e-15);
  EXPECT_DOUBLE_EQ(grid.z(0), -0.3);
  EXPECT_NEAR(grid.z(58), -0.01, 1e-15);
  const Eigen::VectorXd z = grid.coordinates();
  ASSERT_EQ(z.size(), 59);
  EXPECT_NEAR(z[29] - z[28], grid.dz(), 1e-15);
}

TEST(Grid, ValidationRejectsDegenerateColumns) {
  EXPECT_THROW((Grid{-0.3, -0.01, 2}).validate(), InvalidArgumentError);
  EXPECT_THROW((Grid{-0.01, -0.3, 10}).validate(), InvalidArgumentError);
  EXPECT_THROW((Grid{-0.3, 0.5, 10}).validate(), InvalidArgumentError);
}

TEST(FaceConductivity, MeansMatchHandValues) {
  const double dz = 0.01;
  EXPECT_DOUBLE_EQ(detail::face_conductivity(1.0, 4.0, -1.0, -1.0, dz, InterblockMean::arithmetic), 2.5);
  EXPECT_DOUBLE_EQ(detail::face_conductivity(1.0, 4.0, -1.0, -1.0, dz, InterblockMean::geometric), 2.0);
}

TEST(FaceConductivity, UpstreamFollowsFluxDirection) {
  const double dz = 0.01;
  // Equal heads: gravity drives water downward, so the upper node is upstream.
  EXPECT_DOUBLE_EQ(detail::face_conductivity(1.0, 4.0, -1.0, -1.0, dz, InterblockMean::upstream), 4.0);
  // Strong capillary pull upward (head rises with depth): lower node upstream.
  EXPECT_DOUBLE_EQ(detail::face_conductivity(1.0, 4.0, -1.0, -1.0 - 2.0 * dz, dz, InterblockMean::upstream), 1.0);
}

// ---------------------------------------------------------------------------
// Single linearized updates
// ---------------------------------------------------------------------------

TEST(PicardStep, HydrostaticEquilibriumIsAFixedPoint) {
  // Total head h + z constant means every face flux and both boundary fluxes
  // vanish, so the linear update must return a zero increment exactly.
  const Grid grid{-0.3, -0.01, 41};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  Eigen::VectorXd h(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) h[i] = -0.5 - grid.z(i);
  Eigen::VectorXd f(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) f[i] = water_content_from_head(h[i], study_soil());

  const BoundaryConditions bc = sealed_column(h, true);
  const PicardStep step =
      picard_step(h, f, 400.0, 400.0, grid, profile, SinkParams{1.9, 1.4}, quiet_env(), bc,
                  InterblockMean::arithmetic);
  EXPECT_LT(step.increment.lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_DOUBLE_EQ(step.g_top, 0.0);
  EXPECT_DOUBLE_EQ(step.g_bottom, 0.0);
  EXPECT_DOUBLE_EQ(step.sink_integral, 0.0);
}

TEST(PicardStep, BoundaryFluxesReportPrescribedAndUnitGradientValues) {
  const Grid grid{-0.3, -0.01, 11};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(grid.nodes, -1.0);
  Eigen::VectorXd f(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) f[i] = water_content_from_head(h[i], study_soil());

  BoundaryConditions bc = sealed_column(h, true);
  bc.upper_flux = [](double t) { return 2e-8 + 1e-9 * t; };
  bc.lower_flux = [](double) { return 3e-9; };
  const PicardStep prescribed = picard_step(h, f, 100.0, 100.0, grid, profile, SinkParams{1.9, 1.4},
                                            quiet_env(), bc, InterblockMean::arithmetic);
  EXPECT_DOUBLE_EQ(prescribed.g_top, 2e-8 + 1e-9 * 100.0);
  EXPECT_DOUBLE_EQ(prescribed.g_bottom, 3e-9);

  bc.lower_mode = BoundaryConditions::Lower::unit_gradient;
  const PicardStep draining = picard_step(h, f, 100.0, 100.0, grid, profile, SinkParams{1.9, 1.4},
                                          quiet_env(), bc, InterblockMean::arithmetic);
  const double k_bottom =
      hydraulic_conductivity(effective_saturation(water_content_from_head(-1.0, study_soil()), study_soil()),
                             study_soil());
  EXPECT_DOUBLE_EQ(draining.g_bottom, k_bottom);
  EXPECT_GT(draining.g_bottom, 0.0);
}

TEST(PicardStep, SinkIntegralMatchesNodalQuadrature) {
  const Grid grid{-0.3, -0.01, 31};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(grid.nodes, -1.0);  // optimal uptake band
  Eigen::VectorXd f(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) f[i] = water_content_from_head(h[i], study_soil());
  const BoundaryConditions bc = sealed_column(h, true);

  const SinkParams theta{1.9, 1.4};
  const EnvironmentModel env = transpiring_env();
  const PicardStep step = picard_step(h, f, 50.0, 50.0, grid, profile, theta, env, bc,
                                      InterblockMean::arithmetic);
  double want = 0.0;
  for (int i = 0; i < grid.nodes; ++i) want += sink(h[i], grid.z(i), 50.0, theta, env);
  want *= grid.dz();
  EXPECT_NEAR(step.sink_integral, want, 1e-18);
  EXPECT_GT(step.sink_integral, 0.0);
}

TEST(PicardStep, RejectsMismatchedStateSizes) {
  const Grid grid{-0.3, -0.01, 11};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(grid.nodes, -1.0);
  const Eigen::VectorXd f_bad = Eigen::VectorXd::Constant(grid.nodes - 1, 0.3);
  const BoundaryConditions bc = sealed_column(h, true);
  EXPECT_THROW(picard_step(h, f_bad, 100.0, 100.0, grid, profile, SinkParams{1.9, 1.4}, quiet_env(),
                           bc, InterblockMean::arithmetic),
               InvalidArgumentError);
}

// ---------------------------------------------------------------------------
// Time integration
// ---------------------------------------------------------------------------

TEST(Solver, HydrostaticColumnStaysAtRest) {
  const Grid grid{-0.3, -0.01, 41};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  Eigen::VectorXd h0(grid.nodes);
  for (int i = 0; i < grid.nodes; ++i) h0[i] = -0.5 - grid.z(i);

  SolverOptions opts;
  opts.t_end = 2.0 * kSecondsPerDay;
  const SolutionField field =
      solve_richards(grid, profile, SinkParams{1.9, 1.4}, quiet_env(), sealed_column(h0, true), opts);

  ASSERT_EQ(field.times.size(), 3u);
  for (int i = 0; i < grid.nodes; ++i)
    EXPECT_NEAR(field.h(i, 2), h0[i], 1e-9) << "node " << i;
  EXPECT_EQ(field.halving_events, 0);
  EXPECT_EQ(field.clamp_events, 0);
  // Every step converges on the first linear solve.
  for (const StepStats& st : field.steps) EXPECT_EQ(st.picard_iterations, 1);
  EXPECT_NEAR(field.storage(2), field.storage(0), 1e-12);
}

TEST(Solver, SealedColumnLosesExactlyTheTranspiredWater) {
  const Grid grid{-0.3, -0.01, 41};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const Eigen::VectorXd f0 = Eigen::VectorXd::Constant(grid.nodes, 0.40);

  SolverOptions opts;
  opts.t_end = 10.0 * kSecondsPerDay;
  const SolutionField field = solve_richards(grid, profile, SinkParams{1.9, 1.4}, transpiring_env(),
                                             sealed_column(f0, false), opts);

  const Eigen::Index last = static_cast<Eigen::Index>(field.times.size()) - 1;
  double transpired = 0.0;
  for (const StepStats& st : field.steps) transpired += st.dt * st.sink_integral;
  EXPECT_GT(transpired, 0.0);
  const double lost = field.storage(0) - field.storage(last);
  EXPECT_GT(lost, 0.0);
  EXPECT_LT(std::abs(lost - transpired) / transpired, 1e-3);

  // Water leaves only through roots, which sit in the upper 1.4 m of soil:
  // here the whole column, so every node dries.
  for (int i = 0; i < grid.nodes; ++i) EXPECT_LT(field.f(i, last), f0[i]);
}

TEST(Solver, StoresDailyColumnsAndUniformSteps) {
  Scenario sc = default_study();
  sc.solver.t_end = 3.0 * kSecondsPerDay;
  const SolutionField field = sc.solve(sc.truth);
  ASSERT_EQ(field.times.size(), 4u);
  for (int d = 0; d <= 3; ++d) EXPECT_NEAR(field.times[d], d * kSecondsPerDay, 1e-6);
  // One day splits into exactly 216 base steps of 400 s.
  ASSERT_EQ(field.steps.size(), 3u * 216u);
  for (const StepStats& st : field.steps) EXPECT_DOUBLE_EQ(st.dt, 400.0);
  EXPECT_EQ(field.f.cols(), 4);
  EXPECT_EQ(field.h.cols(), 4);
}

/// Shared 90-day study run at the true parameters; solved once.
class StudyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scenario_ = new Scenario(default_study());
    field_ = new SolutionField(scenario_->solve(scenario_->truth));
  }
  static void TearDownTestSuite() {
    delete field_;
    delete scenario_;
    field_ = nullptr;
    scenario_ = nullptr;
  }
  static Scenario* scenario_;
  static SolutionField* field_;
};

Scenario* StudyRun::scenario_ = nullptr;
SolutionField* StudyRun::field_ = nullptr;

TEST_F(StudyRun, CompletesWithoutHalvingsOrClamping) {
  EXPECT_EQ(field_->halving_events, 0);
  EXPECT_EQ(field_->clamp_events, 0);
  ASSERT_EQ(field_->times.size(), 91u);
  EXPECT_NEAR(field_->times.back(), 90.0 * kSecondsPerDay, 1e-6);
  EXPECT_EQ(field_->steps.size(), 90u * 216u);
}

TEST_F(StudyRun, ContentsStayWithinRetentionBounds) {
  const SoilLayerParams soil = study_soil();
  EXPECT_GE(field_->f.minCoeff(), soil.c_r);
  EXPECT_LE(field_->f.maxCoeff(), soil.c_s);
}

TEST_F(StudyRun, PerStepMassBalanceIsTight) {
  double worst = 0.0;
  for (const StepStats& st : field_->steps) worst = std::max(worst, st.mass_error_rel);
  EXPECT_LT(worst, 1e-3);
}

TEST_F(StudyRun, CumulativeMassBalanceCloses) {
  double net_flux = 0.0;
  for (const StepStats& st : field_->steps)
    net_flux += st.dt * (st.g_top - st.g_bottom - st.sink_integral);
  const Eigen::Index last = static_cast<Eigen::Index>(field_->times.size()) - 1;
  const double stored = field_->storage(last) - field_->storage(0);
  EXPECT_LT(std::abs(stored - net_flux) / std::abs(field_->storage(0)), 1e-2);
}

TEST_F(StudyRun, ColumnDriesMonotonicallyUnderDrainageAndUptake) {
  // No rain: with free drainage below and roots above, total storage can
  // only decrease between stored columns.
  for (std::size_t j = 1; j < field_->times.size(); ++j)
    EXPECT_LE(field_->storage(static_cast<Eigen::Index>(j)),
              field_->storage(static_cast<Eigen::Index>(j - 1)) + 1e-12)
        << "day " << j;
  // Every observation depth ends drier than it started.
  for (double depth : scenario_->depths)
    EXPECT_LT(field_->content_at(-depth, 90.0 * kSecondsPerDay), field_->content_at(-depth, 0.0))
        << "depth " << depth;
}

TEST_F(StudyRun, NoiselessSamplingReproducesTheFieldExactly) {
  Rng rng(7);
  double sd = -1.0;
  const Dataset ds = sample_observations(*field_, scenario_->design(), 0.0, rng, &sd);
  EXPECT_DOUBLE_EQ(sd, 0.0);
  ASSERT_EQ(ds.y.size(), 540);
  for (Eigen::Index i = 0; i < ds.y.size(); ++i)
    EXPECT_DOUBLE_EQ(ds.y[i], field_->content_at(ds.x(i, 0), ds.x(i, 1)));
}

TEST_F(StudyRun, NoisySamplingIsSeedReproducible) {
  Rng a(123), b(123), c(124);
  const Dataset da = scenario_->observe(*field_, a);
  const Dataset db = scenario_->observe(*field_, b);
  const Dataset dc = scenario_->observe(*field_, c);
  ASSERT_EQ(da.y.size(), db.y.size());
  for (Eigen::Index i = 0; i < da.y.size(); ++i) EXPECT_DOUBLE_EQ(da.y[i], db.y[i]);
  EXPECT_NE((da.y - dc.y).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST_F(StudyRun, NoiseVarianceScalesWithTheFieldVariance) {
  Rng rng(99);
  double sd = 0.0;
  const Dataset noiseless = sample_observations(*field_, scenario_->design(), 0.0, rng);
  sample_observations(*field_, scenario_->design(), 0.05, rng, &sd);
  EXPECT_NEAR(sd, std::sqrt(0.05 * sample_variance(noiseless.y)), 1e-15);
}

// ---------------------------------------------------------------------------
// Observation designs
// ---------------------------------------------------------------------------

TEST(ObservationDesign, LaysOutDaysOuterDepthsInner) {
  const std::vector<double> depths{0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  std::vector<double> days;
  for (int d = 1; d <= 90; ++d) days.push_back(static_cast<double>(d));
  const Eigen::MatrixXd x = observation_design(depths, days);
  ASSERT_EQ(x.rows(), 540);
  ASSERT_EQ(x.cols(), 2);
  // First block: day 1 at each depth, shallow to deep.
  EXPECT_DOUBLE_EQ(x(0, 0), -0.05);
  EXPECT_DOUBLE_EQ(x(0, 1), 86400.0);
  EXPECT_DOUBLE_EQ(x(5, 0), -0.30);
  EXPECT_DOUBLE_EQ(x(5, 1), 86400.0);
  // Row r = 6 * (day - 1) + depth index.
  EXPECT_DOUBLE_EQ(x(6 * 41 + 2, 0), -0.15);
  EXPECT_DOUBLE_EQ(x(6 * 41 + 2, 1), 42.0 * 86400.0);
  EXPECT_DOUBLE_EQ(x(539, 0), -0.30);
  EXPECT_DOUBLE_EQ(x(539, 1), 90.0 * 86400.0);
}

TEST(ObservationDesign, MatchesTheScenarioDesign) {
  const Scenario sc = default_study();
  const Eigen::MatrixXd x = sc.design();
  const Eigen::MatrixXd want = observation_design(sc.depths, sc.days());
  EXPECT_EQ(x.rows(), want.rows());
  EXPECT_DOUBLE_EQ((x - want).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ObservationDesign, RejectsEmptyAxes) {
  EXPECT_THROW(observation_design({}, {1.0}), InvalidArgumentError);
  EXPECT_THROW(observation_design({0.05}, {}), InvalidArgumentError);
}

TEST(ObservationDesign, SamplingValidatesItsArguments) {
  const Scenario sc = default_study();
  SolutionField field;
  field.grid = sc.grid;
  field.times = {0.0};
  field.f = Eigen::MatrixXd::Constant(sc.grid.nodes, 1, 0.3);
  field.h = Eigen::MatrixXd::Constant(sc.grid.nodes, 1, -1.0);
  Rng rng(1);
  const Eigen::MatrixXd one = (Eigen::MatrixXd(1, 2) << -0.05, 0.0).finished();
  EXPECT_THROW(sample_observations(field, Eigen::MatrixXd(0, 2), 0.0, rng), InvalidArgumentError);
  EXPECT_THROW(sample_observations(field, Eigen::MatrixXd::Zero(3, 3), 0.0, rng), InvalidArgumentError);
  EXPECT_THROW(sample_observations(field, one, -0.1, rng), InvalidArgumentError);
}

// ---------------------------------------------------------------------------
// Field interpolation
// ---------------------------------------------------------------------------

TEST(SolutionField, BilinearInterpolationMatchesHandValues) {
  SolutionField field;
  field.grid = Grid{-0.3, -0.1, 3};
  field.times = {0.0, 10.0};
  field.f.resize(3, 2);
  field.f << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  field.h = field.f.array() + 10.0;

  // Exact corners.
  EXPECT_DOUBLE_EQ(field.content_at(-0.3, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(field.content_at(-0.1, 10.0), 6.0);
  EXPECT_DOUBLE_EQ(field.head_at(-0.2, 0.0), 13.0);
  // Midpoint in z at a stored time: average of the two neighbors.
  EXPECT_DOUBLE_EQ(field.content_at(-0.25, 0.0), 2.0);
  // Midpoint in t at a node: average of the two stored columns.
  EXPECT_DOUBLE_EQ(field.content_at(-0.2, 5.0), 3.5);
  // Center of a cell in both axes.
  EXPECT_DOUBLE_EQ(field.content_at(-0.25, 5.0), 2.5);
}

TEST(SolutionField, RejectsQueriesOutsideTheStoredDomain) {
  SolutionField field;
  field.grid = Grid{-0.3, -0.1, 3};
  field.times = {0.0, 10.0};
  field.f = Eigen::MatrixXd::Ones(3, 2);
  field.h = field.f;
  EXPECT_THROW(field.content_at(-0.05, 5.0), InvalidArgumentError);
  EXPECT_THROW(field.content_at(-0.35, 5.0), InvalidArgumentError);
  EXPECT_THROW(field.content_at(-0.2, -1.0), InvalidArgumentError);
  EXPECT_THROW(field.content_at(-0.2, 11.0), InvalidArgumentError);
  SolutionField empty;
  empty.grid = field.grid;
  EXPECT_THROW(empty.content_at(-0.2, 0.0), InvalidArgumentError);
}

TEST(SolutionField, StorageIsTheTrapezoidalColumnIntegral) {
  SolutionField field;
  field.grid = Grid{-0.3, -0.1, 3};
  field.times = {0.0};
  field.f.resize(3, 1);
  field.f << 0.2, 0.3, 0.4;
  field.h = field.f;
  EXPECT_NEAR(field.storage(0), (0.2 + 0.3 + 0.4) * 0.1, 1e-15);
}

// ---------------------------------------------------------------------------
// Step-size control
// ---------------------------------------------------------------------------

/// The study column driven with a base step too large for its Picard budget:
/// early redistribution needs more sweeps than allowed, so the controller
/// must fall back to halved steps and still finish.
struct OverSteppedStudy {
  Scenario sc;
  OverSteppedStudy() : sc(default_study()) {
    sc.solver.dt = 14400.0;  // four hours
    sc.solver.max_picard = 5;
    sc.solver.t_end = 2.0 * kSecondsPerDay;
  }
};

TEST(Solver, HalvesTheStepWhenThePicardBudgetIsTooSmall) {
  OverSteppedStudy over;
  const SolutionField field = over.sc.solve(over.sc.truth);
  EXPECT_GT(field.halving_events, 0);
  ASSERT_EQ(field.times.size(), 3u);
  // The counter and the per-step records agree.
  long from_steps = 0;
  bool saw_reduced_dt = false;
  for (const StepStats& st : field.steps) {
    from_steps += st.halvings;
    saw_reduced_dt = saw_reduced_dt || st.dt < 14400.0 - 1e-9;
    EXPECT_LT(st.mass_error_rel, 1e-3);
  }
  EXPECT_EQ(from_steps, field.halving_events);
  EXPECT_TRUE(saw_reduced_dt);
  // Mass stays closed across the mixed step sizes.
  double net_flux = 0.0;
  for (const StepStats& st : field.steps)
    net_flux += st.dt * (st.g_top - st.g_bottom - st.sink_integral);
  EXPECT_LT(std::abs((field.storage(2) - field.storage(0)) - net_flux) / std::abs(field.storage(0)),
            1e-2);
}

TEST(Solver, ThrowsWithThePartialFieldWhenHalvingIsExhausted) {
  OverSteppedStudy over;
  over.sc.solver.max_picard = 1;  // a single sweep cannot meet the tolerance here
  over.sc.solver.max_halvings = 0;
  try {
    over.sc.solve(over.sc.truth);
    FAIL() << "expected SolverDivergedError";
  } catch (const SolverDivergedError& e) {
    EXPECT_NE(std::string(e.what()).find("no convergence"), std::string::npos);
    ASSERT_EQ(e.partial_field.times.size(), 1u);  // only the initial column
    EXPECT_EQ(e.partial_field.f.cols(), 1);
    // The stored column is the initial content profile f = 0.33 + 0.5 (z + 0.1)^2.
    EXPECT_NEAR(e.partial_field.f(0, 0), 0.33 + 0.5 * 0.04, 1e-12);
  }
}

TEST(Solver, OptionValidationRejectsBadControls) {
  const Grid grid{-0.3, -0.01, 11};
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const BoundaryConditions bc = sealed_column(Eigen::VectorXd::Constant(11, -1.0), true);
  SolverOptions opts;
  opts.dt = -1.0;
  EXPECT_THROW(solve_richards(grid, profile, SinkParams{1.9, 1.4}, quiet_env(), bc, opts),
               InvalidArgumentError);
  opts = SolverOptions{};
  opts.max_picard = 0;
  EXPECT_THROW(solve_richards(grid, profile, SinkParams{1.9, 1.4}, quiet_env(), bc, opts),
               InvalidArgumentError);
  BoundaryConditions no_upper;
  no_upper.initial = Eigen::VectorXd::Constant(11, -1.0);
  EXPECT_THROW(solve_richards(grid, profile, SinkParams{1.9, 1.4}, quiet_env(), no_upper,
                              SolverOptions{}),
               InvalidArgumentError);
}

// ---------------------------------------------------------------------------
// Spatial accuracy
// ---------------------------------------------------------------------------

TEST(Solver, RefinementConvergesTowardTheFineGridSolution) {
  // Same column at four nested resolutions, probed at a shared node after one
  // day. The error against the finest grid must fall at least linearly in dz.
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const SinkParams theta{1.9, 1.4};
  const EnvironmentModel env = transpiring_env();

  const auto run = [&](int nodes) {
    const Grid grid{-0.3, -0.01, nodes};
    BoundaryConditions bc;
    bc.upper_flux = [](double) { return 0.0; };
    bc.lower_mode = BoundaryConditions::Lower::unit_gradient;
    bc.initial = detail::quadratic_initial_content(grid, 0.33, 0.5, -0.1);
    bc.initial_is_head = false;
    SolverOptions opts;
    opts.dt = 100.0;
    opts.t_end = kSecondsPerDay;
    const SolutionField field = solve_richards(grid, profile, theta, env, bc, opts);
    return field.content_at(-0.15, kSecondsPerDay);
  };

  const double reference = run(233);
  const double e_coarse = std::abs(run(30) - reference);
  const double e_mid = std::abs(run(59) - reference);
  const double e_fine = std::abs(run(117) - reference);
  EXPECT_GT(e_coarse, e_mid);
  EXPECT_GT(e_mid, e_fine);
  EXPECT_GE(e_coarse / e_fine, 3.0) << "coarse " << e_coarse << " fine " << e_fine;
}

TEST(Solver, InterblockMeansAgreeOnSmoothFields) {
  // Away from sharp fronts the three face averages give nearly the same
  // solution; this guards against a mean being wired to the wrong nodes.
  const SoilProfile profile = SoilProfile::uniform(study_soil(), 1.0);
  const Grid grid{-0.3, -0.01, 59};
  const auto run = [&](InterblockMean mean) {
    BoundaryConditions bc;
    bc.upper_flux = [](double) { return 0.0; };
    bc.lower_mode = BoundaryConditions::Lower::unit_gradient;
    bc.initial = detail::quadratic_initial_content(grid, 0.33, 0.5, -0.1);
    bc.initial_is_head = false;
    SolverOptions opts;
    opts.t_end = 2.0 * kSecondsPerDay;
    opts.interblock = mean;
    const SolutionField field =
        solve_richards(grid, profile, SinkParams{1.9, 1.4}, transpiring_env(), bc, opts);
    return field.content_at(-0.15, opts.t_end);
  };
  const double arith = run(InterblockMean::arithmetic);
  const double geom = run(InterblockMean::geometric);
  const double up = run(InterblockMean::upstream);
  EXPECT_NEAR(geom, arith, 5e-4);
  EXPECT_NEAR(up, arith, 5e-3);
}

}  // namespace
}  // namespace gpcinfer
