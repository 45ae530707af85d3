#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace evogan;
using evogan::reference::ReplayPopulation;
using evogan::reference::ReplayReport;

namespace {

ReplayPopulation two_members() {
  ReplayPopulation pop;
  Eigen::RowVectorXf a(3);
  a << 0.0f, 0.5f, -0.5f;
  Eigen::RowVectorXf b(3);
  b << 1.0f, -1.0f, 0.25f;
  pop.chromosomes = {a, b};
  pop.fitness = {0.2f, 0.8f};
  return pop;
}

} // namespace

TEST(Replay, EmptyTraceLeavesPopulationUnchanged) {
  const auto pop = two_members();
  ReplayReport report;
  const auto out = reference::reference_ga_step(pop, EvolveTrace{}, true, 0.1, -1.0, 1.0, &report);
  EXPECT_TRUE(report.ok);
  EXPECT_EQ(out.fitness, pop.fitness);
  EXPECT_EQ(out.chromosomes[0], pop.chromosomes[0]);
}

TEST(Replay, SingleCrossoverReplacesWorst) {
  EvolveTrace trace;
  ChildRecord child;
  child.selection_draws = {0.1, 0.9}; // total 1.0: 0.1 picks member 0, 0.9 member 1
  child.parents = {0, 1};
  child.alpha = 0.5;
  child.fitness = 0.5;
  child.replaced = 0;
  trace.generations.push_back({{child}});
  ReplayReport report;
  const auto out = reference::reference_ga_step(two_members(), trace, true, 0.0, -1.0, 1.0, &report);
  EXPECT_TRUE(report.ok) << report.divergence;
  EXPECT_FLOAT_EQ(out.chromosomes[0](0), 0.5f);
  EXPECT_FLOAT_EQ(out.chromosomes[0](1), -0.25f);
  EXPECT_FLOAT_EQ(out.chromosomes[0](2), -0.125f);
  EXPECT_FLOAT_EQ(out.fitness[0], 0.5f);
}

TEST(Replay, DetectsWrongParent) {
  EvolveTrace trace;
  ChildRecord child;
  child.selection_draws = {0.1};
  child.parents = {1};
  child.fitness = 0.1;
  trace.generations.push_back({{child}});
  ReplayReport report;
  (void)reference::reference_ga_step(two_members(), trace, false, 0.0, -1.0, 1.0, &report);
  EXPECT_FALSE(report.ok);
  EXPECT_NE(report.divergence.find("roulette"), std::string::npos) << report.divergence;
}

TEST(Replay, DetectsWrongReplacement) {
  EvolveTrace trace;
  ChildRecord child;
  child.selection_draws = {0.5};
  child.parents = {1};
  child.fitness = 0.1; // weaker than both members
  child.replaced = 0;
  trace.generations.push_back({{child}});
  ReplayReport report;
  (void)reference::reference_ga_step(two_members(), trace, false, 0.0, -1.0, 1.0, &report);
  EXPECT_FALSE(report.ok);
}

TEST(Replay, MutationDeltasAreClamped) {
  EvolveTrace trace;
  ChildRecord child;
  child.selection_draws = {0.95};
  child.parents = {1};
  child.mutation_draws = {0.01, 0.9, 0.01};
  child.mutation_deltas = {0.5, 2.0};
  child.fitness = 0.9;
  child.replaced = 0;
  trace.generations.push_back({{child}});
  ReplayReport report;
  const auto out = reference::reference_ga_step(two_members(), trace, false, 0.05, -1.0, 1.0, &report);
  EXPECT_TRUE(report.ok) << report.divergence;
  EXPECT_FLOAT_EQ(out.chromosomes[0](0), 1.0f);
  EXPECT_FLOAT_EQ(out.chromosomes[0](1), -1.0f);
  EXPECT_FLOAT_EQ(out.chromosomes[0](2), 1.0f);
}

TEST(Replay, EngineRunsReplayExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto outcome = testkit::replay_random_run(seed, 100);
    EXPECT_TRUE(outcome.decisions.ok) << "seed " << seed << ": " << outcome.decisions.divergence;
    EXPECT_TRUE(outcome.result.ok) << "seed " << seed << ": " << outcome.result.divergence;
  }
}

TEST(ReferenceFrechet, ScalarCase) {
  // 1-d Gaussians: (m1 - m2)^2 + (s1 - s2)^2 with s the standard deviations.
  Eigen::VectorXd ma(1);
  Eigen::VectorXd mb(1);
  ma << 1.0;
  mb << 3.0;
  Eigen::MatrixXd sa(1, 1);
  Eigen::MatrixXd sb(1, 1);
  sa << 4.0;
  sb << 9.0;
  EXPECT_NEAR(reference::reference_frechet(ma, sa, mb, sb), 4.0 + 1.0, 1e-12);
}

TEST(ReferenceFrechet, CommutingDiagonals) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd sa = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
  Eigen::MatrixXd sb = Eigen::Vector3d(4.0, 4.0, 1.0).asDiagonal();
  // sum (sqrt(a) - sqrt(b))^2 = 1 + 0 + 4
  EXPECT_NEAR(reference::reference_frechet(m, sa, m, sb), 5.0, 1e-12);
}

TEST(ReferenceLosses, MinimaxValueAtHalf) {
  reference::LossCase c;
  c.d_real = {0.5, 0.5};
  c.d_fake = {0.5, 0.5};
  const auto v = reference::reference_losses(c);
  EXPECT_NEAR(v.d_loss, 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(v.g_loss, std::log(2.0), 1e-15);
}

TEST(ReferenceMi, PerfectPredictionIsZero) {
  reference::MiCase c;
  c.n_classes = 2;
  c.onehots = {{1.0, 0.0}};
  c.logits = {{30.0, -30.0}};
  c.codes = {{0.3}};
  c.means = {{0.3}};
  const auto v = reference::reference_mi(c);
  EXPECT_NEAR(v.categorical, 0.0, 1e-12);
  EXPECT_NEAR(v.continuous, 0.0, 1e-15);
}
