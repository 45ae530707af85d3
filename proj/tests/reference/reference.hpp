#pragma once

// Test-side oracles. Nothing here calls into the losses, metrics, ga_engine
// or training arithmetic it is used to check.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evogan/config.hpp"
#include "evogan/ga_engine.hpp"
#include "evogan/networks.hpp"

namespace evogan::reference {

// Losses

struct LossCase {
  std::vector<double> d_real;
  std::vector<double> d_fake;
  double mi_bound = 0.0;
  double lambda = 0.0;
};

struct LossValues {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

LossValues reference_losses(const LossCase &c);

/// Categorical log-likelihood of the true class plus -0.5 squared error of
/// the continuous codes, averaged over rows. Rows are plain vectors.
struct MiCase {
  std::vector<std::vector<double>> onehots;   // per row, n_categorical * n_classes
  std::vector<std::vector<double>> logits;    // same layout
  std::vector<std::vector<double>> codes;     // continuous codes per row
  std::vector<std::vector<double>> means;     // predicted means per row
  int n_classes = 0;
};

struct MiValues {
  double categorical = 0.0;
  double continuous = 0.0;
};

MiValues reference_mi(const MiCase &c);

// Frechet distance

/// ||mu_a - mu_b||^2 + tr(Sa) + tr(Sb) - 2 sum sqrt(eig(Sa Sb)) evaluated in
/// long double through a general (non-symmetric) eigensolver. Throws
/// std::invalid_argument for non-SPD input.
double reference_frechet(const Eigen::VectorXd &mu_a, const Eigen::MatrixXd &sigma_a, const Eigen::VectorXd &mu_b,
                         const Eigen::MatrixXd &sigma_b);

// GA trace replay

struct ReplayPopulation {
  std::vector<Eigen::RowVectorXf> chromosomes;
  std::vector<float> fitness;
};

struct ReplayReport {
  bool ok = true;
  std::string divergence; // first mismatch, empty when ok
};

/// Applies the recorded generations to `initial` by the literal rules:
/// roulette from the recorded uniforms, convex blend with the recorded alpha,
/// additive mutation from the recorded draws and clamp, then replacement of
/// the lowest-index least-fit member by a strictly fitter child. Every
/// recorded decision is checked against the rule.
ReplayPopulation reference_ga_step(const ReplayPopulation &initial, const EvolveTrace &trace, bool crossover,
                                   double mutation_rate, double clamp_low, double clamp_high,
                                   ReplayReport *report);

/// Orders a replayed population by descending fitness (ties keep index order).
ReplayPopulation sorted_by_fitness(const ReplayPopulation &pop);

/// Compares a replay with engine output gene by gene.
ReplayReport compare_with_engine(const ReplayPopulation &replay, const EvolveResult<float> &engine);

// Hand-stepped trainer

struct ReferenceStep {
  double d_loss = 0.0;
  double g_loss = 0.0;
  std::vector<Eigen::MatrixXd> generator_params;
  std::vector<Eigen::MatrixXd> discriminator_params;
};

/// One baseline iteration on a tiny network, without the training module:
/// finite-difference gradients and textbook Adam. Requires both lambdas to be
/// zero, so only the adversarial terms move parameters.
ReferenceStep reference_train_step(const TrainingConfig &config, const RowBatch<double> &real_pixels);

/// Networks used by the reference step, initialised like a training run.
struct ToyNetworks {
  explicit ToyNetworks(const TrainingConfig &config);
  Generator<double> generator;
  Discriminator<double> discriminator;
};

} // namespace evogan::reference
