#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "evogan/networks.hpp"

namespace evogan {

struct GAConfig {
  int generations = 3;
  double mutation_rate = 0.10;
  double mutation_scale = 0.05;
  bool crossover_enabled = true;
  /// Children bred per generation; a negative value means half the population.
  int offspring_per_generation = -1;
  double clamp_low = -1.0;
  double clamp_high = 1.0;

  void validate() const;
  [[nodiscard]] int offspring_for(Eigen::Index population_size) const;
};

template <typename Scalar>
struct Individual {
  RowVector<Scalar> chromosome;
  std::optional<Scalar> fitness;
};

template <typename Scalar>
struct Population {
  ImageShape shape;
  std::vector<Individual<Scalar>> individuals;

  [[nodiscard]] std::size_t size() const { return individuals.size(); }

  [[nodiscard]] ImageBatch<Scalar> to_images() const {
    ImageBatch<Scalar> out(shape, static_cast<Eigen::Index>(individuals.size()));
    for (std::size_t i = 0; i < individuals.size(); ++i) {
      out.pixels.row(static_cast<Eigen::Index>(i)) = individuals[i].chromosome;
    }
    return out;
  }

  [[nodiscard]] Scalar fitness(std::size_t i) const {
    if (!individuals[i].fitness) {
      throw std::logic_error("population: fitness of individual " + std::to_string(i) + " is unset");
    }
    return *individuals[i].fitness;
  }
};

/// Per-generation fitness summary (generation 0 is the initial population).
struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double min = 0.0;
};

/// Every random draw and decision made while breeding one child.
struct ChildRecord {
  std::vector<double> selection_draws; // uniform on [0, 1), one per parent
  std::vector<int> parents;
  std::optional<double> alpha;
  std::vector<double> mutation_draws; // uniform on [0, 1), one per gene
  std::vector<double> mutation_deltas; // one per mutated gene, in gene order
  double fitness = 0.0;
  std::optional<std::size_t> replaced;
};

struct GenerationRecord {
  std::vector<ChildRecord> children;
};

struct EvolveTrace {
  std::vector<GenerationRecord> generations;
};

template <typename Scalar>
struct EvolveResult {
  ImageBatch<Scalar> images; // sorted by descending fitness
  Vector<Scalar> fitness;
  std::vector<GenerationStats> stats;
};

template <typename Scalar>
using FitnessFn = std::function<Vector<Scalar>(const ImageBatch<Scalar> &)>;

/// Realness score of a frozen discriminator.
template <typename Scalar>
FitnessFn<Scalar> discriminator_fitness(const Discriminator<Scalar> &d) {
  return [&d](const ImageBatch<Scalar> &images) { return d.forward(images).realness; };
}

/// Number of evolve() invocations in this process.
std::int64_t evolve_call_count();
void count_evolve_call();

template <typename Scalar>
Population<Scalar> init_population(const ImageBatch<Scalar> &fake_images) {
  if (fake_images.batch() == 0) {
    throw std::invalid_argument("init_population: empty image batch");
  }
  Population<Scalar> pop;
  pop.shape = fake_images.shape;
  pop.individuals.reserve(static_cast<std::size_t>(fake_images.batch()));
  for (Eigen::Index i = 0; i < fake_images.batch(); ++i) {
    pop.individuals.push_back({fake_images.pixels.row(i), std::nullopt});
  }
  return pop;
}

template <typename Scalar>
void evaluate_fitness(Population<Scalar> &pop, const FitnessFn<Scalar> &fitness) {
  const Vector<Scalar> scores = fitness(pop.to_images());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    pop.individuals[i].fitness = scores(static_cast<Eigen::Index>(i));
  }
}

template <typename Scalar>
void evaluate_fitness(Population<Scalar> &pop, const Discriminator<Scalar> &d) {
  evaluate_fitness(pop, discriminator_fitness(d));
}

/// Fitness-proportional draws with replacement. An all-zero fitness sum falls
/// back to uniform selection.
template <typename Scalar, typename Rng>
std::vector<int> roulette_select(const Population<Scalar> &pop, int n_parents, Rng &rng,
                                 std::vector<double> *draws = nullptr) {
  const std::size_t n = pop.size();
  if (n == 0) {
    throw std::invalid_argument("roulette_select: empty population");
  }
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = static_cast<double>(pop.fitness(i));
    if (!(f >= 0.0)) {
      throw std::invalid_argument("roulette_select: fitness must be non-negative");
    }
    total += f;
    cumulative[i] = total;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(n_parents));
  for (int k = 0; k < n_parents; ++k) {
    const double u = uniform(rng);
    if (draws != nullptr) {
      draws->push_back(u);
    }
    std::size_t idx = 0;
    if (total > 0.0) {
      const double target = u * total;
      idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), target) -
                                     cumulative.begin());
      // Rounding can push the target past the last boundary.
      if (idx >= n) {
        idx = n - 1;
        while (pop.fitness(idx) <= Scalar(0)) {
          --idx;
        }
      }
    } else {
      idx = std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
    }
    selected.push_back(static_cast<int>(idx));
  }
  return selected;
}

/// alpha * parent_a + (1 - alpha) * parent_b, elementwise.
template <typename Scalar>
RowVector<Scalar> arithmetic_crossover(const RowVector<Scalar> &parent_a, const RowVector<Scalar> &parent_b,
                                       double alpha) {
  if (parent_a.size() != parent_b.size()) {
    throw ShapeError("arithmetic_crossover: parents differ in length");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("arithmetic_crossover: alpha must lie in [0, 1]");
  }
  const auto a = static_cast<Scalar>(alpha);
  return a * parent_a + (Scalar(1) - a) * parent_b;
}

/// Adds N(0, scale^2) noise to each gene with probability `rate`, then clamps.
/// Genes that are not selected keep their exact bits.
template <typename Scalar, typename Rng>
RowVector<Scalar> mutate(const RowVector<Scalar> &chromosome, double rate, double scale, Rng &rng,
                         ChildRecord *record = nullptr, double clamp_low = -1.0, double clamp_high = 1.0) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("mutate: rate must lie in [0, 1]");
  }
  if (rate > 0.0 && !(scale > 0.0)) {
    throw std::invalid_argument("mutate: scale must be positive");
  }
  RowVector<Scalar> out = chromosome;
  if (rate == 0.0) {
    return out;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, scale);
  const auto lo = static_cast<Scalar>(clamp_low);
  const auto hi = static_cast<Scalar>(clamp_high);
  for (Eigen::Index g = 0; g < out.size(); ++g) {
    const double u = uniform(rng);
    if (record != nullptr) {
      record->mutation_draws.push_back(u);
    }
    if (u < rate) {
      const double delta = noise(rng);
      if (record != nullptr) {
        record->mutation_deltas.push_back(delta);
      }
      out(g) = std::clamp(static_cast<Scalar>(out(g) + static_cast<Scalar>(delta)), lo, hi);
    }
  }
  return out;
}

/// Index of the least fit individual; ties go to the lowest index.
template <typename Scalar>
std::size_t least_fit_index(const Population<Scalar> &pop) {
  std::size_t worst = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    if (pop.fitness(i) < pop.fitness(worst)) {
      worst = i;
    }
  }
  return worst;
}

/// Replaces the least fit member when the child is strictly fitter.
/// Returns the replaced index, if any.
template <typename Scalar>
std::optional<std::size_t> replace_least_fit(Population<Scalar> &pop, const RowVector<Scalar> &child,
                                             Scalar child_fitness) {
  if (pop.size() == 0) {
    return std::nullopt;
  }
  const std::size_t worst = least_fit_index(pop);
  if (!(child_fitness > pop.fitness(worst))) {
    return std::nullopt;
  }
  pop.individuals[worst] = {child, child_fitness};
  return worst;
}

template <typename Scalar>
GenerationStats summarize(const Population<Scalar> &pop, int generation) {
  GenerationStats s;
  s.generation = generation;
  s.best = -std::numeric_limits<double>::infinity();
  s.min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto f = static_cast<double>(pop.fitness(i));
    s.best = std::max(s.best, f);
    s.min = std::min(s.min, f);
    s.mean += f;
  }
  s.mean /= static_cast<double>(pop.size());
  return s;
}

/// Population sorted by descending fitness (stable, so ties keep their order).
template <typename Scalar>
EvolveResult<Scalar> sorted_result(const Population<Scalar> &pop) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&pop](std::size_t a, std::size_t b) { return pop.fitness(a) > pop.fitness(b); });
  EvolveResult<Scalar> out;
  out.images = ImageBatch<Scalar>(pop.shape, static_cast<Eigen::Index>(pop.size()));
  out.fitness.resize(static_cast<Eigen::Index>(pop.size()));
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.images.pixels.row(static_cast<Eigen::Index>(r)) = pop.individuals[order[r]].chromosome;
    out.fitness(static_cast<Eigen::Index>(r)) = pop.fitness(order[r]);
  }
  return out;
}

/// Breeds one generation: all children are drawn from the population as it
/// stood at the start of the generation, scored in one batch, then offered to
/// replace_least_fit in breeding order.
template <typename Scalar, typename Rng>
void evolve_generation(Population<Scalar> &pop, const FitnessFn<Scalar> &fitness, const GAConfig &config,
                       Rng &rng, GenerationRecord *record) {
  const int offspring = config.offspring_for(static_cast<Eigen::Index>(pop.size()));
  if (offspring == 0) {
    return;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ImageBatch<Scalar> children(pop.shape, offspring);
  std::vector<ChildRecord> records(static_cast<std::size_t>(offspring));
  for (int c = 0; c < offspring; ++c) {
    ChildRecord &rec = records[static_cast<std::size_t>(c)];
    RowVector<Scalar> child;
    if (config.crossover_enabled) {
      rec.parents = roulette_select(pop, 2, rng, &rec.selection_draws);
      rec.alpha = uniform(rng);
      child = arithmetic_crossover(pop.individuals[static_cast<std::size_t>(rec.parents[0])].chromosome,
                                   pop.individuals[static_cast<std::size_t>(rec.parents[1])].chromosome,
                                   *rec.alpha);
    } else {
      rec.parents = roulette_select(pop, 1, rng, &rec.selection_draws);
      child = pop.individuals[static_cast<std::size_t>(rec.parents[0])].chromosome;
    }
    children.pixels.row(c) = mutate(child, config.mutation_rate, config.mutation_scale, rng,
                                    record != nullptr ? &rec : nullptr, config.clamp_low, config.clamp_high);
  }
  const Vector<Scalar> scores = fitness(children);
  for (int c = 0; c < offspring; ++c) {
    ChildRecord &rec = records[static_cast<std::size_t>(c)];
    rec.fitness = static_cast<double>(scores(c));
    rec.replaced = replace_least_fit<Scalar>(pop, children.pixels.row(c), scores(c));
  }
  if (record != nullptr) {
    record->children = std::move(records);
  }
}

/// Runs `config.generations` rounds of selection, optional arithmetic
/// crossover, mutation and elitist replacement over the fake images, scoring
/// with a frozen fitness function. The result is detached from any graph.
template <typename Scalar, typename Rng>
EvolveResult<Scalar> evolve(const ImageBatch<Scalar> &fake_images, const FitnessFn<Scalar> &fitness,
                            const GAConfig &config, Rng &rng, EvolveTrace *trace = nullptr) {
  config.validate();
  count_evolve_call();
  Population<Scalar> pop = init_population(fake_images);
  evaluate_fitness(pop, fitness);
  std::vector<GenerationStats> stats{summarize(pop, 0)};
  for (int gen = 1; gen <= config.generations; ++gen) {
    GenerationRecord record;
    evolve_generation(pop, fitness, config, rng, trace != nullptr ? &record : nullptr);
    if (trace != nullptr) {
      trace->generations.push_back(std::move(record));
    }
    stats.push_back(summarize(pop, gen));
  }
  EvolveResult<Scalar> out = sorted_result(pop);
  out.stats = std::move(stats);
  return out;
}

template <typename Scalar, typename Rng>
EvolveResult<Scalar> evolve(const ImageBatch<Scalar> &fake_images, const Discriminator<Scalar> &d,
                            const GAConfig &config, Rng &rng, EvolveTrace *trace = nullptr) {
  return evolve(fake_images, discriminator_fitness(d), config, rng, trace);
}

} // namespace evogan
