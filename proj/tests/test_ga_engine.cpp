#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <array>
#include <cstring>
#include <random>

#include "evogan/ga_engine.hpp"
#include "support.hpp"

using namespace evogan;

namespace {

Population<double> population_with(std::initializer_list<double> fitness) {
  Population<double> pop;
  pop.shape = {1, 1, 2};
  int k = 0;
  for (double f : fitness) {
    RowVector<double> c(2);
    c << k, -k;
    pop.individuals.push_back({c, f});
    ++k;
  }
  return pop;
}

std::vector<double> fitness_of(const Population<double> &pop) {
  std::vector<double> out;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    out.push_back(pop.fitness(i));
  }
  return out;
}

// Fitness = mean pixel mapped into (0, 1); cheap and deterministic.
Vector<double> mean_pixel_fitness(const ImageBatch<double> &images) {
  return ((images.pixels.rowwise().mean().array() + 1.0) * 0.49 + 0.01).matrix();
}

ImageBatch<double> random_images(std::mt19937_64 &rng, ImageShape shape, Eigen::Index n) {
  std::uniform_real_distribution<double> pixel(-1.0, 1.0);
  ImageBatch<double> out(shape, n);
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) {
    out.pixels.data()[i] = pixel(rng);
  }
  return out;
}

} // namespace

TEST(InitPopulation, OneIndividualPerImage) {
  std::mt19937_64 rng(1);
  const auto images = random_images(rng, {3, 28, 28}, 64);
  const auto pop = init_population(images);
  ASSERT_EQ(pop.size(), 64u);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    EXPECT_FALSE(pop.individuals[i].fitness.has_value());
    EXPECT_EQ(pop.individuals[i].chromosome, images.pixels.row(static_cast<Eigen::Index>(i)));
  }
  EXPECT_EQ(pop.to_images().pixels, images.pixels);
}

TEST(InitPopulation, EmptyBatchRejected) {
  EXPECT_THROW(init_population(ImageBatch<double>({3, 28, 28}, 0)), std::invalid_argument);
}

TEST(EvaluateFitness, MatchesDirectDiscriminatorCall) {
  std::mt19937_64 rng(2);
  auto config = testkit::toy_config();
  Discriminator<double> d(config.network);
  d.init(rng);
  auto images = random_images(rng, config.network.image, 6);
  images.pixels.row(5) = images.pixels.row(0);
  auto pop = init_population(images);
  evaluate_fitness(pop, d);
  const auto direct = d.forward(images).realness;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double f = pop.fitness(i);
    EXPECT_GT(f, 0.0);
    EXPECT_LT(f, 1.0);
    EXPECT_NEAR(f, direct(static_cast<Eigen::Index>(i)), 1e-6);
  }
  EXPECT_EQ(pop.fitness(0), pop.fitness(5));
}

TEST(RouletteSelect, FrequenciesFollowFitness) {
  std::mt19937_64 rng(3);
  const auto pop = population_with({1, 2, 3});
  const int draws = 100000;
  const auto picks = roulette_select(pop, draws, rng);
  std::array<int, 3> counts{};
  for (int i : picks) {
    ++counts[static_cast<std::size_t>(i)];
  }
  const double expected[3] = {1.0 / 6, 2.0 / 6, 3.0 / 6};
  double chi2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(counts[k] / double(draws), expected[k], 0.01);
    const double e = expected[k] * draws;
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), chi2));
  EXPECT_GT(p, 0.01) << "chi2 = " << chi2;
}

TEST(RouletteSelect, EqualFitnessIsUniform) {
  std::mt19937_64 rng(4);
  const auto pop = population_with({1, 1, 1, 1});
  std::array<int, 4> counts{};
  for (int i : roulette_select(pop, 40000, rng)) {
    ++counts[static_cast<std::size_t>(i)];
  }
  for (int c : counts) {
    EXPECT_NEAR(c / 40000.0, 0.25, 0.01);
  }
}

TEST(RouletteSelect, SingleIndividualAlwaysChosen) {
  std::mt19937_64 rng(5);
  for (int i : roulette_select(population_with({0.3}), 100, rng)) {
    EXPECT_EQ(i, 0);
  }
}

TEST(RouletteSelect, ZeroFitnessNeverChosenAndAllZeroIsUniform) {
  std::mt19937_64 rng(6);
  for (int i : roulette_select(population_with({0.0, 1.0, 0.0}), 1000, rng)) {
    EXPECT_EQ(i, 1);
  }
  std::array<int, 2> counts{};
  for (int i : roulette_select(population_with({0.0, 0.0}), 10000, rng)) {
    ++counts[static_cast<std::size_t>(i)];
  }
  EXPECT_NEAR(counts[0] / 10000.0, 0.5, 0.02);
}

TEST(ArithmeticCrossover, HandExamples) {
  RowVector<double> a(2);
  RowVector<double> b(2);
  a << 1, -1;
  b << -1, 1;
  const auto child = arithmetic_crossover(a, b, 0.3);
  EXPECT_NEAR(child(0), -0.4, 1e-15);
  EXPECT_NEAR(child(1), 0.4, 1e-15);
  EXPECT_EQ(arithmetic_crossover(a, b, 1.0), a);
  EXPECT_EQ(arithmetic_crossover(a, a, 0.7), a);
}

TEST(ArithmeticCrossover, LengthMismatchRejected) {
  EXPECT_THROW(arithmetic_crossover<double>(RowVector<double>::Zero(2), RowVector<double>::Zero(3), 0.5), ShapeError);
}

TEST(ArithmeticCrossover, ChildWithinParentInterval) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    RowVector<float> a = RowVector<float>::Random(50);
    RowVector<float> b = RowVector<float>::Random(50);
    const auto child = arithmetic_crossover(a, b, u(rng));
    for (Eigen::Index g = 0; g < 50; ++g) {
      EXPECT_GE(child(g), std::min(a(g), b(g)));
      EXPECT_LE(child(g), std::max(a(g), b(g)));
    }
  }
}

TEST(Mutate, RateZeroIsIdentity) {
  std::mt19937_64 rng(8);
  const RowVector<float> c = RowVector<float>::Random(100);
  EXPECT_EQ(mutate(c, 0.0, 0.05, rng), c);
}

TEST(Mutate, TinyScaleStaysClose) {
  std::mt19937_64 rng(9);
  const RowVector<double> c = RowVector<double>::Random(100) * 0.9;
  const auto m = mutate(c, 1.0, 1e-12, rng);
  EXPECT_LT((m - c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Mutate, ChangedFractionAndLocality) {
  std::mt19937_64 rng(10);
  const RowVector<float> c = RowVector<float>::Random(100000) * 0.5f;
  ChildRecord rec;
  const auto m = mutate(c, 0.1, 0.05, rng, &rec);
  int changed = 0;
  for (Eigen::Index g = 0; g < c.size(); ++g) {
    const bool selected = rec.mutation_draws[static_cast<std::size_t>(g)] < 0.1;
    if (!selected) {
      // Bit-identical, not merely close.
      ASSERT_EQ(std::memcmp(&m(g), &c(g), sizeof(float)), 0) << "gene " << g;
    }
    changed += m(g) != c(g) ? 1 : 0;
  }
  EXPECT_NEAR(changed / 100000.0, 0.10, 0.006);
}

TEST(Mutate, ClampsToRange) {
  std::mt19937_64 rng(11);
  const RowVector<double> c = RowVector<double>::Constant(1000, 0.99);
  const auto m = mutate(c, 1.0, 5.0, rng);
  EXPECT_LE(m.maxCoeff(), 1.0);
  EXPECT_GE(m.minCoeff(), -1.0);
}

TEST(ReplaceLeastFit, Rules) {
  RowVector<double> child(2);
  child << 9, 9;
  auto pop = population_with({0.2, 0.9});
  EXPECT_EQ(replace_least_fit(pop, child, 0.5), std::optional<std::size_t>(0));
  EXPECT_EQ(fitness_of(pop), (std::vector<double>{0.5, 0.9}));
  EXPECT_EQ(pop.individuals[0].chromosome, child);

  auto below = population_with({0.3, 0.6});
  EXPECT_FALSE(replace_least_fit(below, child, 0.1));
  EXPECT_EQ(fitness_of(below), (std::vector<double>{0.3, 0.6}));

  auto equal = population_with({0.3, 0.6});
  EXPECT_FALSE(replace_least_fit(equal, child, 0.3));
  EXPECT_EQ(equal.individuals[0].chromosome(0), 0.0);

  auto tie = population_with({0.7, 0.2, 0.2});
  EXPECT_EQ(replace_least_fit(tie, child, 0.4), std::optional<std::size_t>(1));
}

TEST(Evolve, NoOpConfigurationReordersByFitness) {
  std::mt19937_64 rng(12);
  const auto images = random_images(rng, {3, 4, 4}, 10);
  GAConfig ga;
  ga.generations = 1;
  ga.mutation_rate = 0.0;
  ga.crossover_enabled = false;
  ga.offspring_per_generation = 0;
  const auto out = evolve<double>(images, mean_pixel_fitness, ga, rng);
  const auto scores = mean_pixel_fitness(images);
  ASSERT_EQ(out.images.batch(), 10);
  for (Eigen::Index r = 0; r < 10; ++r) {
    if (r > 0) {
      EXPECT_GE(out.fitness(r - 1), out.fitness(r));
    }
    Eigen::Index source = -1;
    for (Eigen::Index s = 0; s < 10; ++s) {
      if (images.pixels.row(s) == out.images.pixels.row(r)) {
        source = s;
      }
    }
    ASSERT_GE(source, 0);
    EXPECT_EQ(out.fitness(r), scores(source));
  }
}

TEST(Evolve, PreservesBatchSizeAndRange) {
  std::mt19937_64 rng(13);
  const auto images = random_images(rng, {3, 4, 4}, 9);
  GAConfig ga;
  ga.generations = 5;
  ga.mutation_scale = 0.5;
  const auto out = evolve<double>(images, mean_pixel_fitness, ga, rng);
  EXPECT_EQ(out.images.batch(), 9);
  EXPECT_LE(out.images.pixels.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(out.stats.size(), 6u);
}

TEST(Evolve, DeterministicForSeed) {
  std::mt19937_64 data(14);
  const auto images = random_images(data, {3, 4, 4}, 8);
  GAConfig ga;
  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  const auto x = evolve<double>(images, mean_pixel_fitness, ga, a);
  const auto y = evolve<double>(images, mean_pixel_fitness, ga, b);
  EXPECT_EQ(x.images.pixels, y.images.pixels);
  EXPECT_EQ(x.fitness, y.fitness);
}

TEST(Evolve, ElitismUnderFrozenDiscriminator) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    EXPECT_EQ(testkit::elitism_violations(seed, 100, seed % 2 == 0), 0) << "seed " << seed;
  }
}

TEST(Evolve, InvalidConfigRejected) {
  std::mt19937_64 rng(15);
  const auto images = random_images(rng, {3, 4, 4}, 4);
  GAConfig ga;
  ga.generations = 0;
  EXPECT_THROW(evolve<double>(images, mean_pixel_fitness, ga, rng), std::invalid_argument);
  ga.generations = 1;
  ga.mutation_rate = 1.5;
  EXPECT_THROW(evolve<double>(images, mean_pixel_fitness, ga, rng), std::invalid_argument);
}

TEST(Evolve, DefaultOffspringIsHalfThePopulation) {
  GAConfig ga;
  EXPECT_EQ(ga.offspring_for(64), 32);
  EXPECT_EQ(ga.offspring_for(1), 1);
  ga.offspring_per_generation = 0;
  EXPECT_EQ(ga.offspring_for(64), 0);
}
