#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "evogan/config.hpp"
#include "evogan/ga_engine.hpp"
#include "evogan/losses.hpp"
#include "evogan/networks.hpp"
#include "reference/reference.hpp"

namespace evogan::testkit {

/// 4x4 images, 2 noise dimensions plus one 2-class code and one continuous
/// code, narrow layers.
inline TrainingConfig toy_config() {
  TrainingConfig c;
  c.variant = Variant::baseline_infogan;
  c.batch_size = 2;
  c.epochs = 1;
  c.fid_samples = 4;
  NetworkSpec &n = c.network;
  n.image = {3, 4, 4};
  n.latent = {2, 1, 2, 1};
  n.g_hidden = 8;
  n.g_base_channels = 4;
  n.g_mid_channels = 3;
  n.d_channels1 = 4;
  n.d_channels2 = 6;
  n.d_hidden = 8;
  n.q_hidden = 5;
  n.init_stddev = 0.3;
  return c;
}

/// Reduced widths at 28x28 for quick end-to-end tests.
inline TrainingConfig small_config(const std::filesystem::path &dataset) {
  TrainingConfig c;
  c.dataset = dataset.string();
  c.batch_size = 16;
  c.fid_samples = 64;
  c.epochs = 2;
  c.checkpoint_interval = 1;
  NetworkSpec &n = c.network;
  n.g_hidden = 64;
  n.g_base_channels = 16;
  n.g_mid_channels = 8;
  n.d_channels1 = 8;
  n.d_channels2 = 16;
  n.d_hidden = 64;
  n.q_hidden = 16;
  return c;
}

/// Fresh directory under the system temp directory, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("evogan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  [[nodiscard]] const std::filesystem::path &path() const { return path_; }

private:
  std::filesystem::path path_;
};

// Gradient checks on the toy network.

enum class LossTerm { d_real, d_fake, mi_categorical, mi_continuous, g_adversarial };

inline const char *to_string(LossTerm t) {
  switch (t) {
  case LossTerm::d_real:
    return "d_real";
  case LossTerm::d_fake:
    return "d_fake";
  case LossTerm::mi_categorical:
    return "mi_categorical";
  case LossTerm::mi_continuous:
    return "mi_continuous";
  case LossTerm::g_adversarial:
    return "g_adversarial";
  }
  return "?";
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  int directions = 0;
};

/// Compares the backpropagated gradient of one loss term, over every
/// generator and discriminator parameter, with central differences along
/// random unit directions.
class ToyGradientCheck {
public:
  explicit ToyGradientCheck(std::uint64_t seed)
      : config_(toy_config()), g_(config_.network), d_(config_.network), rng_(seed) {
    g_.init(rng_);
    d_.init(rng_);
    const ImageShape shape = config_.network.image;
    const Eigen::Index batch = 4;
    real_ = ImageBatch<double>(shape, batch);
    std::uniform_real_distribution<double> pixel(-1.0, 1.0);
    for (Eigen::Index i = 0; i < real_.pixels.size(); ++i) {
      real_.pixels.data()[i] = pixel(rng_);
    }
    latent_ = sample_latent<double>(config_.network.latent, batch, rng_);
    params_ = g_.parameters();
    for (auto *p : d_.parameters()) {
      params_.push_back(p);
    }
  }

  double loss(LossTerm term) const {
    const int classes = config_.network.latent.n_classes;
    if (term == LossTerm::d_real) {
      const auto p = d_.forward(real_).realness;
      return -p.unaryExpr([](double v) { return std::log(detail::clamp_probability(v)); }).mean();
    }
    const auto out = d_.forward(g_.forward(compose_input(latent_), nn::Mode::train));
    switch (term) {
    case LossTerm::d_fake:
      return -out.realness.unaryExpr([](double v) { return std::log(1.0 - detail::clamp_probability(v)); }).mean();
    case LossTerm::g_adversarial:
      return -out.realness.unaryExpr([](double v) { return std::log(detail::clamp_probability(v)); }).mean();
    case LossTerm::mi_categorical:
      return -mutual_information_lower_bound(latent_, out.q_cat_logits, out.q_cont_means, classes).categorical;
    case LossTerm::mi_continuous:
      return -mutual_information_lower_bound(latent_, out.q_cat_logits, out.q_cont_means, classes).continuous;
    default:
      return 0.0;
    }
  }

  /// Backpropagated gradient, written into each parameter's grad.
  void backprop(LossTerm term) {
    for (auto *p : params_) {
      p->zero_grad();
    }
    const int classes = config_.network.latent.n_classes;
    if (term == LossTerm::d_real) {
      DiscriminatorTape<double> tape;
      const auto out = d_.forward(real_, &tape);
      DiscriminatorGrad<double> grad;
      grad.realness_logit = through_sigmoid(neg_log_grad(out.realness), out.realness);
      grad.q_cat_logits = RowBatch<double>::Zero(out.q_cat_logits.rows(), out.q_cat_logits.cols());
      grad.q_cont_means = RowBatch<double>::Zero(out.q_cont_means.rows(), out.q_cont_means.cols());
      d_.backward(tape, grad, false);
      return;
    }
    GeneratorTape<double> g_tape;
    const auto images = g_.forward(compose_input(latent_), nn::Mode::train, &g_tape);
    DiscriminatorTape<double> d_tape;
    const auto out = d_.forward(images, &d_tape);
    DiscriminatorGrad<double> grad;
    grad.realness_logit = Vector<double>::Zero(out.realness.size());
    grad.q_cat_logits = RowBatch<double>::Zero(out.q_cat_logits.rows(), out.q_cat_logits.cols());
    grad.q_cont_means = RowBatch<double>::Zero(out.q_cont_means.rows(), out.q_cont_means.cols());
    if (term == LossTerm::d_fake) {
      grad.realness_logit = through_sigmoid(neg_log_complement_grad(out.realness), out.realness);
    } else if (term == LossTerm::g_adversarial) {
      grad.realness_logit = through_sigmoid(neg_log_grad(out.realness), out.realness);
    } else {
      const bool cat = term == LossTerm::mi_categorical;
      const auto mi = mutual_information_gradient(latent_, out.q_cat_logits, out.q_cont_means, classes,
                                                  cat ? 1.0 : 0.0, cat ? 0.0 : 1.0);
      grad.q_cat_logits = -mi.q_cat_logits;
      grad.q_cont_means = -mi.q_cont_means;
    }
    g_.backward(g_tape, d_.backward(d_tape, grad, true));
  }

  GradCheckResult run(LossTerm term, int directions) {
    backprop(term);
    GradCheckResult result;
    std::normal_distribution<double> normal(0.0, 1.0);
    const double h = 1e-6;
    std::vector<Matrix<double>> saved;
    for (auto *p : params_) {
      saved.push_back(p->value);
    }
    for (int k = 0; k < directions; ++k) {
      std::vector<Matrix<double>> dir;
      double norm2 = 0.0;
      for (auto *p : params_) {
        Matrix<double> v(p->value.rows(), p->value.cols());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
          v.data()[i] = normal(rng_);
        }
        norm2 += v.squaredNorm();
        dir.push_back(v);
      }
      const double scale = 1.0 / std::sqrt(norm2);
      double analytic = 0.0;
      for (std::size_t i = 0; i < params_.size(); ++i) {
        dir[i] *= scale;
        analytic += params_[i]->grad.cwiseProduct(dir[i]).sum();
      }
      shift(dir, h);
      const double up = loss(term);
      restore(saved);
      shift(dir, -h);
      const double down = loss(term);
      restore(saved);
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
      ++result.directions;
    }
    return result;
  }

private:
  void restore(const std::vector<Matrix<double>> &saved) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i]->value = saved[i];
    }
  }

  void shift(const std::vector<Matrix<double>> &dir, double step) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i]->value += step * dir[i];
    }
  }

  TrainingConfig config_;
  Generator<double> g_;
  Discriminator<double> d_;
  std::mt19937_64 rng_;
  ImageBatch<double> real_;
  LatentBatch<double> latent_;
  nn::ParameterRefs<double> params_;
};

// GA trace replay against the reference rules.

struct ReplayOutcome {
  reference::ReplayReport decisions; // rule-by-rule check of the trace
  reference::ReplayReport result;    // final population vs engine output
  std::size_t children = 0;
  std::size_t replacements = 0;
};

/// One random evolve() run on toy-sized images with a frozen toy
/// discriminator as fitness, replayed through the reference rules.
inline ReplayOutcome replay_random_run(std::uint64_t seed, int generations) {
  std::mt19937_64 rng(seed);
  TrainingConfig config = toy_config();
  Discriminator<float> d(config.network);
  d.init(rng);
  std::uniform_int_distribution<int> pop_size(2, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GAConfig ga;
  ga.generations = generations;
  ga.crossover_enabled = unit(rng) < 0.5;
  ga.mutation_rate = unit(rng) < 0.2 ? 0.0 : unit(rng);
  ga.mutation_scale = 0.01 + unit(rng);
  ga.offspring_per_generation = std::uniform_int_distribution<int>(-1, 6)(rng);
  ImageBatch<float> images(config.network.image, pop_size(rng));
  for (Eigen::Index i = 0; i < images.pixels.size(); ++i) {
    images.pixels.data()[i] = static_cast<float>(2.0 * unit(rng) - 1.0);
  }

  const auto fitness = discriminator_fitness(d);
  reference::ReplayPopulation initial;
  const Vector<float> scores = fitness(images);
  for (Eigen::Index r = 0; r < images.batch(); ++r) {
    initial.chromosomes.push_back(images.pixels.row(r));
    initial.fitness.push_back(scores(r));
  }
  EvolveTrace trace;
  std::mt19937_64 ga_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const auto engine = evolve(images, fitness, ga, ga_rng, &trace);

  ReplayOutcome out;
  const auto replay = reference::reference_ga_step(initial, trace, ga.crossover_enabled, ga.mutation_rate,
                                                   ga.clamp_low, ga.clamp_high, &out.decisions);
  out.result = reference::compare_with_engine(reference::sorted_by_fitness(replay), engine);
  for (const auto &gen : trace.generations) {
    out.children += gen.children.size();
    for (const auto &child : gen.children) {
      out.replacements += child.replaced ? 1 : 0;
    }
  }
  return out;
}

/// Runs `generations` generations of evolve() under a frozen 28x28
/// discriminator and counts generations where the population's min or max
/// fitness went down.
inline int elitism_violations(std::uint64_t seed, int generations, bool crossover) {
  std::mt19937_64 rng(seed);
  NetworkSpec spec;
  spec.d_channels1 = 4;
  spec.d_channels2 = 8;
  spec.d_hidden = 16;
  spec.q_hidden = 4;
  spec.init_stddev = 0.1;
  Discriminator<float> d(spec);
  d.init(rng);
  ImageBatch<float> images(spec.image, 16);
  std::uniform_real_distribution<float> pixel(-1.0f, 1.0f);
  for (Eigen::Index i = 0; i < images.pixels.size(); ++i) {
    images.pixels.data()[i] = pixel(rng);
  }
  GAConfig ga;
  ga.generations = generations;
  ga.crossover_enabled = crossover;
  ga.mutation_scale = 0.2;
  const auto result = evolve(images, d, ga, rng);
  int violations = 0;
  for (std::size_t g = 1; g < result.stats.size(); ++g) {
    if (result.stats[g].min < result.stats[g - 1].min || result.stats[g].best < result.stats[g - 1].best) {
      ++violations;
    }
  }
  return violations;
}

} // namespace evogan::testkit
