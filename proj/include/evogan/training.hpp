#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "evogan/config.hpp"
#include "evogan/ga_engine.hpp"
#include "evogan/losses.hpp"
#include "evogan/metrics.hpp"
#include "evogan/networks.hpp"
#include "evogan/nn/adam.hpp"

namespace evogan {

struct EpochRecord {
  int epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;
  std::optional<double> fid;
  std::optional<double> ga_best_fitness;
  double wall_time = 0.0;
};

/// Thrown when a loss turns non-finite; the message carries a snapshot of the
/// epoch, losses and parameter norms.
class TrainingAborted : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Independent generator for one named random stream of an experiment.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

enum Stream : std::uint64_t { kInitStream = 0, kDataStream = 1, kLatentStream = 2, kGaStream = 3, kEvalStream = 4 };

/// Networks, optimizer moments and random streams of a run. Optimizers hold
/// pointers into the networks, so the state is pinned in memory.
template <typename Scalar>
class TrainingState {
public:
  explicit TrainingState(const TrainingConfig &config)
      : generator(config.network), discriminator(config.network),
        data_rng(make_stream(config.seed, kDataStream)), latent_rng(make_stream(config.seed, kLatentStream)),
        ga_rng(make_stream(config.seed, kGaStream)) {
    auto init_rng = make_stream(config.seed, kInitStream);
    generator.init(init_rng);
    discriminator.init(init_rng);
    g_optimizer = nn::Adam<Scalar>(generator.parameters(), config.g_optimizer);
    d_optimizer = nn::Adam<Scalar>(discriminator.trunk_parameters(), config.d_optimizer);
    q_optimizer = nn::Adam<Scalar>(discriminator.q_parameters(), config.g_optimizer);
  }

  TrainingState(const TrainingState &) = delete;
  TrainingState &operator=(const TrainingState &) = delete;
  TrainingState(TrainingState &&) = delete;
  TrainingState &operator=(TrainingState &&) = delete;

  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;
  nn::Adam<Scalar> g_optimizer; // generator
  nn::Adam<Scalar> d_optimizer; // discriminator trunk and realness head
  nn::Adam<Scalar> q_optimizer; // Q head, stepped in both updates
  std::mt19937_64 data_rng;
  std::mt19937_64 latent_rng;
  std::mt19937_64 ga_rng;
  int epoch = 0; // completed epochs
  std::int64_t steps = 0;
  std::vector<EpochRecord> history;
};

struct StepInfo {
  std::optional<double> ga_best_fitness;
  std::vector<GenerationStats> ga_stats;
};

namespace detail {

template <typename Scalar>
bool all_finite(const nn::ParameterRefs<Scalar> &params) {
  for (const auto *p : params) {
    if (!p->value.allFinite()) {
      return false;
    }
  }
  return true;
}

template <typename Scalar>
[[noreturn]] void abort_training(TrainingState<Scalar> &s, const LossReport &r, const char *where) {
  std::ostringstream os;
  os << "non-finite " << where << " at epoch " << s.epoch + 1 << ", step " << s.steps << ": d_loss=" << r.d_loss
     << " g_loss=" << r.g_loss << " mi=" << r.mi_term
     << " |G|=" << std::sqrt(squared_norm(s.generator.parameters()))
     << " |D|=" << std::sqrt(squared_norm(s.discriminator.trunk_parameters()))
     << " |Q|=" << std::sqrt(squared_norm(s.discriminator.q_parameters()));
  throw TrainingAborted(os.str());
}

template <typename Scalar>
RowBatch<Scalar> stack_rows(std::initializer_list<const RowBatch<Scalar> *> parts) {
  Eigen::Index rows = 0;
  for (const auto *p : parts) {
    rows += p->rows();
  }
  RowBatch<Scalar> out(rows, (*parts.begin())->cols());
  Eigen::Index at = 0;
  for (const auto *p : parts) {
    out.middleRows(at, p->rows()) = *p;
    at += p->rows();
  }
  return out;
}

} // namespace detail

/// One iteration: sample latents, generate fakes, evolve them (GA variants),
/// update D and Q on real vs. fake, then update G and Q on a fresh batch.
/// The GA output is detached, so the mutual-information term of the
/// discriminator update is measured on the raw generator samples whose codes
/// are known.
template <typename Scalar>
LossReport train_step(TrainingState<Scalar> &s, const ImageBatch<Scalar> &real, const TrainingConfig &config,
                      StepInfo *info = nullptr) {
  const LatentSpec &spec = config.network.latent;
  const int n_classes = spec.n_classes;
  const double lc = config.lambda_categorical;
  const double lk = config.lambda_continuous;
  const Eigen::Index batch = real.batch();
  LossReport report;

  // Generate and (optionally) evolve.
  const LatentBatch<Scalar> latent = sample_latent<Scalar>(spec, batch, s.latent_rng);
  const ImageBatch<Scalar> raw = s.generator.forward(compose_input(latent), nn::Mode::train);
  const ImageBatch<Scalar> *fakes = &raw;
  EvolveResult<Scalar> evolved;
  if (config.uses_ga()) {
    evolved = evolve(raw, discriminator_fitness(s.discriminator), config.ga_config(), s.ga_rng);
    fakes = &evolved.images;
    if (info != nullptr) {
      info->ga_best_fitness = static_cast<double>(evolved.fitness(0));
      info->ga_stats = evolved.stats;
    }
  }

  // Discriminator (and Q) update.
  {
    const bool separate_mi = fakes != &raw;
    const ImageBatch<Scalar> stacked(
        real.shape, separate_mi ? detail::stack_rows<Scalar>({&real.pixels, &fakes->pixels, &raw.pixels})
                                : detail::stack_rows<Scalar>({&real.pixels, &fakes->pixels}));
    DiscriminatorTape<Scalar> tape;
    const auto out = s.discriminator.forward(stacked, &tape);
    const Vector<Scalar> d_real = out.realness.head(batch);
    const Vector<Scalar> d_fake = out.realness.segment(batch, batch);
    const Eigen::Index mi_row = separate_mi ? 2 * batch : batch;
    const RowBatch<Scalar> q_cat = out.q_cat_logits.middleRows(mi_row, batch);
    const RowBatch<Scalar> q_cont = out.q_cont_means.middleRows(mi_row, batch);
    const MiBound<Scalar> mi = mutual_information_lower_bound(latent, q_cat, q_cont, n_classes);
    const Scalar d_loss = discriminator_loss(d_real, d_fake, mi.weighted(lc, lk), 1.0);
    report.d_loss = static_cast<double>(d_loss);
    report.d_real_mean = static_cast<double>(d_real.mean());
    report.d_fake_mean = static_cast<double>(d_fake.mean());
    if (!std::isfinite(report.d_loss)) {
      detail::abort_training(s, report, "discriminator loss");
    }

    DiscriminatorGrad<Scalar> grad;
    grad.realness_logit = Vector<Scalar>::Zero(stacked.batch());
    grad.realness_logit.head(batch) = through_sigmoid(neg_log_grad(d_real), d_real);
    grad.realness_logit.segment(batch, batch) = through_sigmoid(neg_log_complement_grad(d_fake), d_fake);
    grad.q_cat_logits = RowBatch<Scalar>::Zero(stacked.batch(), out.q_cat_logits.cols());
    grad.q_cont_means = RowBatch<Scalar>::Zero(stacked.batch(), out.q_cont_means.cols());
    const auto mi_grad = mutual_information_gradient(latent, q_cat, q_cont, n_classes, lc, lk);
    grad.q_cat_logits.middleRows(mi_row, batch) = -mi_grad.q_cat_logits;
    grad.q_cont_means.middleRows(mi_row, batch) = -mi_grad.q_cont_means;

    s.d_optimizer.zero_grad();
    s.q_optimizer.zero_grad();
    s.discriminator.backward(tape, grad, false);
    s.d_optimizer.step();
    s.q_optimizer.step();
  }

  // Generator (and Q) update on a fresh, differentiable batch.
  {
    const LatentBatch<Scalar> fresh_latent = sample_latent<Scalar>(spec, batch, s.latent_rng);
    GeneratorTape<Scalar> g_tape;
    const ImageBatch<Scalar> fresh = s.generator.forward(compose_input(fresh_latent), nn::Mode::train, &g_tape);
    s.generator.update_running_stats(g_tape);
    DiscriminatorTape<Scalar> d_tape;
    const auto out = s.discriminator.forward(fresh, &d_tape);
    const MiBound<Scalar> mi =
        mutual_information_lower_bound(fresh_latent, out.q_cat_logits, out.q_cont_means, n_classes);
    const Scalar weighted = mi.weighted(lc, lk);
    const Scalar g_loss = generator_loss(out.realness, weighted, 1.0);
    report.g_loss = static_cast<double>(g_loss);
    report.mi_term = static_cast<double>(weighted);
    if (!std::isfinite(report.g_loss)) {
      detail::abort_training(s, report, "generator loss");
    }

    DiscriminatorGrad<Scalar> grad;
    grad.realness_logit = through_sigmoid(neg_log_grad(out.realness), out.realness);
    const auto mi_grad =
        mutual_information_gradient(fresh_latent, out.q_cat_logits, out.q_cont_means, n_classes, lc, lk);
    grad.q_cat_logits = -mi_grad.q_cat_logits;
    grad.q_cont_means = -mi_grad.q_cont_means;

    s.g_optimizer.zero_grad();
    s.d_optimizer.zero_grad();
    s.q_optimizer.zero_grad();
    const RowBatch<Scalar> d_images = s.discriminator.backward(d_tape, grad, true);
    s.generator.backward(g_tape, d_images);
    s.g_optimizer.step();
    s.q_optimizer.step();
    // The trunk gradient of this pass is never applied.
    s.d_optimizer.zero_grad();
  }

  if (!detail::all_finite(s.generator.parameters()) || !detail::all_finite(s.discriminator.parameters())) {
    detail::abort_training(s, report, "parameters");
  }
  ++s.steps;
  return report;
}

/// Generates images for a fixed latent input in chunks, using per-chunk batch
/// statistics (the same normalization the generator trains with). Running
/// statistics are left untouched.
template <typename Scalar>
ImageBatch<float> generate_images(const Generator<Scalar> &g, const RowBatch<Scalar> &latent_input,
                                  Eigen::Index chunk) {
  ImageBatch<float> out(g.spec().image, latent_input.rows());
  for (Eigen::Index start = 0; start < latent_input.rows(); start += chunk) {
    const Eigen::Index n = std::min(chunk, latent_input.rows() - start);
    const RowBatch<Scalar> part = latent_input.middleRows(start, n);
    out.pixels.middleRows(start, n) = g.forward(part, nn::Mode::train).pixels.template cast<float>();
  }
  return out;
}

/// Fixed latent inputs used for every FID evaluation and sample grid.
template <typename Scalar>
RowBatch<Scalar> evaluation_latent(const TrainingConfig &config, Eigen::Index n) {
  auto rng = make_stream(config.eval_seed, kEvalStream);
  return compose_input(sample_latent<Scalar>(config.network.latent, n, rng));
}

/// Latent grid sweeping the first categorical code across columns: each row
/// shares z and continuous codes, column j sets the category to j.
template <typename Scalar>
RowBatch<Scalar> categorical_sweep_latent(const LatentSpec &spec, int rows, std::uint64_t seed) {
  auto rng = make_stream(seed, kEvalStream);
  LatentBatch<Scalar> base = sample_latent<Scalar>(spec, rows, rng);
  const int cols = std::max(1, spec.n_classes);
  LatentBatch<Scalar> sweep;
  sweep.z.resize(rows * cols, spec.z_dim);
  sweep.c_cat = RowBatch<Scalar>::Zero(rows * cols, spec.categorical_width());
  sweep.c_cont.resize(rows * cols, spec.n_continuous);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * cols + c;
      sweep.z.row(i) = base.z.row(r);
      sweep.c_cat.row(i) = base.c_cat.row(r);
      sweep.c_cont.row(i) = base.c_cont.row(r);
      if (spec.n_categorical > 0) {
        sweep.c_cat.row(i).head(spec.n_classes).setZero();
        sweep.c_cat(i, c) = Scalar(1);
      }
    }
  }
  return compose_input(sweep);
}

/// FID of generator samples against fixed real-set statistics.
class FidEvaluator {
public:
  FidEvaluator(std::shared_ptr<const Embedder> embedder, FidStats real_stats)
      : embedder_(std::move(embedder)), real_(std::move(real_stats)) {}

  [[nodiscard]] const Embedder &embedder() const { return *embedder_; }
  [[nodiscard]] const FidStats &real_stats() const { return real_; }

  [[nodiscard]] double fid(const ImageBatch<float> &generated) const {
    return frechet_distance(gaussian_stats(embed_images(generated, *embedder_)), real_);
  }

private:
  std::shared_ptr<const Embedder> embedder_;
  FidStats real_;
};

struct DatasetManifest;

/// Stable name for the real-set statistics of a dataset at a resolution.
std::string dataset_cache_key(const DatasetManifest &manifest, ImageShape shape);

/// Real-set statistics, cached under the cache directory keyed by the
/// dataset manifest. A cached file for another embedder is recomputed with a
/// warning on stderr.
FidStats real_set_stats(const ImageBatch<float> &real, const std::string &dataset_key, const Embedder &embedder,
                        bool use_cache = true);

/// Runs one pass over the dataset (shuffled, full batches only). FID is
/// evaluated when `evaluate_fid` is set.
template <typename Scalar>
EpochRecord train_epoch(TrainingState<Scalar> &s, const ImageBatch<Scalar> &data, const TrainingConfig &config,
                        const FidEvaluator *fid, bool evaluate_fid) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = data.batch();
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  std::shuffle(order.begin(), order.end(), s.data_rng);

  EpochRecord record;
  record.epoch = s.epoch + 1;
  double g_sum = 0.0;
  double d_sum = 0.0;
  double best_sum = 0.0;
  const Eigen::Index steps = n / batch;
  for (Eigen::Index k = 0; k < steps; ++k) {
    ImageBatch<Scalar> real(data.shape, batch);
    for (Eigen::Index r = 0; r < batch; ++r) {
      real.pixels.row(r) = data.pixels.row(order[static_cast<std::size_t>(k * batch + r)]);
    }
    StepInfo info;
    const LossReport rep = train_step(s, real, config, &info);
    g_sum += rep.g_loss;
    d_sum += rep.d_loss;
    if (info.ga_best_fitness) {
      best_sum += *info.ga_best_fitness;
    }
  }
  record.g_loss = g_sum / static_cast<double>(steps);
  record.d_loss = d_sum / static_cast<double>(steps);
  if (config.uses_ga()) {
    record.ga_best_fitness = best_sum / static_cast<double>(steps);
  }
  if (fid != nullptr && evaluate_fid) {
    const RowBatch<Scalar> eval_input = evaluation_latent<Scalar>(config, config.fid_samples);
    record.fid = fid->fid(generate_images(s.generator, eval_input, batch));
  }
  s.epoch = record.epoch;
  s.history.push_back(record);
  record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.history.back().wall_time = record.wall_time;
  return record;
}

/// True for the epochs at which FID and sample grids are produced: the first,
/// every fid_interval-th, and the last.
bool is_fid_epoch(const TrainingConfig &config, int epoch);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  /// Stop (as if interrupted) after this epoch; 0 runs to config.epochs.
  int stop_after_epoch = 0;
  bool use_stats_cache = true;
  std::function<void(const EpochRecord &)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  std::filesystem::path final_checkpoint;
  std::optional<double> starting_fid;
};

/// Full experiment: loads the dataset, trains (or resumes), and writes
/// metrics.csv, checkpoints, epoch_<n>.png grids and config.resolved.cfg to
/// options.out_dir.
TrainResult train(const TrainingConfig &config, const TrainOptions &options);

} // namespace evogan
