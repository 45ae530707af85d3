#include "evogan/training.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "evogan/checkpoint.hpp"
#include "evogan/data_ingest.hpp"
#include "evogan/report.hpp"

namespace evogan {

namespace fs = std::filesystem;

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

bool is_fid_epoch(const TrainingConfig &config, int epoch) {
  return epoch == 1 || epoch == config.epochs || (config.fid_interval > 0 && epoch % config.fid_interval == 0);
}

namespace {

// 64-bit FNV-1a, used only to name cache files.
std::uint64_t fnv1a(const std::string &text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
  os << text;
}

// Everything but the epoch budget must match to continue a run.
std::string resume_signature(TrainingConfig c) {
  c.epochs = 1;
  return to_ini(c);
}

} // namespace

std::string dataset_cache_key(const DatasetManifest &manifest, ImageShape shape) {
  return hex(fnv1a(manifest_to_json(manifest) + "|" + to_string(shape)));
}

FidStats real_set_stats(const ImageBatch<float> &real, const std::string &dataset_key, const Embedder &embedder,
                        bool use_cache) {
  const fs::path path = cache_directory() / "stats" / (dataset_key + "_" + embedder.id() + ".fids");
  if (use_cache && fs::exists(path)) {
    try {
      auto cached = read_fid_stats(path);
      if (cached.embedder_id == embedder.id() && cached.stats.dim() == embedder.dim()) {
        return cached.stats;
      }
      std::cerr << "warning: cached real-set statistics " << path << " were computed with embedder '"
                << cached.embedder_id << "', recomputing with '" << embedder.id() << "'\n";
    } catch (const MetricError &e) {
      std::cerr << "warning: ignoring unreadable statistics cache " << path << ": " << e.what() << "\n";
    }
  }
  FidStats stats = gaussian_stats(embed_images(real, embedder));
  if (use_cache) {
    try {
      fs::create_directories(path.parent_path());
      write_fid_stats(path, stats, embedder.id());
    } catch (const std::exception &e) {
      std::cerr << "warning: cannot cache real-set statistics: " << e.what() << "\n";
    }
  }
  return stats;
}

TrainResult train(const TrainingConfig &config, const TrainOptions &options) {
  config.validate();
  if (config.dataset.empty()) {
    throw ConfigError("dataset path is not set");
  }
  if (options.out_dir.empty()) {
    throw std::invalid_argument("train: output directory is not set");
  }
  fs::create_directories(options.out_dir);

  const ImageShape shape = config.network.image;
  const DatasetManifest manifest = scan_dataset(config.dataset, shape.height);
  const ImageBatch<float> real = load_all(manifest, shape.height);
  if (real.shape != shape) {
    throw ConfigError("dataset images are " + to_string(real.shape) + ", network expects " + to_string(shape));
  }
  std::shared_ptr<const Embedder> embedder = make_embedder(config.embedder, shape);
  const std::string dataset_key = dataset_cache_key(manifest, shape);
  const FidEvaluator evaluator(embedder, real_set_stats(real, dataset_key, *embedder, options.use_stats_cache));

  TrainingState<float> state(config);
  if (options.resume_from) {
    const TrainingConfig stored = read_checkpoint_config(*options.resume_from);
    if (resume_signature(stored) != resume_signature(config)) {
      throw ConfigError("checkpoint " + options.resume_from->string() + " was written with a different config");
    }
    load_checkpoint(*options.resume_from, state);
  }
  write_file(options.out_dir / "config.resolved.cfg", to_ini(config));

  const RowBatch<float> grid_latent = evaluation_latent<float>(config, 64);
  const int last = options.stop_after_epoch > 0 ? std::min(options.stop_after_epoch, config.epochs) : config.epochs;
  TrainResult result;
  while (state.epoch < last) {
    const int epoch = state.epoch + 1;
    const bool fid_epoch = is_fid_epoch(config, epoch);
    const EpochRecord record = train_epoch(state, real, config, &evaluator, fid_epoch);
    if (fid_epoch) {
      const ImageBatch<float> samples =
          generate_images(state.generator, grid_latent, std::min<Eigen::Index>(config.batch_size, real.batch()));
      write_image_grid(options.out_dir / ("epoch_" + std::to_string(epoch) + ".png"), samples, 8, 2);
    }
    write_metrics_csv(options.out_dir / "metrics.csv", state.history);
    if (epoch % config.checkpoint_interval == 0 || epoch == last) {
      save_checkpoint(checkpoint_path(options.out_dir, epoch), state, config);
      fs::copy_file(checkpoint_path(options.out_dir, epoch), latest_checkpoint_path(options.out_dir),
                    fs::copy_options::overwrite_existing);
      result.final_checkpoint = latest_checkpoint_path(options.out_dir);
    }
    if (options.on_epoch) {
      options.on_epoch(record);
    }
  }
  if (state.history.empty()) {
    write_metrics_csv(options.out_dir / "metrics.csv", state.history);
  }
  result.records = state.history;
  for (const auto &r : result.records) {
    if (r.epoch == 1) {
      result.starting_fid = r.fid;
    }
  }
  return result;
}

} // namespace evogan
