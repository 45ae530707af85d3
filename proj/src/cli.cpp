#include "evogan/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>

#include "evogan/checkpoint.hpp"
#include "evogan/config.hpp"
#include "evogan/data_ingest.hpp"
#include "evogan/metrics.hpp"
#include "evogan/report.hpp"
#include "evogan/training.hpp"

namespace evogan {

namespace fs = std::filesystem;

fs::path timestamped_directory(const fs::path &root) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  fs::path dir = root / stamp;
  for (int k = 1; fs::exists(dir); ++k) {
    dir = root / (std::string(stamp) + "-" + std::to_string(k));
  }
  return dir;
}

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "out";
  bool exact_out = false;
  std::optional<std::uint64_t> seed;
  std::string device = "cpu";
};

void add_common(CLI::App *cmd, Common &c, bool with_config) {
  if (with_config) {
    cmd->add_option("--config", c.config_path, "Experiment config file");
    cmd->add_option("--set", c.overrides, "Override a config value (KEY=VALUE, repeatable)");
    cmd->add_option("--seed", c.seed, "Random seed");
  }
  cmd->add_option("--out", c.out, "Output root; each run writes to a timestamped subdirectory")->capture_default_str();
  cmd->add_flag("--no-timestamp", c.exact_out, "Write directly into --out");
  cmd->add_option("--device", c.device, "Compute device (cpu)")->capture_default_str();
}

void check_device(const std::string &device) {
  if (device != "cpu") {
    throw ConfigError("device '" + device + "' is not available; this build runs on cpu only");
  }
}

fs::path output_dir(const Common &c) {
  const fs::path dir = c.exact_out ? fs::path(c.out) : timestamped_directory(c.out);
  fs::create_directories(dir);
  return dir;
}

TrainingConfig resolve_config(const Common &c) {
  TrainingConfig config = c.config_path.empty() ? TrainingConfig{} : load_config(c.config_path, {});
  for (const auto &o : c.overrides) {
    apply_override(config, o);
  }
  if (c.seed) {
    config.seed = *c.seed;
  }
  config.validate();
  return config;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
  os << text;
}

int cmd_train(const Common &c, const std::string &resume) {
  check_device(c.device);
  TrainingConfig config;
  std::optional<fs::path> resume_path;
  if (!resume.empty()) {
    resume_path = resume;
    config = read_checkpoint_config(resume);
    for (const auto &o : c.overrides) {
      apply_override(config, o);
    }
    config.validate();
  } else {
    config = resolve_config(c);
  }
  TrainOptions options;
  options.out_dir = resume_path && c.out == "out" && !c.exact_out ? resume_path->parent_path() : output_dir(c);
  options.resume_from = resume_path;
  options.on_epoch = [](const EpochRecord &r) {
    std::cout << "epoch " << r.epoch << "  g_loss " << r.g_loss << "  d_loss " << r.d_loss;
    if (r.fid) {
      std::cout << "  fid " << *r.fid;
    }
    if (r.ga_best_fitness) {
      std::cout << "  ga_best " << *r.ga_best_fitness;
    }
    std::cout << "  (" << r.wall_time << " s)" << std::endl;
  };
  std::cout << "writing to " << options.out_dir.string() << std::endl;
  const TrainResult result = train(config, options);
  if (result.starting_fid) {
    std::cout << "starting FID " << *result.starting_fid << "\n";
  }
  std::cout << "final checkpoint " << result.final_checkpoint.string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string dataset;
  std::string embedder;
  int n_samples = 0;
  std::optional<std::uint64_t> eval_seed;
  bool real_halves = false;
};

int cmd_evaluate(const Common &c, const EvaluateArgs &a) {
  check_device(c.device);
  TrainingConfig config = read_checkpoint_config(a.checkpoint);
  if (!a.dataset.empty()) {
    config.dataset = a.dataset;
  }
  if (!a.embedder.empty()) {
    config.embedder = a.embedder;
  }
  if (a.n_samples != 0) {
    config.fid_samples = a.n_samples;
  }
  if (a.eval_seed) {
    config.eval_seed = *a.eval_seed;
  }
  config.validate();
  const fs::path dir = output_dir(c);
  write_text(dir / "config.resolved.cfg", to_ini(config));

  const ImageShape shape = config.network.image;
  const DatasetManifest manifest = scan_dataset(config.dataset, shape.height);
  const ImageBatch<float> real = load_all(manifest, shape.height);
  std::shared_ptr<const Embedder> embedder = make_embedder(config.embedder, shape);
  const std::string key = dataset_cache_key(manifest, shape);

  nlohmann::json report;
  report["checkpoint"] = fs::absolute(a.checkpoint).string();
  report["dataset"] = config.dataset;
  report["embedder"] = embedder->id();
  if (a.real_halves) {
    // Interleaved halves of the real set, one playing the generated role.
    std::vector<std::size_t> even;
    std::vector<std::size_t> odd;
    for (std::size_t i = 0; i < static_cast<std::size_t>(real.batch()); ++i) {
      (i % 2 == 0 ? even : odd).push_back(i);
    }
    ImageBatch<float> a_half(real.shape, static_cast<Eigen::Index>(even.size()));
    ImageBatch<float> b_half(real.shape, static_cast<Eigen::Index>(odd.size()));
    for (std::size_t i = 0; i < even.size(); ++i) {
      a_half.pixels.row(static_cast<Eigen::Index>(i)) = real.pixels.row(static_cast<Eigen::Index>(even[i]));
    }
    for (std::size_t i = 0; i < odd.size(); ++i) {
      b_half.pixels.row(static_cast<Eigen::Index>(i)) = real.pixels.row(static_cast<Eigen::Index>(odd[i]));
    }
    const double fid = frechet_distance(gaussian_stats(embed_images(a_half, *embedder)),
                                        gaussian_stats(embed_images(b_half, *embedder)));
    report["mode"] = "real_halves";
    report["n_samples"] = even.size();
    report["fid"] = fid;
    std::cout << "fid " << fid << " (real halves, n=" << even.size() << ")\n";
  } else {
    TrainingState<float> state(config);
    load_checkpoint(a.checkpoint, state);
    const FidEvaluator evaluator(embedder, real_set_stats(real, key, *embedder));
    const ImageBatch<float> generated =
        generate_images(state.generator, evaluation_latent<float>(config, config.fid_samples),
                        std::min<Eigen::Index>(config.batch_size, real.batch()));
    const double fid = evaluator.fid(generated);
    report["mode"] = "generator";
    report["epoch"] = state.epoch;
    report["n_samples"] = config.fid_samples;
    report["eval_seed"] = config.eval_seed;
    report["fid"] = fid;
    std::cout << "fid " << fid << " (epoch " << state.epoch << ", n=" << config.fid_samples << ")\n";
  }
  write_text(dir / "evaluation.json", report.dump(2) + "\n");
  return kExitOk;
}

struct GenerateArgs {
  std::string checkpoint;
  int n = 64;
  std::optional<std::uint64_t> eval_seed;
  bool sweep = false;
  std::optional<int> category;
  std::vector<double> continuous;
  bool individual = true;
};

int cmd_generate(const Common &c, const GenerateArgs &a) {
  check_device(c.device);
  if (a.n <= 0) {
    throw ConfigError("generate: n must be positive, got " + std::to_string(a.n));
  }
  TrainingConfig config = read_checkpoint_config(a.checkpoint);
  if (a.eval_seed) {
    config.eval_seed = *a.eval_seed;
  }
  const LatentSpec &spec = config.network.latent;
  TrainingState<float> state(config);
  load_checkpoint(a.checkpoint, state);
  const fs::path dir = output_dir(c);
  write_text(dir / "config.resolved.cfg", to_ini(config));

  RowBatch<float> input;
  int columns = 0;
  if (a.sweep) {
    if (spec.n_categorical == 0) {
      throw ConfigError("generate: the latent spec has no categorical code to sweep");
    }
    const int rows = (a.n + spec.n_classes - 1) / spec.n_classes;
    input = categorical_sweep_latent<float>(spec, rows, config.eval_seed);
    columns = spec.n_classes;
  } else {
    input = evaluation_latent<float>(config, a.n);
    columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(a.n))));
  }
  LatentBatch<float> latent = decompose_input(input, spec);
  if (a.category) {
    if (*a.category < 0 || *a.category >= spec.n_classes || spec.n_categorical == 0) {
      throw ConfigError("generate: category " + std::to_string(*a.category) + " is out of range");
    }
    latent.c_cat.leftCols(spec.n_classes).setZero();
    latent.c_cat.col(*a.category).setOnes();
  }
  if (!a.continuous.empty()) {
    if (static_cast<int>(a.continuous.size()) != spec.n_continuous) {
      throw ConfigError("generate: expected " + std::to_string(spec.n_continuous) + " continuous values");
    }
    for (int k = 0; k < spec.n_continuous; ++k) {
      latent.c_cont.col(k).setConstant(static_cast<float>(a.continuous[static_cast<std::size_t>(k)]));
    }
  }
  input = compose_input(latent);
  const ImageBatch<float> images = generate_images(state.generator, input, config.batch_size);
  write_image_grid(dir / "grid.png", images, columns, 2);
  if (a.individual) {
    for (Eigen::Index i = 0; i < images.batch(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%04lld.png", static_cast<long long>(i));
      write_image(dir / name, images, i);
    }
  }
  std::cout << "wrote " << images.batch() << " samples (" << columns << " columns) to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_plot(const Common &c, const std::vector<std::string> &csvs) {
  std::vector<fs::path> paths(csvs.begin(), csvs.end());
  // Validate every input before creating the output directory.
  for (const auto &p : paths) {
    read_metrics_csv(p);
  }
  const auto written = plot_runs(paths, output_dir(c));
  for (const auto &p : written) {
    std::cout << p.string() << "\n";
  }
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> run_dirs;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
};

int cmd_compare(const Common &c, const CompareArgs &a) {
  check_device(c.device);
  Comparison comparison;
  fs::path dir;
  if (!a.run_dirs.empty()) {
    comparison = compare_runs(std::vector<fs::path>(a.run_dirs.begin(), a.run_dirs.end()));
    dir = output_dir(c);
    write_comparison(comparison, dir);
  } else {
    const TrainingConfig base = resolve_config(c);
    std::vector<TrainingConfig> configs;
    const std::vector<std::string> variants =
        a.variants.empty() ? std::vector<std::string>{to_string(Variant::baseline_infogan),
                                                      to_string(Variant::infogan_ga_woc),
                                                      to_string(Variant::infogan_ga_wc)}
                           : a.variants;
    const std::vector<std::uint64_t> seeds = a.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : a.seeds;
    for (const auto &v : variants) {
      for (auto s : seeds) {
        TrainingConfig cfg = base;
        cfg.variant = parse_variant(v);
        cfg.seed = s;
        configs.push_back(cfg);
      }
    }
    dir = output_dir(c);
    comparison = compare_variants(configs, dir);
  }
  std::cout << "label,starting_fid,final_fid,convergence_epoch,final_fid_reduction\n";
  for (const auto &s : comparison.summaries) {
    std::cout << s.label << ',' << (s.starting_fid ? std::to_string(*s.starting_fid) : "") << ','
              << (s.final_fid ? std::to_string(*s.final_fid) : "") << ','
              << (s.convergence_epoch ? std::to_string(*s.convergence_epoch) + (s.converged ? "" : " (not converged)")
                                      : "")
              << ',' << (s.final_reduction ? std::to_string(*s.final_reduction) : "") << "\n";
  }
  std::cout << "written to " << dir.string() << "\n";
  return kExitOk;
}

struct SyntheticArgs {
  std::size_t n = 512;
  std::uint64_t seed = 7;
  int size = 28;
};

int cmd_make_synthetic(const Common &c, const SyntheticArgs &a) {
  if (a.n < 2) {
    throw ConfigError("make-synthetic: n must be at least 2");
  }
  const fs::path dir = c.exact_out ? fs::path(c.out) : timestamped_directory(c.out);
  const DatasetManifest manifest = make_synthetic_dataset(a.n, SyntheticSpec{a.size, a.size}, a.seed, dir);
  write_text(dir / "manifest.json", manifest_to_json(manifest) + "\n");
  std::cout << "wrote " << manifest.total_samples << " images to " << dir.string() << "\n";
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string> &args) {
  CLI::App app{"Genetic-algorithm embedded InfoGAN training and evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string resume;
  auto *train_cmd = app.add_subcommand("train", "Train one variant");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  EvaluateArgs eval_args;
  auto *eval_cmd = app.add_subcommand("evaluate", "FID of a checkpoint against a dataset");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset root (defaults to the checkpoint's)");
  eval_cmd->add_option("--embedder", eval_args.embedder, "toy_conv or inception_v3");
  eval_cmd->add_option("--n", eval_args.n_samples, "Generated samples");
  eval_cmd->add_option("--seed", eval_args.eval_seed, "Evaluation latent seed");
  eval_cmd->add_flag("--real-halves", eval_args.real_halves, "FID between two halves of the real set");

  GenerateArgs gen_args;
  auto *gen_cmd = app.add_subcommand("generate", "Sample images from a checkpoint");
  add_common(gen_cmd, common, false);
  gen_cmd->add_option("--checkpoint", gen_args.checkpoint, "Checkpoint file")->required();
  gen_cmd->add_option("--n", gen_args.n, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen_args.eval_seed, "Latent seed");
  gen_cmd->add_flag("--sweep", gen_args.sweep, "Vary the categorical code across grid columns");
  gen_cmd->add_option("--category", gen_args.category, "Fix the categorical code");
  gen_cmd->add_option("--continuous", gen_args.continuous, "Fix the continuous codes")->delimiter(',');
  gen_cmd->add_flag("!--no-individual", gen_args.individual, "Only write the grid");

  std::vector<std::string> csvs;
  auto *plot_cmd = app.add_subcommand("plot", "FID overlay and loss plots from metrics files");
  add_common(plot_cmd, common, false);
  plot_cmd->add_option("metrics", csvs, "metrics.csv files")->required();

  CompareArgs cmp_args;
  auto *cmp_cmd = app.add_subcommand("compare", "Compare finished runs, or train and compare variants");
  add_common(cmp_cmd, common, true);
  cmp_cmd->add_option("runs", cmp_args.run_dirs, "Run directories");
  cmp_cmd->add_option("--variants", cmp_args.variants, "Variants to train")->delimiter(',');
  cmp_cmd->add_option("--seeds", cmp_args.seeds, "Seeds to train")->delimiter(',');

  SyntheticArgs syn_args;
  auto *syn_cmd = app.add_subcommand("make-synthetic", "Write a procedural stand-in dataset");
  syn_cmd->add_option("--n", syn_args.n, "Number of images")->capture_default_str();
  syn_cmd->add_option("--seed", syn_args.seed, "Seed")->capture_default_str();
  syn_cmd->add_option("--size", syn_args.size, "Image size")->capture_default_str();
  syn_cmd->add_option("--out", common.out, "Output directory")->capture_default_str();
  syn_cmd->add_flag("--no-timestamp", common.exact_out, "Write directly into --out");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(common, resume);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(common, eval_args);
    }
    if (gen_cmd->parsed()) {
      return cmd_generate(common, gen_args);
    }
    if (plot_cmd->parsed()) {
      return cmd_plot(common, csvs);
    }
    if (cmp_cmd->parsed()) {
      return cmd_compare(common, cmp_args);
    }
    if (syn_cmd->parsed()) {
      return cmd_make_synthetic(common, syn_args);
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingAborted &e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

} // namespace evogan
