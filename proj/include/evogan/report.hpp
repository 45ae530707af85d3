#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evogan/config.hpp"
#include "evogan/training.hpp"

namespace evogan {

class ReportError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMetricsSchemaVersion = 1;

/// epoch,g_loss,d_loss,fid,ga_best_fitness,wall_time
const std::vector<std::string> &metrics_columns();

/// Rewrites the whole file (via a temporary and rename). Optional fields are
/// left empty.
void write_metrics_csv(const std::filesystem::path &path, const std::vector<EpochRecord> &records);

/// Throws ReportError naming the offending column on a schema mismatch, and
/// on a file without records.
std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path &path);

struct Series {
  std::string label;
  std::vector<EpochRecord> records;
};

/// FID-vs-epoch overlay of several runs.
void plot_fid(const std::filesystem::path &path, const std::vector<Series> &runs);
/// Per-epoch generator and discriminator loss curves of one run.
void plot_losses(const std::filesystem::path &path, const Series &run);

/// Reads every CSV before writing anything; writes fid_comparison.png and
/// loss_<label>.png per run. Returns the written files.
std::vector<std::filesystem::path> plot_runs(const std::vector<std::filesystem::path> &metrics_csvs,
                                             const std::filesystem::path &out_dir);

struct VariantSummary {
  std::string label;
  std::optional<double> starting_fid;
  std::optional<double> final_fid;
  std::optional<int> convergence_epoch;
  bool converged = false;
  /// (baseline - this) / baseline, against the first run labelled as a
  /// baseline variant.
  std::optional<double> final_reduction;
  std::optional<double> starting_reduction;
};

struct Comparison {
  std::vector<Series> runs;
  std::vector<VariantSummary> summaries;
  std::size_t effective_window = 0;
};

/// Aligns the FID series of the runs and summarizes each one. All runs must
/// share their fid epochs.
Comparison compare_series(const std::vector<Series> &runs, std::size_t convergence_window, double tolerance,
                          const std::string &baseline_label = {});

/// Writes fid_series.csv (epoch plus one column per run), summary.csv and
/// fid_comparison.png.
std::vector<std::filesystem::path> write_comparison(const Comparison &comparison,
                                                    const std::filesystem::path &out_dir);

/// Compares finished runs (directories holding metrics.csv and
/// config.resolved.cfg). Mismatched fid_interval is an error.
Comparison compare_runs(const std::vector<std::filesystem::path> &run_dirs);

/// Trains each config into out_dir/<variant>_seed<seed>/ and compares them.
/// The configs must differ only in variant and seed.
Comparison compare_variants(const std::vector<TrainingConfig> &configs, const std::filesystem::path &out_dir,
                            bool use_stats_cache = true);

} // namespace evogan
