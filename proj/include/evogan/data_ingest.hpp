#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evogan/types.hpp"

namespace evogan {

class DatasetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One class/subtype folder of a dataset.
struct SubtypeEntry {
  std::string class_name;
  std::string subtype;
  std::vector<std::filesystem::path> files; // relative to the dataset root, sorted

  [[nodiscard]] std::size_t count() const { return files.size(); }
};

struct DatasetManifest {
  std::filesystem::path source_path;
  std::vector<SubtypeEntry> classes;
  std::size_t total_samples = 0;
  int height = 28;
  int width = 28;

  /// Absolute path of sample `index` (samples are numbered class by class).
  [[nodiscard]] std::filesystem::path file(std::size_t index) const;
  /// Sample count of the named subtype, or 0.
  [[nodiscard]] std::size_t count(const std::string &subtype) const;
};

/// Walks root/<class>/<subtype>/<image> (images placed directly in a class
/// folder form a subtype named after the class). Undecodable files are skipped.
DatasetManifest scan_dataset(const std::filesystem::path &root, int resolution = 28);

/// Loads, bilinearly resizes and normalizes the given samples into a
/// 3-channel RGB batch. Grayscale sources are replicated across channels.
ImageBatch<float> load_batch(const DatasetManifest &manifest, std::span<const std::size_t> indices,
                             int target_resolution = 28);
ImageBatch<float> load_all(const DatasetManifest &manifest, int target_resolution = 28);

/// 8-bit value -> [-1, 1] via v / 127.5 - 1.
constexpr float normalize_pixel(double value) { return static_cast<float>(value / 127.5 - 1.0); }
/// Inverse of normalize_pixel, rounded and clamped to 8 bits.
std::uint8_t denormalize_pixel(float value);

struct SyntheticSpec {
  int height = 28;
  int width = 28;
};

/// Writes n_samples procedurally drawn cell-like images under
/// out_dir/<class>/<subtype>/ and returns the scanned manifest. Output bytes
/// depend only on (n_samples, spec, seed).
DatasetManifest make_synthetic_dataset(std::size_t n_samples, const SyntheticSpec &spec, std::uint64_t seed,
                                       const std::filesystem::path &out_dir);

std::string manifest_to_json(const DatasetManifest &manifest);
DatasetManifest manifest_from_json(const std::string &text);

/// Writes an image batch as a tiled PNG grid with `columns` tiles per row.
void write_image_grid(const std::filesystem::path &path, const ImageBatch<float> &images, int columns,
                      int scale = 1);
void write_image(const std::filesystem::path &path, const ImageBatch<float> &images, Eigen::Index row);

} // namespace evogan
