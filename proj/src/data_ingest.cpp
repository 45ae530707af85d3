#include "evogan/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fs = std::filesystem;

namespace evogan {

namespace {

bool has_image_extension(const fs::path &p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

bool decodes(const fs::path &p) { return !cv::imread(p.string(), cv::IMREAD_COLOR).empty(); }

std::vector<fs::path> sorted_entries(const fs::path &dir) {
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(dir)) {
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

fs::path DatasetManifest::file(std::size_t index) const {
  for (const auto &entry : classes) {
    if (index < entry.count()) {
      return source_path / entry.files[index];
    }
    index -= entry.count();
  }
  throw std::out_of_range("dataset index out of range");
}

std::size_t DatasetManifest::count(const std::string &subtype) const {
  std::size_t n = 0;
  for (const auto &entry : classes) {
    if (entry.subtype == subtype) {
      n += entry.count();
    }
  }
  return n;
}

DatasetManifest scan_dataset(const fs::path &root, int resolution) {
  if (!fs::is_directory(root)) {
    throw DatasetError("dataset root " + root.string() + " does not exist or is not a directory");
  }
  DatasetManifest manifest;
  manifest.source_path = fs::absolute(root).lexically_normal();
  manifest.height = resolution;
  manifest.width = resolution;
  for (const auto &class_dir : sorted_entries(root)) {
    if (!fs::is_directory(class_dir)) {
      continue;
    }
    const std::string class_name = class_dir.filename().string();
    SubtypeEntry loose{class_name, class_name, {}};
    for (const auto &entry : sorted_entries(class_dir)) {
      if (fs::is_directory(entry)) {
        SubtypeEntry sub{class_name, entry.filename().string(), {}};
        for (const auto &file : sorted_entries(entry)) {
          if (fs::is_regular_file(file) && has_image_extension(file) && decodes(file)) {
            sub.files.push_back(fs::relative(file, root));
          }
        }
        if (!sub.files.empty()) {
          manifest.classes.push_back(std::move(sub));
        }
      } else if (fs::is_regular_file(entry) && has_image_extension(entry) && decodes(entry)) {
        loose.files.push_back(fs::relative(entry, root));
      }
    }
    if (!loose.files.empty()) {
      manifest.classes.push_back(std::move(loose));
    }
  }
  for (const auto &entry : manifest.classes) {
    manifest.total_samples += entry.count();
  }
  if (manifest.total_samples == 0) {
    throw DatasetError("dataset " + root.string() + " contains no decodable images");
  }
  return manifest;
}

ImageBatch<float> load_batch(const DatasetManifest &manifest, std::span<const std::size_t> indices,
                             int target_resolution) {
  const ImageShape shape{3, target_resolution, target_resolution};
  ImageBatch<float> batch(shape, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= manifest.total_samples) {
      throw std::out_of_range("load_batch: index " + std::to_string(indices[i]) + " outside dataset of " +
                              std::to_string(manifest.total_samples));
    }
    const fs::path path = manifest.file(indices[i]);
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
      throw DatasetError("cannot decode image " + path.string());
    }
    if (bgr.rows != target_resolution || bgr.cols != target_resolution) {
      cv::Mat resized;
      cv::resize(bgr, resized, cv::Size(target_resolution, target_resolution), 0, 0, cv::INTER_LINEAR);
      bgr = resized;
    }
    const auto row = static_cast<Eigen::Index>(i);
    for (int y = 0; y < target_resolution; ++y) {
      const auto *px = bgr.ptr<cv::Vec3b>(y);
      for (int x = 0; x < target_resolution; ++x) {
        for (int c = 0; c < 3; ++c) {
          batch.at(row, c, y, x) = normalize_pixel(px[x][2 - c]);
        }
      }
    }
  }
  return batch;
}

ImageBatch<float> load_all(const DatasetManifest &manifest, int target_resolution) {
  std::vector<std::size_t> all(manifest.total_samples);
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i] = i;
  }
  return load_batch(manifest, all, target_resolution);
}

std::uint8_t denormalize_pixel(float value) {
  const double v = std::round((static_cast<double>(value) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

namespace {

struct SyntheticSubtype {
  const char *class_name;
  const char *subtype;
};

// Mirrors the benign/malignant folder structure of blood-smear datasets.
constexpr SyntheticSubtype kSyntheticSubtypes[] = {
    {"benign", "hematogones"},
    {"malignant", "early_pre_b"},
    {"malignant", "pre_b"},
    {"malignant", "pro_b"},
};

double smooth_edge(double distance, double radius) {
  return std::clamp(radius + 0.5 - distance, 0.0, 1.0);
}

cv::Mat draw_cell(int kind, const SyntheticSpec &spec, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = spec.height;
  const double w = spec.width;
  const double scale = std::min(h, w) / 28.0;
  const double cx = w / 2.0 + (unit(rng) - 0.5) * 8.0 * scale;
  const double cy = h / 2.0 + (unit(rng) - 0.5) * 8.0 * scale;
  const double radius = (5.0 + 5.0 * unit(rng)) * scale;
  const double stretch = 0.6 + 0.3 * unit(rng);
  const double angle = unit(rng) * 3.14159265358979;
  const double tone = unit(rng);
  const double background[3] = {225.0 + 20.0 * tone, 205.0 + 20.0 * tone, 215.0};
  const double cytoplasm[3] = {170.0 + 30.0 * tone, 150.0, 200.0};
  const double nucleus[3] = {90.0 + 40.0 * tone, 40.0, 120.0 + 30.0 * tone};

  cv::Mat img(spec.height, spec.width, CV_8UC3);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double r = std::hypot(dx, dy);
      double cell = 0.0;
      double core = 0.0;
      switch (kind) {
      case 0: // small round cell, mostly nucleus
        cell = smooth_edge(r, radius);
        core = smooth_edge(r, radius * 0.8);
        break;
      case 1: // large cytoplasm ring with a central nucleus
        cell = smooth_edge(r, radius);
        core = smooth_edge(r, radius * 0.45);
        break;
      case 2: { // elongated cell
        const double u = (dx * ca + dy * sa);
        const double v = (-dx * sa + dy * ca) / stretch;
        cell = smooth_edge(std::hypot(u, v), radius);
        core = smooth_edge(std::hypot(u, v), radius * 0.6);
        break;
      }
      default: { // lobed nucleus
        const double off = radius * 0.35;
        cell = smooth_edge(r, radius);
        core = std::max(smooth_edge(std::hypot(dx - off * ca, dy - off * sa), radius * 0.45),
                        smooth_edge(std::hypot(dx + off * ca, dy + off * sa), radius * 0.45));
        break;
      }
      }
      auto &px = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        const double base = background[c] * (1.0 - cell) + cytoplasm[c] * cell;
        const double value = base * (1.0 - core) + nucleus[c] * core;
        px[2 - c] = static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, 255.0));
      }
    }
  }
  return img;
}

} // namespace

DatasetManifest make_synthetic_dataset(std::size_t n_samples, const SyntheticSpec &spec, std::uint64_t seed,
                                       const fs::path &out_dir) {
  if (n_samples < 2) {
    throw std::invalid_argument("make_synthetic_dataset: n_samples must be >= 2");
  }
  std::error_code ec;
  for (const auto &s : kSyntheticSubtypes) {
    fs::create_directories(out_dir / s.class_name / s.subtype, ec);
    if (ec) {
      throw DatasetError("cannot create " + (out_dir / s.class_name / s.subtype).string() + ": " + ec.message());
    }
  }
  std::mt19937_64 rng(seed);
  const std::vector<int> png_params{cv::IMWRITE_PNG_COMPRESSION, 6};
  constexpr int kKinds = static_cast<int>(std::size(kSyntheticSubtypes));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int kind = static_cast<int>(i % kKinds);
    const auto &s = kSyntheticSubtypes[kind];
    const cv::Mat img = draw_cell(kind, spec, rng);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06zu.png", i);
    const fs::path path = out_dir / s.class_name / s.subtype / name;
    if (!cv::imwrite(path.string(), img, png_params)) {
      throw DatasetError("cannot write " + path.string());
    }
  }
  return scan_dataset(out_dir, std::max(spec.height, spec.width));
}

std::string manifest_to_json(const DatasetManifest &manifest) {
  nlohmann::json j;
  j["source_path"] = manifest.source_path.string();
  j["total_samples"] = manifest.total_samples;
  j["resolution"] = {manifest.height, manifest.width};
  j["classes"] = nlohmann::json::array();
  for (const auto &entry : manifest.classes) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto &f : entry.files) {
      files.push_back(f.generic_string());
    }
    j["classes"].push_back(
        {{"class", entry.class_name}, {"subtype", entry.subtype}, {"count", entry.count()}, {"files", files}});
  }
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string &text) {
  const auto j = nlohmann::json::parse(text);
  DatasetManifest m;
  m.source_path = j.at("source_path").get<std::string>();
  m.total_samples = j.at("total_samples").get<std::size_t>();
  m.height = j.at("resolution").at(0).get<int>();
  m.width = j.at("resolution").at(1).get<int>();
  std::size_t sum = 0;
  for (const auto &c : j.at("classes")) {
    SubtypeEntry e{c.at("class").get<std::string>(), c.at("subtype").get<std::string>(), {}};
    for (const auto &f : c.at("files")) {
      e.files.emplace_back(f.get<std::string>());
    }
    if (e.count() != c.at("count").get<std::size_t>()) {
      throw DatasetError("manifest: count of " + e.subtype + " disagrees with its file list");
    }
    sum += e.count();
    m.classes.push_back(std::move(e));
  }
  if (sum != m.total_samples) {
    throw DatasetError("manifest: total_samples disagrees with per-subtype counts");
  }
  return m;
}

namespace {

cv::Mat to_bgr(const ImageBatch<float> &images, Eigen::Index row, int scale) {
  const ImageShape &s = images.shape;
  cv::Mat img(s.height * scale, s.width * scale, CV_8UC3);
  for (int y = 0; y < s.height * scale; ++y) {
    for (int x = 0; x < s.width * scale; ++x) {
      auto &px = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        const int src = s.channels == 3 ? c : 0;
        px[2 - c] = denormalize_pixel(images.at(row, src, y / scale, x / scale));
      }
    }
  }
  return img;
}

} // namespace

void write_image_grid(const fs::path &path, const ImageBatch<float> &images, int columns, int scale) {
  if (images.batch() == 0 || columns < 1) {
    throw std::invalid_argument("write_image_grid: nothing to write");
  }
  const ImageShape &s = images.shape;
  const int n = static_cast<int>(images.batch());
  const int rows = (n + columns - 1) / columns;
  constexpr int kGap = 2;
  const int tile_h = s.height * scale;
  const int tile_w = s.width * scale;
  cv::Mat grid(rows * tile_h + (rows + 1) * kGap, columns * tile_w + (columns + 1) * kGap, CV_8UC3,
               cv::Scalar(255, 255, 255));
  for (int i = 0; i < n; ++i) {
    const int r = i / columns;
    const int c = i % columns;
    to_bgr(images, i, scale)
        .copyTo(grid(cv::Rect(kGap + c * (tile_w + kGap), kGap + r * (tile_h + kGap), tile_w, tile_h)));
  }
  if (!cv::imwrite(path.string(), grid)) {
    throw DatasetError("cannot write " + path.string());
  }
}

void write_image(const fs::path &path, const ImageBatch<float> &images, Eigen::Index row) {
  if (!cv::imwrite(path.string(), to_bgr(images, row, 1))) {
    throw DatasetError("cannot write " + path.string());
  }
}

} // namespace evogan
