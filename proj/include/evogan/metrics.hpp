#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evogan/nn/layers.hpp"

namespace evogan {

/// Gaussian fitted to an embedded image set.
struct FidStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::Index n = 0;

  [[nodiscard]] Eigen::Index dim() const { return mu.size(); }
};

class MetricError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an embedder's weights cannot be found; the message says how
/// to obtain them.
class EmbedderUnavailable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Embedder {
public:
  virtual ~Embedder() = default;
  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual int dim() const = 0;
  /// n x d features, one row per image.
  [[nodiscard]] virtual RowBatch<double> embed(const ImageBatch<float> &images) const = 0;
};

/// Fixed random-weight convolutional feature extractor (d = 64). Needs no
/// downloads, so it backs fast local evaluation.
class ToyConvEmbedder final : public Embedder {
public:
  static constexpr const char *kId = "toy_conv";
  static constexpr std::uint64_t kWeightSeed = 0x5EED'F1D0ULL;

  explicit ToyConvEmbedder(ImageShape shape = {});

  [[nodiscard]] std::string id() const override { return kId; }
  [[nodiscard]] int dim() const override { return 64; }
  [[nodiscard]] RowBatch<double> embed(const ImageBatch<float> &images) const override;

private:
  ImageShape shape_;
  nn::Conv2d<float> conv1_, conv2_, conv3_;
};

/// Pool-layer (2048-d) features of an Inception-v3 ONNX graph evaluated
/// through OpenCV's dnn module. Inputs are resized to 299x299 and passed in
/// the [-1, 1] range.
class InceptionEmbedder final : public Embedder {
public:
  static constexpr const char *kId = "inception_v3";
  static constexpr const char *kWeightsFile = "inception_v3_pool3.onnx";

  /// Throws EmbedderUnavailable when the weights file does not exist.
  explicit InceptionEmbedder(const std::filesystem::path &weights);
  ~InceptionEmbedder() override;

  [[nodiscard]] std::string id() const override { return kId; }
  [[nodiscard]] int dim() const override { return 2048; }
  [[nodiscard]] RowBatch<double> embed(const ImageBatch<float> &images) const override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Cache directory: $EVOGAN_CACHE, else ~/.cache/evogan.
std::filesystem::path cache_directory();

/// "toy_conv" or "inception_v3" (weights looked up in the cache directory).
std::unique_ptr<Embedder> make_embedder(const std::string &id, ImageShape shape = {});

RowBatch<double> embed_images(const ImageBatch<float> &images, const Embedder &embedder,
                              Eigen::Index chunk = 256);

/// Column means and unbiased (n - 1) covariance.
FidStats gaussian_stats(const RowBatch<double> &features);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const FidStats &a, const FidStats &b);

struct ConvergenceResult {
  int epoch = 0;       // epoch label of the first stable point
  std::size_t index = 0;
  bool converged = false;
};

/// First point whose trailing moving average (shorter at the start of the
/// series) stays within `tolerance` (relative) of the final moving average
/// from there on. A series that only settles at its last point is reported
/// as not converged.
ConvergenceResult convergence_epoch(const std::vector<int> &epochs, const std::vector<double> &fid,
                                    std::size_t window, double tolerance);

void write_fid_stats(const std::filesystem::path &path, const FidStats &stats, const std::string &embedder_id);

struct CachedFidStats {
  FidStats stats;
  std::string embedder_id;
};

CachedFidStats read_fid_stats(const std::filesystem::path &path);

} // namespace evogan
