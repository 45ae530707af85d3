#include "evogan/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <random>

#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

namespace evogan {

ToyConvEmbedder::ToyConvEmbedder(ImageShape shape) : shape_(shape) {
  if (shape.height < 8 || shape.width < 8) {
    throw std::invalid_argument("toy_conv embedder needs images of at least 8x8");
  }
  const nn::ConvGeometry g1{shape.channels, shape.height, shape.width};
  conv1_ = nn::Conv2d<float>(g1, 16, "embed.conv1");
  const nn::ConvGeometry g2{16, g1.out_height(), g1.out_width()};
  conv2_ = nn::Conv2d<float>(g2, 32, "embed.conv2");
  const nn::ConvGeometry g3{32, g2.out_height(), g2.out_width()};
  conv3_ = nn::Conv2d<float>(g3, 64, "embed.conv3");

  std::mt19937_64 rng(kWeightSeed);
  conv1_.init(rng, std::sqrt(2.0 / g1.patch_size()));
  conv2_.init(rng, std::sqrt(2.0 / g2.patch_size()));
  conv3_.init(rng, std::sqrt(2.0 / g3.patch_size()));
}

RowBatch<double> ToyConvEmbedder::embed(const ImageBatch<float> &images) const {
  if (images.shape != shape_) {
    throw ShapeError("toy_conv embedder: expected images of shape " + to_string(shape_));
  }
  const Eigen::Index batch = images.batch();
  Matrix<float> x = nn::nchw_to_nhwc(images.pixels, shape_);
  x = nn::leaky_relu(conv1_.forward(x, batch), 0.2f);
  x = nn::leaky_relu(conv2_.forward(x, batch), 0.2f);
  x = nn::leaky_relu(conv3_.forward(x, batch), 0.2f);
  const auto &g3 = conv3_.geometry();
  const Eigen::Index hw = static_cast<Eigen::Index>(g3.out_height()) * g3.out_width();
  RowBatch<double> features(batch, 64);
  for (Eigen::Index b = 0; b < batch; ++b) {
    features.row(b) = x.middleCols(b * hw, hw).rowwise().mean().transpose().cast<double>();
  }
  return features;
}

struct InceptionEmbedder::Impl {
  mutable cv::dnn::Net net;
};

InceptionEmbedder::InceptionEmbedder(const std::filesystem::path &weights) {
  if (!std::filesystem::exists(weights)) {
    throw EmbedderUnavailable(
        "inception_v3 embedder weights not found at " + weights.string() +
        ". Export them with `python3 tools/export_inception.py " + weights.string() +
        "` on a machine with network access (it downloads the standard FID Inception "
        "weights), or set EVOGAN_CACHE to a directory containing " + kWeightsFile + ".");
  }
  impl_ = std::make_unique<Impl>();
  impl_->net = cv::dnn::readNetFromONNX(weights.string());
  impl_->net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  impl_->net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
}

InceptionEmbedder::~InceptionEmbedder() = default;

RowBatch<double> InceptionEmbedder::embed(const ImageBatch<float> &images) const {
  constexpr int kSide = 299;
  const Eigen::Index batch = images.batch();
  const ImageShape &s = images.shape;
  if (s.channels != 3) {
    throw ShapeError("inception_v3 embedder expects 3-channel images");
  }
  const int dims[] = {static_cast<int>(batch), 3, kSide, kSide};
  cv::Mat blob(4, dims, CV_32F);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < 3; ++c) {
      cv::Mat plane(s.height, s.width, CV_32F,
                    const_cast<float *>(images.pixels.data() + b * s.size() + c * s.pixels()));
      cv::Mat dst(kSide, kSide, CV_32F, blob.ptr<float>(static_cast<int>(b), c));
      cv::resize(plane, dst, cv::Size(kSide, kSide), 0, 0, cv::INTER_LINEAR);
    }
  }
  impl_->net.setInput(blob);
  const cv::Mat out = impl_->net.forward();
  const auto per_row = static_cast<Eigen::Index>(out.total() / static_cast<std::size_t>(batch));
  if (per_row != dim()) {
    throw MetricError("inception_v3 graph produced " + std::to_string(per_row) +
                      " features per image, expected 2048");
  }
  RowBatch<double> features(batch, dim());
  const auto *src = out.ptr<float>();
  for (Eigen::Index i = 0; i < features.size(); ++i) {
    features.data()[i] = static_cast<double>(src[i]);
  }
  return features;
}

std::filesystem::path cache_directory() {
  if (const char *env = std::getenv("EVOGAN_CACHE"); env != nullptr && *env != '\0') {
    return env;
  }
  if (const char *home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return std::filesystem::path(home) / ".cache" / "evogan";
  }
  return std::filesystem::temp_directory_path() / "evogan-cache";
}

std::unique_ptr<Embedder> make_embedder(const std::string &id, ImageShape shape) {
  if (id == ToyConvEmbedder::kId) {
    return std::make_unique<ToyConvEmbedder>(shape);
  }
  if (id == InceptionEmbedder::kId) {
    return std::make_unique<InceptionEmbedder>(cache_directory() / InceptionEmbedder::kWeightsFile);
  }
  throw std::invalid_argument("unknown embedder '" + id + "' (expected toy_conv or inception_v3)");
}

RowBatch<double> embed_images(const ImageBatch<float> &images, const Embedder &embedder,
                              Eigen::Index chunk) {
  RowBatch<double> out(images.batch(), embedder.dim());
  for (Eigen::Index start = 0; start < images.batch(); start += chunk) {
    const Eigen::Index n = std::min(chunk, images.batch() - start);
    const ImageBatch<float> part(images.shape, images.pixels.middleRows(start, n));
    out.middleRows(start, n) = embedder.embed(part);
  }
  return out;
}

FidStats gaussian_stats(const RowBatch<double> &features) {
  if (features.rows() < 2) {
    throw MetricError("gaussian_stats: need at least 2 samples, got " + std::to_string(features.rows()));
  }
  FidStats s;
  s.n = features.rows();
  s.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mu.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(s.n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) {
    throw MetricError("frechet_distance: eigendecomposition did not converge");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

double frechet_distance(const FidStats &a, const FidStats &b) {
  if (a.dim() != b.dim() || a.sigma.rows() != a.dim() || b.sigma.rows() != b.dim()) {
    throw MetricError("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()) + ")");
  }
  // Tr((S_a S_b)^{1/2}) = Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}); the inner
  // product is symmetric, so its spectrum is real.
  const Eigen::MatrixXd root_a = psd_sqrt(a.sigma);
  const Eigen::MatrixXd inner = root_a * b.sigma * root_a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()),
                                                           Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw MetricError("frechet_distance: eigendecomposition did not converge");
  }
  double trace_root = 0.0;
  double residue = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()(i);
    if (v >= 0.0) {
      trace_root += std::sqrt(v);
    } else {
      residue += std::sqrt(-v);
    }
  }
  if (residue > 1e-3 * std::max(1.0, trace_root)) {
    throw MetricError("frechet_distance: covariance product square root has a large imaginary part (" +
                      std::to_string(residue) + ")");
  }
  const double d = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * trace_root;
  return std::max(0.0, d);
}

ConvergenceResult convergence_epoch(const std::vector<int> &epochs, const std::vector<double> &fid,
                                    std::size_t window, double tolerance) {
  if (epochs.size() != fid.size()) {
    throw std::invalid_argument("convergence_epoch: epochs and values differ in length");
  }
  if (window < 1 || fid.size() <= window) {
    throw std::invalid_argument("convergence_epoch: series of length " + std::to_string(fid.size()) +
                                " is too short for window " + std::to_string(window));
  }
  const std::size_t n = fid.size();
  std::vector<double> average(n);
  double running = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    running += fid[i];
    if (i >= window) {
      running -= fid[i - window];
    }
    average[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  const double final_avg = average.back();
  const double band = tolerance * std::abs(final_avg);
  std::size_t first = n - 1;
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(average[i] - final_avg) > band) {
      break;
    }
    first = i;
  }
  return {epochs[first], first, first + 1 < n};
}

namespace {

constexpr char kFidMagic[4] = {'F', 'I', 'D', 'S'};
constexpr std::uint32_t kFidVersion = 1;

template <typename T>
void put(std::ostream &os, const T &v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &is) {
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is) {
    throw MetricError("fid stats file is truncated");
  }
  return v;
}

} // namespace

void write_fid_stats(const std::filesystem::path &path, const FidStats &stats, const std::string &embedder_id) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw MetricError("cannot write fid stats to " + path.string());
  }
  os.write(kFidMagic, sizeof(kFidMagic));
  put(os, kFidVersion);
  put(os, static_cast<std::uint32_t>(embedder_id.size()));
  os.write(embedder_id.data(), static_cast<std::streamsize>(embedder_id.size()));
  put(os, static_cast<std::uint64_t>(stats.n));
  put(os, static_cast<std::uint64_t>(stats.dim()));
  os.write(reinterpret_cast<const char *>(stats.mu.data()),
           static_cast<std::streamsize>(sizeof(double) * stats.mu.size()));
  os.write(reinterpret_cast<const char *>(stats.sigma.data()),
           static_cast<std::streamsize>(sizeof(double) * stats.sigma.size()));
  if (!os) {
    throw MetricError("failed writing fid stats to " + path.string());
  }
}

CachedFidStats read_fid_stats(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw MetricError("cannot open fid stats " + path.string());
  }
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 4, kFidMagic)) {
    throw MetricError(path.string() + " is not a fid stats file");
  }
  if (const auto version = get<std::uint32_t>(is); version != kFidVersion) {
    throw MetricError("unsupported fid stats version " + std::to_string(version));
  }
  CachedFidStats out;
  out.embedder_id.resize(get<std::uint32_t>(is));
  is.read(out.embedder_id.data(), static_cast<std::streamsize>(out.embedder_id.size()));
  out.stats.n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  out.stats.mu.resize(d);
  out.stats.sigma.resize(d, d);
  is.read(reinterpret_cast<char *>(out.stats.mu.data()), static_cast<std::streamsize>(sizeof(double) * d));
  is.read(reinterpret_cast<char *>(out.stats.sigma.data()),
          static_cast<std::streamsize>(sizeof(double) * d * d));
  if (!is) {
    throw MetricError("fid stats file " + path.string() + " is truncated");
  }
  return out;
}

} // namespace evogan
