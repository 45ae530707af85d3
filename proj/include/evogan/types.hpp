#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace evogan {

// Feature-major working storage: one column per sample (or per sample pixel
// for convolutional activations, which makes the memory layout NHWC).
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Sample-major storage: one row per sample.
template <typename Scalar>
using RowBatch = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct ImageShape {
  int channels = 3;
  int height = 28;
  int width = 28;

  [[nodiscard]] constexpr int pixels() const { return height * width; }
  [[nodiscard]] constexpr int size() const { return channels * height * width; }
  friend constexpr bool operator==(const ImageShape &, const ImageShape &) = default;
};

inline std::string to_string(const ImageShape &s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

/// Batch of images, one image per row in channel-plane (NCHW) order.
/// Values are expected in [-1, 1].
template <typename Scalar>
struct ImageBatch {
  ImageShape shape;
  RowBatch<Scalar> pixels;

  ImageBatch() = default;
  ImageBatch(ImageShape s, Eigen::Index batch) : shape(s), pixels(batch, s.size()) {
    pixels.setZero();
  }
  ImageBatch(ImageShape s, RowBatch<Scalar> p) : shape(s), pixels(std::move(p)) {
    if (pixels.cols() != shape.size()) {
      throw ShapeError("image batch has " + std::to_string(pixels.cols()) +
                       " values per row, expected " + std::to_string(shape.size()));
    }
  }

  [[nodiscard]] Eigen::Index batch() const { return pixels.rows(); }

  Scalar &at(Eigen::Index b, int c, int y, int x) {
    return pixels(b, (c * shape.height + y) * shape.width + x);
  }
  [[nodiscard]] Scalar at(Eigen::Index b, int c, int y, int x) const {
    return pixels(b, (c * shape.height + y) * shape.width + x);
  }

  template <typename Other>
  [[nodiscard]] ImageBatch<Other> cast() const {
    return ImageBatch<Other>(shape, pixels.template cast<Other>());
  }
};

} // namespace evogan
