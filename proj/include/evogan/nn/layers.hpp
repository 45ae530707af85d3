#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "evogan/types.hpp"

namespace evogan::nn {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
using ParameterRefs = std::vector<Parameter<Scalar> *>;

template <typename Scalar, typename Rng>
void fill_normal(Matrix<Scalar> &m, double stddev, Rng &rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Scalar>(dist(rng));
  }
}

// Activations operate elementwise on feature-major matrices.

template <typename Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived> &x, typename Derived::Scalar slope) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([slope](S v) { return v > S(0) ? v : slope * v; }).eval();
}

template <typename Scalar>
Matrix<Scalar> leaky_relu_backward(const Matrix<Scalar> &x, const Matrix<Scalar> &dy,
                                   Scalar slope) {
  return dy.binaryExpr(x, [slope](Scalar g, Scalar v) { return v > Scalar(0) ? g : slope * g; });
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived> &x) {
  return x.cwiseMax(typename Derived::Scalar(0)).eval();
}

template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar> &x, const Matrix<Scalar> &dy) {
  return dy.binaryExpr(x, [](Scalar g, Scalar v) { return v > Scalar(0) ? g : Scalar(0); });
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived> &x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) {
            if (v >= S(0)) {
              return S(1) / (S(1) + std::exp(-v));
            }
            const S e = std::exp(v);
            return e / (S(1) + e);
          })
      .eval();
}

/// Fully connected layer, y = W x + b, columns are samples.
template <typename Scalar>
class Dense {
public:
  Dense() = default;
  Dense(int in_features, int out_features, const std::string &name)
      : weight_(name + ".weight", out_features, in_features), bias_(name + ".bias", out_features, 1) {}

  template <typename Rng>
  void init(Rng &rng, double stddev) {
    fill_normal(weight_.value, stddev, rng);
    bias_.value.setZero();
  }

  [[nodiscard]] int in_features() const { return static_cast<int>(weight_.value.cols()); }
  [[nodiscard]] int out_features() const { return static_cast<int>(weight_.value.rows()); }

  [[nodiscard]] Matrix<Scalar> forward(const Matrix<Scalar> &x) const {
    if (x.rows() != weight_.value.cols()) {
      throw ShapeError(weight_.name + ": input has " + std::to_string(x.rows()) +
                       " features, expected " + std::to_string(weight_.value.cols()));
    }
    Matrix<Scalar> y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Matrix<Scalar> backward(const Matrix<Scalar> &x, const Matrix<Scalar> &dy) {
    weight_.grad.noalias() += dy * x.transpose();
    bias_.grad.col(0) += dy.rowwise().sum();
    return weight_.value.transpose() * dy;
  }

  void collect(ParameterRefs<Scalar> &out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

/// Square-kernel convolution geometry for NHWC feature-major activations
/// (rows are channels, columns run over batch, then y, then x).
struct ConvGeometry {
  int channels = 0;
  int in_height = 0;
  int in_width = 0;
  int kernel = 4;
  int stride = 2;
  int padding = 1;

  [[nodiscard]] int out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  [[nodiscard]] int out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
  [[nodiscard]] int patch_size() const { return kernel * kernel * channels; }
};

// Patch rows are ordered (ky, kx, c) with the channel fastest, so every patch
// entry copies a contiguous channel vector.
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar> &x, const ConvGeometry &g, Eigen::Index batch) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(g.patch_size(), batch * oh * ow);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index col = (b * oh + oy) * ow + ox;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_height) {
            continue;
          }
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.in_width) {
              continue;
            }
            cols.col(col).segment((ky * g.kernel + kx) * g.channels, g.channels) =
                x.col((b * g.in_height + iy) * g.in_width + ix);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar> &cols, const ConvGeometry &g, Eigen::Index batch) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  Matrix<Scalar> x = Matrix<Scalar>::Zero(g.channels, batch * g.in_height * g.in_width);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index col = (b * oh + oy) * ow + ox;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_height) {
            continue;
          }
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.in_width) {
              continue;
            }
            x.col((b * g.in_height + iy) * g.in_width + ix) +=
                cols.col(col).segment((ky * g.kernel + kx) * g.channels, g.channels);
          }
        }
      }
    }
  }
  return x;
}

/// Strided convolution. Input (C_in x B*H*W) -> output (C_out x B*H'*W').
template <typename Scalar>
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(ConvGeometry geometry, int out_channels, const std::string &name)
      : geometry_(geometry), weight_(name + ".weight", out_channels, geometry.patch_size()),
        bias_(name + ".bias", out_channels, 1) {}

  template <typename Rng>
  void init(Rng &rng, double stddev) {
    fill_normal(weight_.value, stddev, rng);
    bias_.value.setZero();
  }

  [[nodiscard]] const ConvGeometry &geometry() const { return geometry_; }
  [[nodiscard]] int out_channels() const { return static_cast<int>(weight_.value.rows()); }

  [[nodiscard]] Matrix<Scalar> forward(const Matrix<Scalar> &x, Eigen::Index batch) const {
    check_input(x, batch);
    Matrix<Scalar> y = weight_.value * im2col(x, geometry_, batch);
    y.colwise() += bias_.value.col(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar> &x, const Matrix<Scalar> &dy, Eigen::Index batch) {
    const Matrix<Scalar> cols = im2col(x, geometry_, batch);
    weight_.grad.noalias() += dy * cols.transpose();
    bias_.grad.col(0) += dy.rowwise().sum();
    return col2im<Scalar>(weight_.value.transpose() * dy, geometry_, batch);
  }

  void collect(ParameterRefs<Scalar> &out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

private:
  void check_input(const Matrix<Scalar> &x, Eigen::Index batch) const {
    if (x.rows() != geometry_.channels ||
        x.cols() != batch * geometry_.in_height * geometry_.in_width) {
      throw ShapeError(weight_.name + ": unexpected input shape");
    }
  }

  ConvGeometry geometry_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

/// Strided transposed convolution, the adjoint of Conv2d on the same
/// geometry. `output_geometry` describes the (larger) output grid.
template <typename Scalar>
class ConvTranspose2d {
public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, ConvGeometry output_geometry, const std::string &name)
      : geometry_(output_geometry),
        weight_(name + ".weight", in_channels, output_geometry.patch_size()),
        bias_(name + ".bias", output_geometry.channels, 1) {}

  template <typename Rng>
  void init(Rng &rng, double stddev) {
    fill_normal(weight_.value, stddev, rng);
    bias_.value.setZero();
  }

  [[nodiscard]] const ConvGeometry &geometry() const { return geometry_; }

  [[nodiscard]] Matrix<Scalar> forward(const Matrix<Scalar> &x, Eigen::Index batch) const {
    if (x.rows() != weight_.value.rows() ||
        x.cols() != batch * geometry_.out_height() * geometry_.out_width()) {
      throw ShapeError(weight_.name + ": unexpected input shape");
    }
    Matrix<Scalar> y = col2im<Scalar>(weight_.value.transpose() * x, geometry_, batch);
    y.colwise() += bias_.value.col(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar> &x, const Matrix<Scalar> &dy, Eigen::Index batch) {
    const Matrix<Scalar> dcols = im2col(dy, geometry_, batch);
    weight_.grad.noalias() += x * dcols.transpose();
    bias_.grad.col(0) += dy.rowwise().sum();
    return weight_.value * dcols;
  }

  void collect(ParameterRefs<Scalar> &out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

private:
  ConvGeometry geometry_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

template <typename Scalar>
struct BatchNormCache {
  Matrix<Scalar> normalized;
  Vector<Scalar> inv_std;
  Vector<Scalar> batch_mean;
  Vector<Scalar> batch_var;
  Eigen::Index count = 0;
};

enum class Mode { train, eval };

/// Batch normalization over rows; every column is one observation, so the
/// same class handles dense features and per-pixel convolution channels.
template <typename Scalar>
class BatchNorm {
public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(int features, const std::string &name)
      : gamma_(name + ".gamma", features, 1), beta_(name + ".beta", features, 1),
        running_mean_(Vector<Scalar>::Zero(features)),
        running_var_(Vector<Scalar>::Ones(features)) {
    gamma_.value.setOnes();
  }

  [[nodiscard]] Matrix<Scalar> forward(const Matrix<Scalar> &x, Mode mode,
                                       BatchNormCache<Scalar> *cache) const {
    Vector<Scalar> mean;
    Vector<Scalar> var;
    if (mode == Mode::train) {
      mean = x.rowwise().mean();
      var = (x.colwise() - mean).array().square().rowwise().mean().matrix();
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    const Vector<Scalar> inv_std =
        (var.array() + static_cast<Scalar>(kEpsilon)).rsqrt().matrix();
    Matrix<Scalar> normalized = (x.colwise() - mean).array().colwise() * inv_std.array();
    Matrix<Scalar> y = (normalized.array().colwise() * gamma_.value.col(0).array()).matrix();
    y.colwise() += beta_.value.col(0);
    if (cache != nullptr) {
      cache->normalized = std::move(normalized);
      cache->inv_std = inv_std;
      cache->batch_mean = std::move(mean);
      cache->batch_var = std::move(var);
      cache->count = x.cols();
    }
    return y;
  }

  /// Train-mode backward pass (batch statistics are part of the graph).
  Matrix<Scalar> backward(const BatchNormCache<Scalar> &cache, const Matrix<Scalar> &dy) {
    const auto &xhat = cache.normalized;
    gamma_.grad.col(0) += (dy.array() * xhat.array()).rowwise().sum().matrix();
    beta_.grad.col(0) += dy.rowwise().sum();
    const Scalar n = static_cast<Scalar>(cache.count);
    const Matrix<Scalar> dxhat = (dy.array().colwise() * gamma_.value.col(0).array()).matrix();
    const Vector<Scalar> sum_dxhat = dxhat.rowwise().sum();
    const Vector<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().sum().matrix();
    Matrix<Scalar> dx = (n * dxhat.array()).matrix();
    dx.colwise() -= sum_dxhat;
    dx -= (xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
    dx = (dx.array().colwise() * (cache.inv_std.array() / n)).matrix();
    return dx;
  }

  void update_running_stats(const BatchNormCache<Scalar> &cache) {
    const Scalar m = static_cast<Scalar>(kMomentum);
    const Scalar n = static_cast<Scalar>(cache.count);
    const Scalar unbias = cache.count > 1 ? n / (n - Scalar(1)) : Scalar(1);
    running_mean_ = (Scalar(1) - m) * running_mean_ + m * cache.batch_mean;
    running_var_ = (Scalar(1) - m) * running_var_ + m * unbias * cache.batch_var;
  }

  void collect(ParameterRefs<Scalar> &out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Vector<Scalar> &running_mean() { return running_mean_; }
  Vector<Scalar> &running_var() { return running_var_; }
  [[nodiscard]] const Vector<Scalar> &running_mean() const { return running_mean_; }
  [[nodiscard]] const Vector<Scalar> &running_var() const { return running_var_; }

private:
  Parameter<Scalar> gamma_;
  Parameter<Scalar> beta_;
  Vector<Scalar> running_mean_;
  Vector<Scalar> running_var_;
};

// Layout conversions between sample-major NCHW images and feature-major NHWC
// activations.

template <typename Scalar>
Matrix<Scalar> nchw_to_nhwc(const RowBatch<Scalar> &images, const ImageShape &shape) {
  const Eigen::Index batch = images.rows();
  const int hw = shape.pixels();
  Matrix<Scalar> out(shape.channels, batch * hw);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < shape.channels; ++c) {
      for (int p = 0; p < hw; ++p) {
        out(c, b * hw + p) = images(b, c * hw + p);
      }
    }
  }
  return out;
}

template <typename Scalar>
RowBatch<Scalar> nhwc_to_nchw(const Matrix<Scalar> &act, const ImageShape &shape) {
  const int hw = shape.pixels();
  const Eigen::Index batch = act.cols() / hw;
  RowBatch<Scalar> out(batch, shape.size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < shape.channels; ++c) {
      for (int p = 0; p < hw; ++p) {
        out(b, c * hw + p) = act(c, b * hw + p);
      }
    }
  }
  return out;
}

/// NHWC activations (C x B*HW) viewed as flat per-sample features (HWC x B).
template <typename Scalar>
Matrix<Scalar> flatten_samples(const Matrix<Scalar> &act, Eigen::Index batch) {
  return Eigen::Map<const Matrix<Scalar>>(act.data(), act.size() / batch, batch);
}

template <typename Scalar>
Matrix<Scalar> unflatten_samples(const Matrix<Scalar> &features, int channels) {
  return Eigen::Map<const Matrix<Scalar>>(features.data(), channels, features.size() / channels);
}

} // namespace evogan::nn
