#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "evogan/latent.hpp"
#include "evogan/nn/layers.hpp"

namespace evogan {

/// Layer widths for the generator / discriminator pair. Defaults follow the
/// small-image InfoGAN topology.
struct NetworkSpec {
  ImageShape image{3, 28, 28};
  LatentSpec latent;
  int g_hidden = 1024;
  int g_base_channels = 128;
  int g_mid_channels = 64;
  int d_channels1 = 64;
  int d_channels2 = 128;
  int d_hidden = 1024;
  int q_hidden = 128;
  double leaky_slope = 0.1;
  double init_stddev = 0.02;

  /// Spatial size of the coarsest feature map (two stride-2 stages).
  [[nodiscard]] int base_height() const { return image.height / 4; }
  [[nodiscard]] int base_width() const { return image.width / 4; }

  void validate() const;

  friend bool operator==(const NetworkSpec &, const NetworkSpec &) = default;
};

template <typename Scalar>
struct GeneratorTape {
  Matrix<Scalar> input;
  Matrix<Scalar> fc1_out, bn1_out, act1;
  Matrix<Scalar> fc2_out, bn2_out, act2;
  Matrix<Scalar> deconv1_out, bn3_out, act3;
  Matrix<Scalar> output;
  nn::BatchNormCache<Scalar> bn1, bn2, bn3;
};

/// dense -> dense -> reshape -> deconv (x2 upsample) -> deconv -> tanh.
template <typename Scalar>
class Generator {
public:
  Generator() = default;

  explicit Generator(const NetworkSpec &spec) : spec_(spec) {
    spec.validate();
    const int bh = spec.base_height();
    const int bw = spec.base_width();
    fc1_ = nn::Dense<Scalar>(spec.latent.total_width(), spec.g_hidden, "g.fc1");
    bn1_ = nn::BatchNorm<Scalar>(spec.g_hidden, "g.bn1");
    fc2_ = nn::Dense<Scalar>(spec.g_hidden, spec.g_base_channels * bh * bw, "g.fc2");
    bn2_ = nn::BatchNorm<Scalar>(spec.g_base_channels, "g.bn2");
    deconv1_ = nn::ConvTranspose2d<Scalar>(
        spec.g_base_channels, nn::ConvGeometry{spec.g_mid_channels, 2 * bh, 2 * bw}, "g.deconv1");
    bn3_ = nn::BatchNorm<Scalar>(spec.g_mid_channels, "g.bn3");
    deconv2_ = nn::ConvTranspose2d<Scalar>(
        spec.g_mid_channels, nn::ConvGeometry{spec.image.channels, spec.image.height, spec.image.width},
        "g.deconv2");
  }

  template <typename Rng>
  void init(Rng &rng) {
    const double s = spec_.init_stddev;
    fc1_.init(rng, s);
    fc2_.init(rng, s);
    deconv1_.init(rng, s);
    deconv2_.init(rng, s);
  }

  [[nodiscard]] const NetworkSpec &spec() const { return spec_; }

  /// latent_input is batch x latent width. In train mode batch statistics
  /// are used; running statistics are only changed by update_running_stats.
  [[nodiscard]] ImageBatch<Scalar> forward(const RowBatch<Scalar> &latent_input, nn::Mode mode,
                                           GeneratorTape<Scalar> *tape = nullptr) const {
    if (latent_input.cols() != spec_.latent.total_width()) {
      throw ShapeError("generator: latent width " + std::to_string(latent_input.cols()) +
                       " does not match expected " + std::to_string(spec_.latent.total_width()));
    }
    const Eigen::Index batch = latent_input.rows();
    GeneratorTape<Scalar> local;
    GeneratorTape<Scalar> &t = tape != nullptr ? *tape : local;

    t.input = latent_input.transpose();
    t.fc1_out = fc1_.forward(t.input);
    t.bn1_out = bn1_.forward(t.fc1_out, mode, &t.bn1);
    t.act1 = nn::relu(t.bn1_out);

    t.fc2_out = nn::unflatten_samples<Scalar>(fc2_.forward(t.act1), spec_.g_base_channels);
    t.bn2_out = bn2_.forward(t.fc2_out, mode, &t.bn2);
    t.act2 = nn::relu(t.bn2_out);

    t.deconv1_out = deconv1_.forward(t.act2, batch);
    t.bn3_out = bn3_.forward(t.deconv1_out, mode, &t.bn3);
    t.act3 = nn::relu(t.bn3_out);

    t.output = deconv2_.forward(t.act3, batch).array().tanh().matrix();
    return ImageBatch<Scalar>(spec_.image, nn::nhwc_to_nchw(t.output, spec_.image));
  }

  /// Accumulates parameter gradients given d(loss)/d(images); returns
  /// d(loss)/d(latent input) as batch x width.
  RowBatch<Scalar> backward(const GeneratorTape<Scalar> &t, const RowBatch<Scalar> &d_images) {
    const Eigen::Index batch = d_images.rows();
    Matrix<Scalar> d = nn::nchw_to_nhwc(d_images, spec_.image);
    d = (d.array() * (Scalar(1) - t.output.array().square())).matrix();
    d = deconv2_.backward(t.act3, d, batch);
    d = bn3_.backward(t.bn3, nn::relu_backward(t.bn3_out, d));
    d = deconv1_.backward(t.act2, d, batch);
    d = bn2_.backward(t.bn2, nn::relu_backward(t.bn2_out, d));
    d = fc2_.backward(t.act1, nn::flatten_samples(d, batch));
    d = bn1_.backward(t.bn1, nn::relu_backward(t.bn1_out, d));
    d = fc1_.backward(t.input, d);
    return d.transpose();
  }

  void update_running_stats(const GeneratorTape<Scalar> &t) {
    bn1_.update_running_stats(t.bn1);
    bn2_.update_running_stats(t.bn2);
    bn3_.update_running_stats(t.bn3);
  }

  nn::ParameterRefs<Scalar> parameters() {
    nn::ParameterRefs<Scalar> out;
    fc1_.collect(out);
    bn1_.collect(out);
    fc2_.collect(out);
    bn2_.collect(out);
    deconv1_.collect(out);
    bn3_.collect(out);
    deconv2_.collect(out);
    return out;
  }

  std::vector<nn::BatchNorm<Scalar> *> batch_norms() { return {&bn1_, &bn2_, &bn3_}; }

private:
  NetworkSpec spec_;
  nn::Dense<Scalar> fc1_, fc2_;
  nn::BatchNorm<Scalar> bn1_, bn2_, bn3_;
  nn::ConvTranspose2d<Scalar> deconv1_, deconv2_;
};

template <typename Scalar>
struct DiscriminatorOutput {
  Vector<Scalar> realness_logit;
  Vector<Scalar> realness;        // sigmoid(realness_logit), in (0, 1)
  RowBatch<Scalar> q_cat_logits;  // batch x (n_categorical * n_classes)
  RowBatch<Scalar> q_cont_means;  // batch x n_continuous
};

template <typename Scalar>
struct DiscriminatorTape {
  Eigen::Index batch = 0;
  Matrix<Scalar> input;
  Matrix<Scalar> conv1_out, act1;
  Matrix<Scalar> conv2_out, act2;
  Matrix<Scalar> flat, fc_out, features;
  Matrix<Scalar> q1_out, q_act;
};

/// Gradients of a scalar loss with respect to the discriminator's outputs.
template <typename Scalar>
struct DiscriminatorGrad {
  Vector<Scalar> realness_logit;
  RowBatch<Scalar> q_cat_logits;
  RowBatch<Scalar> q_cont_means;
};

/// conv -> conv -> dense trunk, then a realness head and the auxiliary Q head
/// (both reading the trunk's penultimate features).
template <typename Scalar>
class Discriminator {
public:
  Discriminator() = default;

  explicit Discriminator(const NetworkSpec &spec) : spec_(spec) {
    spec.validate();
    const ImageShape &im = spec.image;
    conv1_ = nn::Conv2d<Scalar>(nn::ConvGeometry{im.channels, im.height, im.width}, spec.d_channels1,
                                "d.conv1");
    const auto g1 = conv1_.geometry();
    conv2_ = nn::Conv2d<Scalar>(
        nn::ConvGeometry{spec.d_channels1, g1.out_height(), g1.out_width()}, spec.d_channels2,
        "d.conv2");
    fc_ = nn::Dense<Scalar>(spec.d_channels2 * spec.base_height() * spec.base_width(), spec.d_hidden,
                            "d.fc");
    realness_ = nn::Dense<Scalar>(spec.d_hidden, 1, "d.realness");
    q1_ = nn::Dense<Scalar>(spec.d_hidden, spec.q_hidden, "q.fc1");
    q2_ = nn::Dense<Scalar>(spec.q_hidden, spec.latent.code_width(), "q.fc2");
  }

  template <typename Rng>
  void init(Rng &rng) {
    const double s = spec_.init_stddev;
    conv1_.init(rng, s);
    conv2_.init(rng, s);
    fc_.init(rng, s);
    realness_.init(rng, s);
    q1_.init(rng, s);
    q2_.init(rng, s);
  }

  [[nodiscard]] const NetworkSpec &spec() const { return spec_; }

  [[nodiscard]] DiscriminatorOutput<Scalar> forward(const ImageBatch<Scalar> &images,
                                                    DiscriminatorTape<Scalar> *tape = nullptr) const {
    if (images.shape != spec_.image) {
      throw ShapeError("discriminator: image shape " + to_string(images.shape) +
                       " does not match expected " + to_string(spec_.image));
    }
    const Eigen::Index batch = images.batch();
    const Scalar slope = static_cast<Scalar>(spec_.leaky_slope);
    DiscriminatorTape<Scalar> local;
    DiscriminatorTape<Scalar> &t = tape != nullptr ? *tape : local;

    t.batch = batch;
    t.input = nn::nchw_to_nhwc(images.pixels, spec_.image);
    t.conv1_out = conv1_.forward(t.input, batch);
    t.act1 = nn::leaky_relu(t.conv1_out, slope);
    t.conv2_out = conv2_.forward(t.act1, batch);
    t.act2 = nn::leaky_relu(t.conv2_out, slope);
    t.flat = nn::flatten_samples(t.act2, batch);
    t.fc_out = fc_.forward(t.flat);
    t.features = nn::leaky_relu(t.fc_out, slope);
    t.q1_out = q1_.forward(t.features);
    t.q_act = nn::leaky_relu(t.q1_out, slope);

    DiscriminatorOutput<Scalar> out;
    out.realness_logit = realness_.forward(t.features).row(0).transpose();
    // Kept off the endpoints; float saturates to exactly 0 or 1 past |logit| ~ 17.
    const Scalar lo = std::numeric_limits<Scalar>::min();
    const Scalar hi = std::nextafter(Scalar(1), Scalar(0));
    out.realness = nn::sigmoid(out.realness_logit).cwiseMax(lo).cwiseMin(hi);
    const Matrix<Scalar> q = q2_.forward(t.q_act);
    const int cw = spec_.latent.categorical_width();
    out.q_cat_logits = q.topRows(cw).transpose();
    out.q_cont_means = q.bottomRows(spec_.latent.n_continuous).transpose();
    return out;
  }

  /// Accumulates gradients into every discriminator and Q parameter. Returns
  /// d(loss)/d(images) when requested, otherwise an empty batch.
  RowBatch<Scalar> backward(const DiscriminatorTape<Scalar> &t, const DiscriminatorGrad<Scalar> &g,
                            bool want_input_grad) {
    const Eigen::Index batch = t.batch;
    const Scalar slope = static_cast<Scalar>(spec_.leaky_slope);
    Matrix<Scalar> d_features = realness_.backward(t.features, g.realness_logit.transpose());

    Matrix<Scalar> dq(spec_.latent.code_width(), batch);
    dq << g.q_cat_logits.transpose(), g.q_cont_means.transpose();
    Matrix<Scalar> d = q2_.backward(t.q_act, dq);
    d = q1_.backward(t.features, nn::leaky_relu_backward(t.q1_out, d, slope));
    d_features += d;

    d = fc_.backward(t.flat, nn::leaky_relu_backward(t.fc_out, d_features, slope));
    d = nn::unflatten_samples<Scalar>(d, spec_.d_channels2);
    d = conv2_.backward(t.act1, nn::leaky_relu_backward(t.conv2_out, d, slope), batch);
    d = nn::leaky_relu_backward(t.conv1_out, d, slope);
    if (!want_input_grad) {
      conv1_.backward(t.input, d, batch);
      return {};
    }
    d = conv1_.backward(t.input, d, batch);
    return nn::nhwc_to_nchw(d, spec_.image);
  }

  /// Shared trunk plus realness head.
  nn::ParameterRefs<Scalar> trunk_parameters() {
    nn::ParameterRefs<Scalar> out;
    conv1_.collect(out);
    conv2_.collect(out);
    fc_.collect(out);
    realness_.collect(out);
    return out;
  }

  nn::ParameterRefs<Scalar> q_parameters() {
    nn::ParameterRefs<Scalar> out;
    q1_.collect(out);
    q2_.collect(out);
    return out;
  }

  nn::ParameterRefs<Scalar> parameters() {
    auto out = trunk_parameters();
    for (auto *p : q_parameters()) {
      out.push_back(p);
    }
    return out;
  }

private:
  NetworkSpec spec_;
  nn::Conv2d<Scalar> conv1_, conv2_;
  nn::Dense<Scalar> fc_, realness_, q1_, q2_;
};

template <typename Scalar>
void zero_grad(const nn::ParameterRefs<Scalar> &params) {
  for (auto *p : params) {
    p->zero_grad();
  }
}

template <typename Scalar>
double squared_norm(const nn::ParameterRefs<Scalar> &params) {
  double total = 0.0;
  for (const auto *p : params) {
    total += static_cast<double>(p->value.squaredNorm());
  }
  return total;
}

} // namespace evogan
