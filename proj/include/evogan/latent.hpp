#pragma once

#include <random>

#include "evogan/types.hpp"

namespace evogan {

/// Shape of the generator input: incompressible noise z followed by the
/// structured code c (categorical one-hot blocks, then continuous scalars).
struct LatentSpec {
  int z_dim = 62;
  int n_categorical = 1;
  int n_classes = 4;
  int n_continuous = 2;

  [[nodiscard]] int categorical_width() const { return n_categorical * n_classes; }
  [[nodiscard]] int code_width() const { return categorical_width() + n_continuous; }
  [[nodiscard]] int total_width() const { return z_dim + code_width(); }

  /// Throws std::invalid_argument on negative counts or z_dim < 1.
  void validate() const;

  friend bool operator==(const LatentSpec &, const LatentSpec &) = default;
};

template <typename Scalar>
struct LatentBatch {
  RowBatch<Scalar> z;
  RowBatch<Scalar> c_cat;
  RowBatch<Scalar> c_cont;

  [[nodiscard]] Eigen::Index batch() const { return z.rows(); }

  /// Index of the hot entry of categorical block `code` in row `row`.
  [[nodiscard]] int category(Eigen::Index row, int code, int n_classes) const {
    Eigen::Index idx = 0;
    c_cat.row(row).segment(static_cast<Eigen::Index>(code) * n_classes, n_classes).maxCoeff(&idx);
    return static_cast<int>(idx);
  }
};

/// z ~ N(0, 1), categorical codes uniform over classes, continuous codes
/// uniform on [-1, 1]. Draw order: per row, z entries, then categorical codes,
/// then continuous codes.
template <typename Scalar, typename Rng>
LatentBatch<Scalar> sample_latent(const LatentSpec &spec, Eigen::Index batch_size, Rng &rng) {
  spec.validate();
  if (batch_size < 1) {
    throw std::invalid_argument("sample_latent: batch_size must be >= 1");
  }
  LatentBatch<Scalar> out;
  out.z.resize(batch_size, spec.z_dim);
  out.c_cat = RowBatch<Scalar>::Zero(batch_size, spec.categorical_width());
  out.c_cont.resize(batch_size, spec.n_continuous);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> category(0, spec.n_classes > 0 ? spec.n_classes - 1 : 0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (Eigen::Index r = 0; r < batch_size; ++r) {
    for (int j = 0; j < spec.z_dim; ++j) {
      out.z(r, j) = static_cast<Scalar>(normal(rng));
    }
    for (int k = 0; k < spec.n_categorical; ++k) {
      out.c_cat(r, k * spec.n_classes + category(rng)) = Scalar(1);
    }
    for (int j = 0; j < spec.n_continuous; ++j) {
      out.c_cont(r, j) = static_cast<Scalar>(uniform(rng));
    }
  }
  return out;
}

/// Concatenates [z | c_cat | c_cont] row-wise.
template <typename Scalar>
RowBatch<Scalar> compose_input(const LatentBatch<Scalar> &latent) {
  const Eigen::Index n = latent.z.rows();
  if (latent.c_cat.rows() != n || latent.c_cont.rows() != n) {
    throw ShapeError("compose_input: latent parts disagree on batch size");
  }
  RowBatch<Scalar> out(n, latent.z.cols() + latent.c_cat.cols() + latent.c_cont.cols());
  out << latent.z, latent.c_cat, latent.c_cont;
  return out;
}

template <typename Scalar>
LatentBatch<Scalar> decompose_input(const RowBatch<Scalar> &composed, const LatentSpec &spec) {
  if (composed.cols() != spec.total_width()) {
    throw ShapeError("decompose_input: width " + std::to_string(composed.cols()) +
                     " does not match latent spec width " + std::to_string(spec.total_width()));
  }
  LatentBatch<Scalar> out;
  out.z = composed.leftCols(spec.z_dim);
  out.c_cat = composed.middleCols(spec.z_dim, spec.categorical_width());
  out.c_cont = composed.rightCols(spec.n_continuous);
  return out;
}

} // namespace evogan
