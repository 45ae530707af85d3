#pragma once

#include <algorithm>
#include <cmath>

#include "evogan/latent.hpp"

namespace evogan {

/// Probabilities are clamped to [eps, 1 - eps] before every logarithm.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossReport {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mi_term = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

/// Variational lower bound on I(c; G(z, c)), split by code type so each part
/// can carry its own weight. Additive constants are dropped.
template <typename Scalar>
struct MiBound {
  Scalar categorical = 0;
  Scalar continuous = 0;

  [[nodiscard]] Scalar weighted(double lambda_categorical, double lambda_continuous) const {
    return static_cast<Scalar>(lambda_categorical) * categorical +
           static_cast<Scalar>(lambda_continuous) * continuous;
  }
};

template <typename Scalar>
struct MiGradient {
  RowBatch<Scalar> q_cat_logits;
  RowBatch<Scalar> q_cont_means;
};

namespace detail {

template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  const auto eps = static_cast<Scalar>(kProbabilityEpsilon);
  return std::clamp(p, eps, Scalar(1) - eps);
}

template <typename Scalar>
bool inside_clamp(Scalar p) {
  const auto eps = static_cast<Scalar>(kProbabilityEpsilon);
  return p > eps && p < Scalar(1) - eps;
}

template <typename Scalar>
void check_alignment(const LatentBatch<Scalar> &latent, const RowBatch<Scalar> &q_cat_logits,
                     const RowBatch<Scalar> &q_cont_means) {
  if (q_cat_logits.rows() != latent.batch() || q_cont_means.rows() != latent.batch() ||
      q_cat_logits.cols() != latent.c_cat.cols() || q_cont_means.cols() != latent.c_cont.cols()) {
    throw ShapeError("Q outputs are not aligned with the latent batch");
  }
}

} // namespace detail

/// Mean categorical log-likelihood of the true codes under softmax(logits)
/// (summed over categorical codes) plus the mean unit-variance Gaussian
/// log-likelihood -0.5 (c - mu)^2 of the continuous codes.
template <typename Scalar>
MiBound<Scalar> mutual_information_lower_bound(const LatentBatch<Scalar> &latent,
                                               const RowBatch<Scalar> &q_cat_logits,
                                               const RowBatch<Scalar> &q_cont_means, int n_classes) {
  detail::check_alignment(latent, q_cat_logits, q_cont_means);
  const Eigen::Index batch = latent.batch();
  const Eigen::Index codes = n_classes > 0 ? q_cat_logits.cols() / n_classes : 0;
  MiBound<Scalar> out;
  for (Eigen::Index r = 0; r < batch; ++r) {
    for (Eigen::Index k = 0; k < codes; ++k) {
      const auto logits = q_cat_logits.row(r).segment(k * n_classes, n_classes);
      const Scalar top = logits.maxCoeff();
      const Scalar log_norm = top + std::log((logits.array() - top).exp().sum());
      const Scalar true_logit = logits.dot(latent.c_cat.row(r).segment(k * n_classes, n_classes));
      out.categorical += true_logit - log_norm;
    }
  }
  out.continuous = Scalar(-0.5) * (latent.c_cont - q_cont_means).squaredNorm();
  out.categorical /= static_cast<Scalar>(batch);
  out.continuous /= static_cast<Scalar>(batch);
  return out;
}

/// Gradient of lambda_categorical * categorical + lambda_continuous * continuous
/// with respect to the Q outputs.
template <typename Scalar>
MiGradient<Scalar> mutual_information_gradient(const LatentBatch<Scalar> &latent,
                                               const RowBatch<Scalar> &q_cat_logits,
                                               const RowBatch<Scalar> &q_cont_means, int n_classes,
                                               double lambda_categorical, double lambda_continuous) {
  detail::check_alignment(latent, q_cat_logits, q_cont_means);
  const Eigen::Index batch = latent.batch();
  const Eigen::Index codes = n_classes > 0 ? q_cat_logits.cols() / n_classes : 0;
  const Scalar scale_cat = static_cast<Scalar>(lambda_categorical) / static_cast<Scalar>(batch);
  const Scalar scale_cont = static_cast<Scalar>(lambda_continuous) / static_cast<Scalar>(batch);
  MiGradient<Scalar> out;
  out.q_cat_logits.resize(batch, q_cat_logits.cols());
  for (Eigen::Index r = 0; r < batch; ++r) {
    for (Eigen::Index k = 0; k < codes; ++k) {
      const auto logits = q_cat_logits.row(r).segment(k * n_classes, n_classes);
      const Scalar top = logits.maxCoeff();
      RowVector<Scalar> softmax = (logits.array() - top).exp();
      softmax /= softmax.sum();
      out.q_cat_logits.row(r).segment(k * n_classes, n_classes) =
          scale_cat * (latent.c_cat.row(r).segment(k * n_classes, n_classes) - softmax);
    }
  }
  out.q_cont_means = scale_cont * (latent.c_cont - q_cont_means);
  return out;
}

/// -mean(log d_real) - mean(log(1 - d_fake)) - lambda * mi_bound
template <typename Scalar>
Scalar discriminator_loss(const Vector<Scalar> &d_real, const Vector<Scalar> &d_fake,
                          Scalar mi_bound, double lambda) {
  Scalar real_term = 0;
  for (Eigen::Index i = 0; i < d_real.size(); ++i) {
    real_term -= std::log(detail::clamp_probability(d_real(i)));
  }
  Scalar fake_term = 0;
  for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
    fake_term -= std::log(Scalar(1) - detail::clamp_probability(d_fake(i)));
  }
  return real_term / static_cast<Scalar>(d_real.size()) +
         fake_term / static_cast<Scalar>(d_fake.size()) - static_cast<Scalar>(lambda) * mi_bound;
}

/// -mean(log d_fake) - lambda * mi_bound
template <typename Scalar>
Scalar generator_loss(const Vector<Scalar> &d_fake, Scalar mi_bound, double lambda) {
  Scalar term = 0;
  for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
    term -= std::log(detail::clamp_probability(d_fake(i)));
  }
  return term / static_cast<Scalar>(d_fake.size()) - static_cast<Scalar>(lambda) * mi_bound;
}

/// Minimax value mean(log D(x)) + mean(log(1 - D(G(z)))) of the plain GAN game.
template <typename Scalar>
Scalar adversarial_value(const Vector<Scalar> &d_real, const Vector<Scalar> &d_fake) {
  Scalar value = 0;
  for (Eigen::Index i = 0; i < d_real.size(); ++i) {
    value += std::log(detail::clamp_probability(d_real(i))) / static_cast<Scalar>(d_real.size());
  }
  for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
    value += std::log(Scalar(1) - detail::clamp_probability(d_fake(i))) /
             static_cast<Scalar>(d_fake.size());
  }
  return value;
}

/// d/dp of -mean(log clamp(p)); zero where the clamp is active.
template <typename Scalar>
Vector<Scalar> neg_log_grad(const Vector<Scalar> &p) {
  const auto n = static_cast<Scalar>(p.size());
  return p.unaryExpr([n](Scalar v) { return detail::inside_clamp(v) ? Scalar(-1) / (n * v) : Scalar(0); });
}

/// d/dp of -mean(log(1 - clamp(p))); zero where the clamp is active.
template <typename Scalar>
Vector<Scalar> neg_log_complement_grad(const Vector<Scalar> &p) {
  const auto n = static_cast<Scalar>(p.size());
  return p.unaryExpr(
      [n](Scalar v) { return detail::inside_clamp(v) ? Scalar(1) / (n * (Scalar(1) - v)) : Scalar(0); });
}

/// Chains d(loss)/d(sigmoid output) back to the pre-sigmoid logit.
template <typename Scalar>
Vector<Scalar> through_sigmoid(const Vector<Scalar> &d_prob, const Vector<Scalar> &prob) {
  return (d_prob.array() * prob.array() * (Scalar(1) - prob.array())).matrix();
}

} // namespace evogan
