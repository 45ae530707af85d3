#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evogan/nn/layers.hpp"

namespace evogan::nn {

struct AdamSettings {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent over a fixed parameter group.
template <typename Scalar>
class Adam {
public:
  Adam() = default;
  Adam(ParameterRefs<Scalar> params, AdamSettings settings)
      : params_(std::move(params)), settings_(settings) {
    for (const auto *p : params_) {
      first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++steps_;
    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const auto t = static_cast<double>(steps_);
    const Scalar step_size =
        static_cast<Scalar>(settings_.learning_rate * std::sqrt(1.0 - std::pow(b2, t)) /
                            (1.0 - std::pow(b1, t)));
    const Scalar eps_hat = static_cast<Scalar>(settings_.epsilon * std::sqrt(1.0 - std::pow(b2, t)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto &g = params_[i]->grad;
      first_[i] = Scalar(b1) * first_[i] + Scalar(1 - b1) * g;
      second_[i] = Scalar(b2) * second_[i] + Scalar(1 - b2) * g.cwiseAbs2();
      params_[i]->value.array() -=
          step_size * first_[i].array() / (second_[i].array().sqrt() + eps_hat);
    }
  }

  void zero_grad() {
    for (auto *p : params_) {
      p->zero_grad();
    }
  }

  [[nodiscard]] const ParameterRefs<Scalar> &parameters() const { return params_; }
  [[nodiscard]] const AdamSettings &settings() const { return settings_; }
  [[nodiscard]] std::int64_t steps() const { return steps_; }

  std::vector<Matrix<Scalar>> &first_moments() { return first_; }
  std::vector<Matrix<Scalar>> &second_moments() { return second_; }
  void set_steps(std::int64_t s) { steps_ = s; }

private:
  ParameterRefs<Scalar> params_;
  AdamSettings settings_;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
  std::int64_t steps_ = 0;
};

} // namespace evogan::nn
