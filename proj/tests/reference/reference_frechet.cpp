#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "reference/reference.hpp"

namespace evogan::reference {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

namespace {

void require_spd(const LMatrix &m, const char *name) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12L)) {
    throw std::invalid_argument(std::string("reference_frechet: ") + name + " is not symmetric");
  }
  Eigen::LLT<LMatrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string("reference_frechet: ") + name + " is not positive definite");
  }
}

} // namespace

double reference_frechet(const Eigen::VectorXd &mu_a, const Eigen::MatrixXd &sigma_a, const Eigen::VectorXd &mu_b,
                         const Eigen::MatrixXd &sigma_b) {
  if (mu_a.size() != mu_b.size() || sigma_a.rows() != mu_a.size() || sigma_b.rows() != mu_b.size()) {
    throw std::invalid_argument("reference_frechet: dimension mismatch");
  }
  const LMatrix a = sigma_a.cast<long double>();
  const LMatrix b = sigma_b.cast<long double>();
  require_spd(a, "sigma_a");
  require_spd(b, "sigma_b");
  // The eigenvalues of A B equal those of A^(1/2) B A^(1/2): real and >= 0.
  Eigen::EigenSolver<LMatrix> solver(a * b, false);
  if (solver.info() != Eigen::Success) {
    throw std::invalid_argument("reference_frechet: eigensolver failed");
  }
  long double root_trace = 0.0L;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const auto lambda = solver.eigenvalues()(i);
    root_trace += std::sqrt(std::max(0.0L, lambda.real()));
  }
  long double mean_term = 0.0L;
  for (Eigen::Index i = 0; i < mu_a.size(); ++i) {
    const long double d = static_cast<long double>(mu_a(i)) - static_cast<long double>(mu_b(i));
    mean_term += d * d;
  }
  return static_cast<double>(mean_term + a.trace() + b.trace() - 2.0L * root_trace);
}

} // namespace evogan::reference
