#ifndef DQR_VARIANCE_HPP_
#define DQR_VARIANCE_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dqr/check_loss.hpp"
#include "dqr/errors.hpp"

namespace dqr {

namespace detail {

//! Linear-interpolation sample quantile (only used for bandwidth selection).
inline double sample_quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace detail

//! Gaussian kernel density estimate of the residual distribution at zero,
//! with Silverman's rule-of-thumb bandwidth. Degenerate residual vectors
//! (zero spread) fall back to the floor 1e-6.
inline double residual_density_at_zero(const Eigen::VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  if (n < 2) return 1e-6;
  const double mean = residuals.mean();
  const double sd = std::sqrt((residuals.array() - mean).square().sum() / (n - 1));
  std::vector<double> values(residuals.data(), residuals.data() + n);
  const double iqr =
      detail::sample_quantile(values, 0.75) - detail::sample_quantile(values, 0.25);
  double scale = sd;
  if (iqr > 0.0) scale = std::min(scale, iqr / 1.34);
  const double bandwidth = 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) return 1e-6;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double density =
      (norm * (-0.5 * (residuals.array() / bandwidth).square()).exp()).sum() /
      (bandwidth * static_cast<double>(n));
  return std::max(density, 1e-6);
}

//! Per-coefficient variance estimates from the penalized quantile-regression
//! sandwich: diagonal of tau(1-tau) D^{-1} G D^{-1} with G the design Gram
//! matrix and D = f(0) G + 2 lambda Omega. Entries are floored at 1e-12.
inline Eigen::VectorXd estimate_variances_gram(const Eigen::MatrixXd& gram,
                                               const Eigen::VectorXd& residuals, double tau,
                                               double lambda, const Eigen::MatrixXd& omega) {
  require_quantile_level(tau);
  const double f0 = residual_density_at_zero(residuals);
  Eigen::MatrixXd d1 = f0 * gram + 2.0 * lambda * omega;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(d1);
  if (ldlt.info() != Eigen::Success) {
    throw numeric_error("estimate_variances: singular sandwich system");
  }
  const Eigen::MatrixXd inner = ldlt.solve(gram);              // D^{-1} G
  const Eigen::MatrixXd sandwich = ldlt.solve(inner.transpose());  // D^{-1} G D^{-1}
  Eigen::VectorXd variances = tau * (1.0 - tau) * sandwich.diagonal();
  return variances.cwiseMax(1e-12);
}

//! Convenience form computing the Gram matrix from the design itself.
inline Eigen::VectorXd estimate_variances(const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& residuals, double tau,
                                          double lambda, const Eigen::MatrixXd& omega) {
  return estimate_variances_gram(X.transpose() * X, residuals, tau, lambda, omega);
}

}  // namespace dqr

#endif  // DQR_VARIANCE_HPP_
