#ifndef DQR_ADMM_HPP_
#define DQR_ADMM_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "dqr/check_loss.hpp"
#include "dqr/errors.hpp"

namespace dqr {

//! Options for the penalized-quantile-regression ADMM solver.
struct AdmmOptions {
  double rho = 1.2;       //!< augmented Lagrangian parameter
  double eps_abs = 1e-4;  //!< absolute feasibility tolerance
  double eps_rel = 1e-2;  //!< relative feasibility tolerance
  int max_iters = 5000;
  //! Use the termination tolerances exactly as written in the reference
  //! derivation (sqrt(K) on the primal side, ||u|| as the dual scale) instead
  //! of the standard dual-feasibility scale rho * ||X^T u||.
  bool paper_exact_tolerances = false;
  //! When set, one CSV line `iteration,r_pri,r_dual,objective` is written per
  //! iteration.
  std::ostream* trace = nullptr;

  void validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("AdmmOptions: rho must be positive");
    if (!(eps_abs > 0.0)) throw std::invalid_argument("AdmmOptions: eps_abs must be positive");
    if (!(eps_rel > 0.0)) throw std::invalid_argument("AdmmOptions: eps_rel must be positive");
    if (max_iters < 1) throw std::invalid_argument("AdmmOptions: max_iters must be >= 1");
  }
};

//! Solver output. When converged is true, the final primal and dual residual
//! norms satisfy their tolerances.
struct AdmmResult {
  Eigen::VectorXd coefficients;
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;
  double objective = 0.0;
};

//! Design-matrix products shared across solves that differ only in the
//! response (per-direction fits, cross-validation, adaptive re-fits).
//! Immutable after construction; safe to share across threads.
class DesignCache {
 public:
  explicit DesignCache(const Eigen::MatrixXd& design)
      : design_(&design), gram_(design.transpose() * design) {}

  const Eigen::MatrixXd& design() const { return *design_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  Eigen::Index rows() const { return design_->rows(); }
  Eigen::Index cols() const { return design_->cols(); }

 private:
  const Eigen::MatrixXd* design_;
  Eigen::MatrixXd gram_;
};

//! One response block of a stacked problem: the rows (w*X | w*y).
//!
//! Positive homogeneity of the check loss turns a loss weight w into a row
//! scaling of both sides, so weighted fits reuse the unweighted solver.
struct WeightedResponse {
  const Eigen::VectorXd* response;  //!< length = design rows
  double weight = 1.0;
};

//! Minimizes sum_rows rho_tau(ytilde - Xtilde b) + lambda b' Omega b by ADMM,
//! where Xtilde stacks the blocks w_k X and ytilde stacks w_k y_k.
//!
//! Iterates (scaled form, shift = (2 tau - 1) / (2 rho)):
//!   r <- S_{1/(2 rho)}(ytilde - Xtilde b - u - shift)   elementwise
//!   b <- (2 lambda Omega / rho + Xtilde' Xtilde)^{-1} Xtilde' (ytilde - r + u)
//!   u <- u + (r + Xtilde b - ytilde)
//! with the quadratic system factorized once per call. Because every block
//! shares the same design, Xtilde' Xtilde = (sum_k w_k^2) X'X and all
//! matrix-vector products reduce to products with X itself.
//!
//! Initialization is b = 0, r = ytilde, u = 0. Termination follows the
//! primal/dual residual rule: stop when ||r_pri|| <= eps_pri and
//! ||r_dual|| <= eps_dual with
//!   r_pri  = ytilde - Xtilde b - r,
//!   r_dual = rho Xtilde (b - b_prev),
//!   eps_pri  = sqrt(N) eps_abs + eps_rel max(||r||, ||Xtilde b||, ||ytilde||),
//!   eps_dual = sqrt(K) eps_abs + eps_rel rho ||Xtilde' u||.
inline AdmmResult solve_pqr(const DesignCache& cache, std::span<const WeightedResponse> blocks,
                            double tau, double lambda, const Eigen::MatrixXd& omega,
                            const AdmmOptions& opts = {}) {
  opts.validate();
  require_quantile_level(tau);
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_pqr: lambda must be nonnegative");
  const Eigen::Index N = cache.rows();
  const Eigen::Index K = cache.cols();
  if (N < 1 || K < 1) throw std::invalid_argument("solve_pqr: empty design");
  if (omega.rows() != K || omega.cols() != K) {
    throw std::invalid_argument("solve_pqr: omega dimension mismatch");
  }
  if (blocks.empty()) throw std::invalid_argument("solve_pqr: no response blocks");
  const int B = static_cast<int>(blocks.size());
  for (const auto& block : blocks) {
    if (block.response->size() != N) {
      throw std::invalid_argument("solve_pqr: response length mismatch");
    }
    if (!(block.weight > 0.0)) throw std::invalid_argument("solve_pqr: weights must be positive");
  }

  const double rho = opts.rho;
  double weight_sq = 0.0;
  for (const auto& block : blocks) weight_sq += block.weight * block.weight;

  // Quadratic-step matrix, factorized once. A tiny ridge keeps the system
  // positive definite when lambda = 0 or X is rank deficient.
  Eigen::MatrixXd quad = (2.0 * lambda / rho) * omega + weight_sq * cache.gram();
  const double jitter = 1e-10 * quad.trace() / static_cast<double>(K);
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (lambda == 0.0) quad.diagonal().array() += jitter;
  llt.compute(quad);
  if (llt.info() != Eigen::Success) {
    quad.diagonal().array() += jitter;
    llt.compute(quad);
    if (llt.info() != Eigen::Success) {
      throw numeric_error("solve_pqr: quadratic-step system is singular");
    }
  }

  // Scaled responses and their joint norm.
  Eigen::MatrixXd scaled_y(N, B);
  for (int k = 0; k < B; ++k) scaled_y.col(k) = blocks[k].weight * (*blocks[k].response);
  const double y_norm = scaled_y.norm();

  const double shift = (2.0 * tau - 1.0) / (2.0 * rho);
  const double threshold = 1.0 / (2.0 * rho);
  const double sqrt_weight_sq = std::sqrt(weight_sq);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  Eigen::MatrixXd r = scaled_y;                      // r0 = ytilde
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(N, B);   // u0 = 0
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(N);  // X b
  Eigen::VectorXd fitted_prev(N);
  Eigen::VectorXd accum(N);

  AdmmResult result;
  const auto objective_of = [&](const Eigen::VectorXd& coef, const Eigen::VectorXd& xb) {
    double loss = 0.0;
    for (int k = 0; k < B; ++k) {
      const double w = blocks[k].weight;
      loss += ((scaled_y.col(k) - w * xb).array() *
               (tau - ((scaled_y.col(k) - w * xb).array() < 0.0).cast<double>()))
                  .sum();
    }
    return loss + lambda * coef.dot(omega * coef);
  };

  int iter = 0;
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    // r-update (elementwise prox of the check loss).
    for (int k = 0; k < B; ++k) {
      const auto v = (scaled_y.col(k) - blocks[k].weight * fitted - u.col(k)).array() - shift;
      r.col(k) = (v - threshold).max(0.0) - ((-v) - threshold).max(0.0);
    }

    // b-update through the cached factorization. Note the -u: the dual enters
    // the quadratic term as ||r + Xb - y + u||^2, so minimizing over b gives
    // X'(y - r - u) on the right-hand side.
    accum.setZero();
    for (int k = 0; k < B; ++k) {
      accum.noalias() += blocks[k].weight * (scaled_y.col(k) - r.col(k) - u.col(k));
    }
    b = llt.solve(cache.design().transpose() * accum);
    fitted_prev.swap(fitted);
    fitted.noalias() = cache.design() * b;

    // u-update; the primal residual is its negated increment.
    double pri_sq = 0.0;
    for (int k = 0; k < B; ++k) {
      const auto pri = scaled_y.col(k) - blocks[k].weight * fitted - r.col(k);
      pri_sq += pri.squaredNorm();
      u.col(k) -= pri;
    }
    const double pri_norm = std::sqrt(pri_sq);
    const double dual_norm = rho * sqrt_weight_sq * (fitted - fitted_prev).norm();

    const double fit_norm = sqrt_weight_sq * fitted.norm();
    const double pri_scale = std::max({r.norm(), fit_norm, y_norm});
    const double eps_pri = (opts.paper_exact_tolerances ? std::sqrt(static_cast<double>(K))
                                                        : std::sqrt(static_cast<double>(N * B))) *
                               opts.eps_abs +
                           opts.eps_rel * pri_scale;

    result.primal_residual = pri_norm;
    result.dual_residual = dual_norm;
    result.primal_tolerance = eps_pri;

    if (opts.trace != nullptr) {
      *opts.trace << iter << ',' << pri_norm << ',' << dual_norm << ','
                  << objective_of(b, fitted) << '\n';
    }

    if (pri_norm <= eps_pri) {
      // The dual tolerance needs an extra product with X; compute it lazily.
      double eps_dual;
      if (opts.paper_exact_tolerances) {
        eps_dual = std::sqrt(static_cast<double>(N * B)) * opts.eps_abs + opts.eps_rel * u.norm();
      } else {
        accum.setZero();
        for (int k = 0; k < B; ++k) accum.noalias() += blocks[k].weight * u.col(k);
        eps_dual = std::sqrt(static_cast<double>(K)) * opts.eps_abs +
                   opts.eps_rel * rho * (cache.design().transpose() * accum).norm();
      }
      result.dual_tolerance = eps_dual;
      if (dual_norm <= eps_dual) {
        result.converged = true;
        break;
      }
    }
  }

  result.iterations = std::min(iter, opts.max_iters);
  result.coefficients = std::move(b);
  result.objective = objective_of(result.coefficients, fitted);
  return result;
}

//! Single-response convenience form of the stacked solver.
inline AdmmResult solve_pqr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                            double lambda, const Eigen::MatrixXd& omega,
                            const AdmmOptions& opts = {}) {
  const DesignCache cache(X);
  const WeightedResponse block{&y, 1.0};
  return solve_pqr(cache, std::span<const WeightedResponse>(&block, 1), tau, lambda, omega, opts);
}

}  // namespace dqr

#endif  // DQR_ADMM_HPP_
