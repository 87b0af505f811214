#ifndef DQR_DESIGN_HPP_
#define DQR_DESIGN_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dqr/dataset.hpp"
#include "dqr/spline_basis.hpp"

namespace dqr {

//! Projection of the bivariate responses onto the unit direction s:
//! entry (i, j) = s . y_i(t_j). s must have unit norm within 1e-9.
inline Eigen::MatrixXd project_responses(const FunctionalDataset& data,
                                         const Eigen::Vector2d& s) {
  if (std::abs(s.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("project_responses: direction must have unit norm");
  }
  return s[0] * data.y1 + s[1] * data.y2;
}

//! Flattens an n-by-J per-subject matrix into the (n*J)-vector whose entry
//! i*J + j corresponds to subject i at grid point j, matching design_matrix
//! row order.
inline Eigen::VectorXd stack_rows(const Eigen::MatrixXd& per_subject) {
  const Eigen::Index n = per_subject.rows();
  const Eigen::Index J = per_subject.cols();
  Eigen::VectorXd out(n * J);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.segment(i * J, J) = per_subject.row(i).transpose();
  }
  return out;
}

//! Design matrix with one row per (subject, grid point): row i*J + j holds
//! kron(x_i, H(t_j)).
//!
//! Coefficient vectors therefore consist of p blocks of length M; block k
//! carries the spline coefficients of covariate k (basis index fastest).
//! The fitted value of a row against such a vector b equals
//! sum_k x_ik * sum_m b[k*M + m] * h_m(t_j).
inline Eigen::MatrixXd design_matrix(const FunctionalDataset& data, const SplineBasis& basis) {
  data.validate();
  const int n = data.n();
  const int J = data.grid_size();
  const int p = data.covariate_count();
  const int M = basis.size();
  Eigen::MatrixXd basis_at_grid(J, M);
  for (int j = 0; j < J; ++j) {
    basis_at_grid.row(j) = basis.evaluate(data.t_grid[j]).transpose();
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n) * J, static_cast<Eigen::Index>(p) * M);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * J + j;
      for (int k = 0; k < p; ++k) {
        X.block(row, static_cast<Eigen::Index>(k) * M, 1, M) =
            data.covariates(i, k) * basis_at_grid.row(j);
      }
    }
  }
  return X;
}

//! Block-diagonal expansion of the basis penalty to coefficient vectors of
//! p covariate blocks: kron(I_p, omega).
inline Eigen::MatrixXd block_penalty(const SplineBasis& basis, int p) {
  const int M = basis.size();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p) * M,
                                                static_cast<Eigen::Index>(p) * M);
  for (int k = 0; k < p; ++k) {
    omega.block(static_cast<Eigen::Index>(k) * M, static_cast<Eigen::Index>(k) * M, M, M) =
        basis.penalty();
  }
  return omega;
}

}  // namespace dqr

#endif  // DQR_DESIGN_HPP_
