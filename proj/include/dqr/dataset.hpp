#ifndef DQR_DATASET_HPP_
#define DQR_DATASET_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dqr/errors.hpp"

namespace dqr {

//! Bivariate functional responses on a shared grid plus per-subject covariates.
//!
//! Responses are stored as two n-by-J matrices (one per response coordinate);
//! covariates are n-by-p with the first column all ones by convention.
struct FunctionalDataset {
  Eigen::VectorXd t_grid;      // J grid points in [0,1], strictly increasing
  Eigen::MatrixXd y1;          // n x J
  Eigen::MatrixXd y2;          // n x J
  Eigen::MatrixXd covariates;  // n x p

  int n() const { return static_cast<int>(covariates.rows()); }
  int grid_size() const { return static_cast<int>(t_grid.size()); }
  int covariate_count() const { return static_cast<int>(covariates.cols()); }

  void validate() const {
    const int subjects = n();
    const int J = grid_size();
    if (subjects < 1 || J < 1) throw data_error("dataset: empty dataset");
    if (y1.rows() != subjects || y2.rows() != subjects || y1.cols() != J || y2.cols() != J) {
      throw data_error("dataset: response dimensions do not match grid/covariates");
    }
    for (int j = 0; j < J; ++j) {
      if (!(t_grid[j] >= 0.0 && t_grid[j] <= 1.0)) {
        throw data_error("dataset: grid point outside [0,1] at index " + std::to_string(j));
      }
      if (j > 0 && !(t_grid[j] > t_grid[j - 1])) {
        throw data_error("dataset: grid must be strictly increasing");
      }
    }
    if (!y1.allFinite() || !y2.allFinite() || !covariates.allFinite() || !t_grid.allFinite()) {
      throw data_error("dataset: missing or non-finite values");
    }
  }
};

//! Equally spaced unit directions on the circle.
//!
//! Angles cover [-pi, pi); the chord distance between adjacent directions is
//! the constant 2 sin(pi / d).
class DirectionGrid {
 public:
  explicit DirectionGrid(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("DirectionGrid: need at least one direction");
    angles_.resize(d);
    directions_.resize(2, d);
    for (int r = 0; r < d; ++r) {
      const double theta = -std::numbers::pi + 2.0 * std::numbers::pi * r / d;
      angles_[r] = theta;
      directions_(0, r) = std::cos(theta);
      directions_(1, r) = std::sin(theta);
    }
  }

  int size() const { return d_; }
  const std::vector<double>& angles() const { return angles_; }
  Eigen::Vector2d direction(int r) const { return directions_.col(r); }
  const Eigen::Matrix2Xd& directions() const { return directions_; }

  //! Chord distance between adjacent directions, d0 = 2 sin(pi/d).
  double spacing() const { return 2.0 * std::sin(std::numbers::pi / d_); }

  //! Euclidean (chord) distance between directions r and q.
  double chord(int r, int q) const { return (direction(r) - direction(q)).norm(); }

 private:
  int d_;
  std::vector<double> angles_;
  Eigen::Matrix2Xd directions_;
};

}  // namespace dqr

#endif  // DQR_DATASET_HPP_
