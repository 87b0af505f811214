#ifndef DQR_SPLINE_BASIS_HPP_
#define DQR_SPLINE_BASIS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dqr/errors.hpp"

namespace dqr {

namespace detail {

//! Gauss-Legendre nodes and weights on [-1, 1] for n points.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> nodes(n), weights(n);
  const int mid = (n + 1) / 2;
  for (int i = 0; i < mid; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(x) and P'_n(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n == 1) {
    nodes[0] = 0.0;
    weights[0] = 2.0;
  }
  return {nodes, weights};
}

}  // namespace detail

//! Clamped B-spline basis on [0, 1] with its curvature penalty matrix.
//!
//! The basis dimension is M = interior knot count + degree + 1. The penalty
//! matrix is the Gram matrix of second derivatives, integrated exactly with
//! per-interval Gauss-Legendre quadrature (second derivatives are piecewise
//! polynomials of degree `degree - 2`, so `degree - 1` points suffice).
class SplineBasis {
 public:
  SplineBasis(int degree, std::vector<double> interior_knots)
      : degree_(degree), interior_(std::move(interior_knots)) {
    if (degree_ < 0) throw std::invalid_argument("SplineBasis: degree must be >= 0");
    for (std::size_t i = 0; i < interior_.size(); ++i) {
      if (!(interior_[i] > 0.0 && interior_[i] < 1.0)) {
        throw std::invalid_argument("SplineBasis: interior knots must lie strictly inside (0,1)");
      }
      if (i > 0 && !(interior_[i] > interior_[i - 1])) {
        throw std::invalid_argument("SplineBasis: interior knots must be strictly increasing");
      }
    }
    knots_.assign(degree_ + 1, 0.0);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), degree_ + 1, 1.0);
    size_ = static_cast<int>(interior_.size()) + degree_ + 1;
    omega_ = compute_penalty();
  }

  int degree() const { return degree_; }
  int size() const { return size_; }  // basis dimension M
  const std::vector<double>& interior_knots() const { return interior_; }
  const std::vector<double>& knots() const { return knots_; }

  //! Basis function values at t in [0, 1]; nonnegative and summing to one.
  //! t = 1 is evaluated as the limit from the left.
  Eigen::VectorXd evaluate(double t) const {
    check_domain(t);
    return basis_values(degree_, t);
  }

  //! Derivatives of the basis functions at t; zero vector when order > degree.
  Eigen::VectorXd evaluate_derivative(double t, int order) const {
    check_domain(t);
    if (order < 0) throw std::invalid_argument("SplineBasis: derivative order must be >= 0");
    if (order == 0) return basis_values(degree_, t);
    if (order > degree_) return Eigen::VectorXd::Zero(size_);
    Eigen::VectorXd values = basis_values(degree_ - order, t);
    for (int step = 0; step < order; ++step) {
      const int p = degree_ - order + step;  // degree of the current values
      const Eigen::Index out_len = values.size() - 1;
      Eigen::VectorXd next(out_len);
      for (Eigen::Index i = 0; i < out_len; ++i) {
        double term = 0.0;
        const double den_left = knots_[i + p + 1] - knots_[i];
        if (den_left > 0.0) term += values[i] / den_left;
        const double den_right = knots_[i + p + 2] - knots_[i + 1];
        if (den_right > 0.0) term -= values[i + 1] / den_right;
        next[i] = (p + 1) * term;
      }
      values = std::move(next);
    }
    return values;
  }

  //! Gram matrix of second derivatives over [0, 1]; zero for degree < 2.
  const Eigen::MatrixXd& penalty() const { return omega_; }

 private:
  static void check_domain(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::domain_error("SplineBasis: t must lie in [0,1]");
    }
  }

  //! Index of the knot span containing t for a degree-p basis on the shared
  //! knot vector, treating t = 1 as the limit from the left.
  int find_span(int p, double t) const {
    const int n_knots = static_cast<int>(knots_.size());
    if (t >= 1.0) return n_knots - degree_ - 2;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    int idx = static_cast<int>(it - knots_.begin()) - 1;
    return std::max(idx, p);
  }

  //! Values of the degree-p basis on the shared knot vector.
  Eigen::VectorXd basis_values(int p, double t) const {
    const int count = static_cast<int>(knots_.size()) - p - 1;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
    const int span = find_span(p, t);
    std::vector<double> left(p + 1), right(p + 1), vals(p + 1);
    vals[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = t - knots_[span + 1 - j];
      right[j] = knots_[span + j] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double den = right[r + 1] + left[j - r];
        const double tmp = vals[r] / den;
        vals[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      vals[j] = saved;
    }
    for (int r = 0; r <= p; ++r) out[span - p + r] = vals[r];
    return out;
  }

  Eigen::MatrixXd compute_penalty() const {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(size_, size_);
    if (degree_ < 2) return omega;
    const int n_gl = std::max(1, degree_ - 1);
    const auto [nodes, weights] = detail::gauss_legendre(n_gl);
    for (int span = degree_; span <= size_ - 1; ++span) {
      const double a = knots_[span];
      const double b = knots_[span + 1];
      if (!(b > a)) continue;
      const double half = 0.5 * (b - a);
      const double mid = 0.5 * (a + b);
      for (int g = 0; g < n_gl; ++g) {
        const Eigen::VectorXd d2 = evaluate_derivative(mid + half * nodes[g], 2);
        omega.selfadjointView<Eigen::Lower>().rankUpdate(d2, half * weights[g]);
      }
    }
    return omega.selfadjointView<Eigen::Lower>();
  }

  int degree_;
  std::vector<double> interior_;
  std::vector<double> knots_;
  int size_ = 0;
  Eigen::MatrixXd omega_;
};

//! Evenly spaced interior knots over [lo, hi], endpoints included.
inline std::vector<double> even_knots(int count, double lo, double hi) {
  if (count < 0) throw std::invalid_argument("even_knots: count must be >= 0");
  std::vector<double> knots(count);
  if (count == 1) {
    knots[0] = 0.5 * (lo + hi);
    return knots;
  }
  for (int i = 0; i < count; ++i) {
    knots[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  }
  return knots;
}

}  // namespace dqr

#endif  // DQR_SPLINE_BASIS_HPP_
