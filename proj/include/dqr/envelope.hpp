#ifndef DQR_ENVELOPE_HPP_
#define DQR_ENVELOPE_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dqr/dataset.hpp"
#include "dqr/errors.hpp"
#include "dqr/ps.hpp"
#include "dqr/spline_basis.hpp"

namespace dqr {

//! A directional quantile envelope at fixed (tau, covariates, t): the d
//! directional quantiles together with the clipped convex polygon they bound.
struct Envelope {
  double tau = 0.0;
  double t = 0.0;
  Eigen::VectorXd x;                       //!< covariate vector of the probe
  Eigen::VectorXd q;                       //!< directional quantiles
  std::vector<Eigen::Vector2d> vertices;   //!< counterclockwise; empty if region empty
  bool empty = false;
  std::vector<int> binding;  //!< directions whose halfplane touches the polygon
};

//! Directional quantiles q_r = x' C(s_r) H(t) read off a coefficient field.
inline Eigen::VectorXd directional_quantiles(const CoefficientField& field,
                                             const SplineBasis& basis, const Eigen::VectorXd& x,
                                             double t) {
  const int M = basis.size();
  const int K = static_cast<int>(field.coefficients.cols());
  if (K % M != 0 || K / M != x.size()) {
    throw std::invalid_argument("directional_quantiles: covariate/basis dimension mismatch");
  }
  const int p = static_cast<int>(x.size());
  const Eigen::VectorXd h = basis.evaluate(t);
  Eigen::VectorXd q(field.grid.size());
  for (int r = 0; r < field.grid.size(); ++r) {
    double value = 0.0;
    for (int k = 0; k < p; ++k) {
      value += x[k] * field.coefficients.row(r).segment(k * M, M).dot(h);
    }
    q[r] = value;
  }
  return q;
}

namespace detail {

//! Clips a convex polygon against the halfplane {v : n . v >= c}
//! (Sutherland-Hodgman step). Vertex order is preserved.
inline std::vector<Eigen::Vector2d> clip_halfplane(const std::vector<Eigen::Vector2d>& polygon,
                                                   const Eigen::Vector2d& normal, double offset) {
  std::vector<Eigen::Vector2d> out;
  const std::size_t count = polygon.size();
  out.reserve(count + 1);
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[(i + 1) % count];
    const double fa = normal.dot(a) - offset;
    const double fb = normal.dot(b) - offset;
    if (fa >= 0.0) out.push_back(a);
    if ((fa > 0.0 && fb < 0.0) || (fa < 0.0 && fb > 0.0)) {
      out.push_back(a + (fa / (fa - fb)) * (b - a));
    }
  }
  return out;
}

}  // namespace detail

//! Intersection of the halfplanes {v : s_r . v >= q_r} by successive convex
//! clipping of a large bounding square. Emptiness is a valid result, not an
//! error. Near-duplicate vertices (distance < 1e-9) are merged.
inline Envelope build_envelope(const DirectionGrid& grid, const Eigen::VectorXd& q) {
  if (q.size() != grid.size()) {
    throw std::invalid_argument("build_envelope: quantile count must match direction count");
  }
  Envelope env;
  env.q = q;
  constexpr double kBound = 1e6;
  std::vector<Eigen::Vector2d> polygon = {
      {-kBound, -kBound}, {kBound, -kBound}, {kBound, kBound}, {-kBound, kBound}};
  for (int r = 0; r < grid.size() && !polygon.empty(); ++r) {
    polygon = detail::clip_halfplane(polygon, grid.direction(r), q[r]);
  }
  // Merge near-duplicate vertices.
  std::vector<Eigen::Vector2d> merged;
  for (const auto& v : polygon) {
    if (merged.empty() || (v - merged.back()).norm() >= 1e-9) merged.push_back(v);
  }
  while (merged.size() > 1 && (merged.front() - merged.back()).norm() < 1e-9) {
    merged.pop_back();
  }
  if (merged.size() < 3) {
    env.empty = true;
    return env;
  }
  env.vertices = std::move(merged);
  for (int r = 0; r < grid.size(); ++r) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& v : env.vertices) {
      lowest = std::min(lowest, grid.direction(r).dot(v));
    }
    if (lowest <= q[r] + 1e-7) env.binding.push_back(r);
  }
  return env;
}

//! Closed-halfspace membership test straight off the constraints, so coverage
//! is exact even when clipping merged near-duplicate vertices.
inline bool contains(const DirectionGrid& grid, const Eigen::VectorXd& q,
                     const Eigen::Vector2d& point) {
  for (int r = 0; r < grid.size(); ++r) {
    if (grid.direction(r).dot(point) < q[r]) return false;
  }
  return true;
}

//! Fraction of points inside the envelope.
inline double coverage(const DirectionGrid& grid, const Eigen::VectorXd& q,
                       std::span<const Eigen::Vector2d> points) {
  if (points.empty()) throw std::invalid_argument("coverage: empty point list");
  std::size_t inside = 0;
  for (const auto& point : points) {
    if (contains(grid, q, point)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(points.size());
}

//! Signed polygon area (positive for counterclockwise order).
inline double polygon_area(const std::vector<Eigen::Vector2d>& vertices) {
  double twice_area = 0.0;
  const std::size_t count = vertices.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto& a = vertices[i];
    const auto& b = vertices[(i + 1) % count];
    twice_area += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * twice_area;
}

//! Vertex-averaged discrete curvature: mean over vertices of
//! |turning angle| / (mean adjacent edge length). Reduces to 1/R on polygons
//! approximating a circle of radius R and inflates on jagged outlines.
inline double curvature(const Envelope& envelope) {
  if (envelope.empty || envelope.vertices.size() < 3 ||
      std::abs(polygon_area(envelope.vertices)) < 1e-18) {
    throw numeric_error("curvature: undefined for empty or degenerate polygon");
  }
  const auto& v = envelope.vertices;
  const std::size_t count = v.size();
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector2d prev_edge = v[i] - v[(i + count - 1) % count];
    const Eigen::Vector2d next_edge = v[(i + 1) % count] - v[i];
    const double len_prev = prev_edge.norm();
    const double len_next = next_edge.norm();
    if (len_prev < 1e-15 || len_next < 1e-15) {
      throw numeric_error("curvature: degenerate polygon edge");
    }
    const double cross = prev_edge.x() * next_edge.y() - prev_edge.y() * next_edge.x();
    const double dot = prev_edge.dot(next_edge);
    const double turn = std::abs(std::atan2(cross, dot));
    total += turn / (0.5 * (len_prev + len_next));
  }
  return total / static_cast<double>(count);
}

}  // namespace dqr

#endif  // DQR_ENVELOPE_HPP_
