#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "dqr/design.hpp"
#include "dqr/rng.hpp"

namespace {

dqr::FunctionalDataset toy_dataset(int n, int J, int p, dqr::Rng& rng) {
  dqr::FunctionalDataset data;
  data.t_grid.resize(J);
  for (int j = 0; j < J; ++j) data.t_grid[j] = static_cast<double>(j) / (J - 1);
  data.covariates.resize(n, p);
  data.covariates.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k < p; ++k) data.covariates(i, k) = rng.normal();
  }
  data.y1.resize(n, J);
  data.y2.resize(n, J);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      data.y1(i, j) = rng.normal();
      data.y2(i, j) = rng.normal();
    }
  }
  return data;
}

}  // namespace

TEST_CASE("projections pick out coordinates for axis directions") {
  dqr::Rng rng(2);
  const auto data = toy_dataset(5, 4, 2, rng);
  CHECK(dqr::project_responses(data, Eigen::Vector2d(1, 0)) == data.y1);
  CHECK(dqr::project_responses(data, Eigen::Vector2d(0, 1)) == data.y2);

  dqr::FunctionalDataset unit = data;
  unit.y1.setOnes();
  unit.y2.setOnes();
  const double root_half = std::numbers::sqrt2 / 2.0;
  const Eigen::MatrixXd proj = dqr::project_responses(unit, {root_half, root_half});
  CHECK(proj(0, 0) == Catch::Approx(std::numbers::sqrt2).margin(1e-15));

  CHECK_THROWS_AS(dqr::project_responses(data, Eigen::Vector2d(1.0, 0.1)),
                  std::invalid_argument);
}

TEST_CASE("design matrix shape and Kronecker rows") {
  dqr::Rng rng(4);
  const dqr::SplineBasis basis(3, dqr::even_knots(14, 0.02, 0.93));

  // Shape: n=200, J=50, p=3, M=18 gives 10000 x 54.
  {
    const auto data = toy_dataset(200, 50, 3, rng);
    const Eigen::MatrixXd X = dqr::design_matrix(data, basis);
    CHECK(X.rows() == 10000);
    CHECK(X.cols() == 54);
  }

  // p = 1 with unit covariate: rows are exactly the basis values.
  {
    const auto data = toy_dataset(3, 7, 1, rng);
    const Eigen::MatrixXd X = dqr::design_matrix(data, basis);
    for (int j = 0; j < 7; ++j) {
      const Eigen::VectorXd h = basis.evaluate(data.t_grid[j]);
      CHECK((X.row(j).transpose() - h).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  // p = 2, x = (1, 2) with a two-function basis gives the row (h1, h2, 2h1, 2h2).
  {
    dqr::FunctionalDataset data;
    data.t_grid.resize(2);
    data.t_grid << 0.25, 0.75;
    data.covariates.resize(1, 2);
    data.covariates << 1.0, 2.0;
    data.y1 = Eigen::MatrixXd::Zero(1, 2);
    data.y2 = Eigen::MatrixXd::Zero(1, 2);
    const dqr::SplineBasis tiny(1, {});
    const Eigen::MatrixXd X = dqr::design_matrix(data, tiny);
    const Eigen::VectorXd h = tiny.evaluate(0.25);
    CHECK(X(0, 0) == Catch::Approx(h[0]));
    CHECK(X(0, 1) == Catch::Approx(h[1]));
    CHECK(X(0, 2) == Catch::Approx(2.0 * h[0]));
    CHECK(X(0, 3) == Catch::Approx(2.0 * h[1]));
  }
}

TEST_CASE("design rows reproduce x' C H(t) for random coefficients") {
  dqr::Rng rng(8);
  const dqr::SplineBasis basis(3, dqr::even_knots(4, 0.2, 0.8));
  const auto data = toy_dataset(6, 5, 3, rng);
  const Eigen::MatrixXd X = dqr::design_matrix(data, basis);
  const int M = basis.size();
  Eigen::VectorXd b(3 * M);
  for (int i = 0; i < b.size(); ++i) b[i] = rng.normal();

  const Eigen::VectorXd fitted = X * b;
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.grid_size(); ++j) {
      const Eigen::VectorXd h = basis.evaluate(data.t_grid[j]);
      double direct = 0.0;
      for (int k = 0; k < 3; ++k) {
        direct += data.covariates(i, k) * b.segment(k * M, M).dot(h);
      }
      CHECK(fitted[i * data.grid_size() + j] == Catch::Approx(direct).margin(1e-12));
    }
  }
}

TEST_CASE("block penalty expands the basis penalty per covariate") {
  const dqr::SplineBasis basis(3, dqr::even_knots(3, 0.25, 0.75));
  const Eigen::MatrixXd omega = dqr::block_penalty(basis, 2);
  const int M = basis.size();
  CHECK(omega.rows() == 2 * M);
  CHECK(omega.block(0, 0, M, M) == basis.penalty());
  CHECK(omega.block(M, M, M, M) == basis.penalty());
  CHECK(omega.block(0, M, M, M).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("direction grid geometry") {
  const dqr::DirectionGrid grid(100);
  CHECK(grid.size() == 100);
  for (int r = 0; r < grid.size(); ++r) {
    CHECK(std::abs(grid.direction(r).norm() - 1.0) < 1e-12);
    const double chord = grid.chord(r, (r + 1) % grid.size());
    CHECK(chord == Catch::Approx(grid.spacing()).margin(1e-12));
  }
  CHECK(grid.angles().front() == Catch::Approx(-std::numbers::pi));
}

TEST_CASE("dataset validation rejects bad grids and missing values") {
  dqr::Rng rng(12);
  auto data = toy_dataset(4, 3, 2, rng);
  CHECK_NOTHROW(data.validate());

  auto bad_grid = data;
  bad_grid.t_grid[1] = bad_grid.t_grid[0];
  CHECK_THROWS_AS(bad_grid.validate(), dqr::data_error);

  auto nan_value = data;
  nan_value.y2(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nan_value.validate(), dqr::data_error);
}
