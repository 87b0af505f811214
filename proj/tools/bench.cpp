// Scratch benchmark for the solver and the multistage pipeline at the
// reproduction problem size. Not installed; development aid only.
#include <chrono>
#include <cstdio>

#include "dqr/simulation.hpp"

using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int main(int argc, char** argv) {
  const int mode = argc > 1 ? std::atoi(argv[1]) : 0;

  dqr::SimConfig config;
  config.tau_levels = {0.05};
  const dqr::SplineBasis basis(3, dqr::even_knots(14, 0.02, 0.93));
  const dqr::DirectionGrid grid(config.d);
  const auto data = dqr::gen_dataset(config, dqr::derive_seed(config.seed, 0, 0));

  if (mode == 0) {
    // Single solves at reproduction size.
    const Eigen::MatrixXd X = dqr::design_matrix(data, basis);
    const Eigen::MatrixXd omega = dqr::block_penalty(basis, 3);
    const dqr::DesignCache cache(X);
    std::printf("design %ld x %ld\n", X.rows(), X.cols());
    for (const double lambda : {0.001, 0.01, 0.1, 1.0}) {
      const Eigen::VectorXd y = dqr::stack_rows(dqr::project_responses(data, grid.direction(0)));
      const dqr::WeightedResponse block{&y, 1.0};
      const auto start = Clock::now();
      const auto fit = dqr::solve_pqr(cache, std::span<const dqr::WeightedResponse>(&block, 1),
                                      0.05, lambda, omega);
      std::printf("lambda=%g iters=%d converged=%d obj=%.4f time=%.3fs\n", lambda,
                  fit.iterations, fit.converged, fit.objective, seconds_since(start));
    }
    // A few directions to gauge spread.
    double total = 0.0;
    int total_iters = 0;
    for (int r = 0; r < 10; ++r) {
      const Eigen::VectorXd y = dqr::stack_rows(dqr::project_responses(data, grid.direction(r * 10)));
      const dqr::WeightedResponse block{&y, 1.0};
      const auto start = Clock::now();
      const auto fit = dqr::solve_pqr(cache, std::span<const dqr::WeightedResponse>(&block, 1),
                                      0.05, 0.1, omega);
      total += seconds_since(start);
      total_iters += fit.iterations;
    }
    std::printf("10 directions: %.3fs total, mean iters %.1f\n", total, total_iters / 10.0);
  } else if (mode == 1) {
    dqr::PsOptions opts;
    opts.threads = argc > 2 ? std::atoi(argv[2]) : 1;
    auto start = Clock::now();
    const double lambda = dqr::select_lambda(data, basis, grid, 0.05, opts);
    std::printf("select_lambda -> %g in %.1fs\n", lambda, seconds_since(start));
    opts.fixed_lambda = lambda;
    start = Clock::now();
    const auto field = dqr::stage1_fit(data, basis, grid, 0.05, opts);
    std::printf("stage1 %.1fs\n", seconds_since(start));
    start = Clock::now();
    const auto next = dqr::stage2_update(data, basis, field, 1, opts);
    std::printf("stage2(c=1) %.1fs\n", seconds_since(start));
    start = Clock::now();
    const auto result = dqr::run_multistage(data, basis, grid, 0.05, opts);
    std::printf("full multistage %.1fs (stages recorded: %zu)\n", seconds_since(start),
                result.trace.snapshots.size());
  } else if (mode == 2) {
    dqr::PsOptions opts;
    const int threads = argc > 2 ? std::atoi(argv[2]) : 1;
    dqr::SimConfig small = config;
    small.replications = argc > 3 ? std::atoi(argv[3]) : 2;
    const auto start = Clock::now();
    const auto report = dqr::run_replications(small, basis, opts, threads);
    std::printf("replications=%d threads=%d time=%.1fs\n", small.replications, threads,
                seconds_since(start));
    for (const auto& row : report.rows) {
      std::printf("%s err=%s tau=%.2f %s truth=%.3f init=%.3f(%.3f) upd=%.3f(%.3f)\n",
                  dqr::to_string(row.coeff_set).c_str(), dqr::to_string(row.error).c_str(),
                  row.tau, row.metric.c_str(), row.summary.truth, row.summary.initial_mean,
                  row.summary.initial_sd, row.summary.updated_mean, row.summary.updated_sd);
    }
  } else {
    // PS diagnostics: CV scores, adjacent-direction similarity statistics.
    dqr::PsOptions opts;
    opts.threads = 2;
    const double lambda_fixed = argc > 2 ? std::atof(argv[2]) : -1.0;
    double lambda;
    if (lambda_fixed >= 0.0) {
      lambda = lambda_fixed;
    } else {
      lambda = dqr::select_lambda(data, basis, grid, 0.05, opts);
    }
    std::printf("lambda = %g\n", lambda);
    opts.fixed_lambda = lambda;
    const auto field = dqr::stage1_fit(data, basis, grid, 0.05, opts);
    const double cn_08 = opts.similarity_scale(config.n);
    dqr::PsOptions alpha13 = opts;
    alpha13.alpha = 1.3;
    std::printf("C_n(alpha=.8)=%.2f  C_n(alpha=1.3)=%.2f\n", cn_08,
                alpha13.similarity_scale(config.n));
    for (int r = 0; r < grid.size(); r += 20) {
      const int q = (r + 1) % grid.size();
      const double mahal =
          ((field.coefficients.row(q) - field.coefficients.row(r)).array().square() /
           field.variances.row(r).array())
              .sum();
      std::printf("dir %3d: D(adjacent)=%.2f  sd(range)=[%.2e, %.2e]  |dB|max=%.3e\n", r, mahal,
                  std::sqrt(field.variances.row(r).minCoeff()),
                  std::sqrt(field.variances.row(r).maxCoeff()),
                  (field.coefficients.row(q) - field.coefficients.row(r)).cwiseAbs().maxCoeff());
    }
    int alive = 0;
    for (int r = 0; r < grid.size(); ++r) {
      if (dqr::ps_weights(field, r, 1, config.n, opts).size() > 1) ++alive;
    }
    std::printf("directions with live neighbors at stage 1 (alpha=.8): %d / %d\n", alive,
                grid.size());
  }
  return 0;
}
