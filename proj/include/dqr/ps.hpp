#ifndef DQR_PS_HPP_
#define DQR_PS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dqr/admm.hpp"
#include "dqr/dataset.hpp"
#include "dqr/design.hpp"
#include "dqr/distributions.hpp"
#include "dqr/errors.hpp"
#include "dqr/parallel.hpp"
#include "dqr/spline_basis.hpp"
#include "dqr/variance.hpp"

namespace dqr {

//! Options for the multistage (propagation-separation) estimation procedure.
struct PsOptions {
  double h = 1.15;          //!< neighborhood growth factor, > 1
  int max_stages = 5;       //!< maximum number of adaptive updates (C)
  int reference_stage = 1;  //!< stage whose estimates anchor the stop check (c0)
  double alpha = 0.8;       //!< similarity scale C_n = n^alpha * chi2_1(.8); alpha in [.3, 1.3]
  std::vector<double> lambda_grid{0.001, 0.01, 0.1, 1.0};
  int cv_folds = 5;
  std::optional<double> fixed_lambda;  //!< skip cross-validation when set
  std::optional<double> cn_override;   //!< replaces C_n (degeneracy experiments)
  AdmmOptions admm;
  int threads = 1;

  void validate() const {
    if (!(h > 1.0)) throw std::invalid_argument("PsOptions: h must exceed 1");
    if (max_stages < 0) throw std::invalid_argument("PsOptions: max_stages must be >= 0");
    if (max_stages > 0 && !(reference_stage >= 1 && reference_stage < std::max(max_stages, 2))) {
      throw std::invalid_argument("PsOptions: need 1 <= reference_stage < max_stages");
    }
    if (lambda_grid.empty()) throw std::invalid_argument("PsOptions: empty lambda grid");
    if (cv_folds < 2) throw std::invalid_argument("PsOptions: need at least 2 folds");
    admm.validate();
  }

  double similarity_scale(int n_subjects) const {
    if (cn_override) return *cn_override;
    return std::pow(static_cast<double>(n_subjects), alpha) * chi2_upper_quantile(1, 0.8);
  }
};

//! Per-direction spline coefficient vectors with componentwise variance
//! estimates, the current stage counter and per-direction freeze flags.
struct CoefficientField {
  DirectionGrid grid{1};
  double tau = 0.5;
  double lambda = 0.0;          //!< penalty level used for every stage
  Eigen::MatrixXd coefficients;  //!< d x (p*M), row r = estimate at direction r
  Eigen::MatrixXd variances;     //!< d x (p*M), strictly positive
  int stage = 0;
  std::vector<char> frozen;  //!< per-direction stop flags
};

struct PsWeight {
  int direction;
  double value;
};

//! Propagation-separation weights around a center direction at stage c.
//!
//! A direction r participates when its chord distance to the center is at
//! most d0 * h^c; its weight is
//!   K_loc(dist / (d0 h^c)) * K_st(D / C_n)
//! with K_loc(u) = (1-u)_+, K_st(u) = min(1, 2(1-u)_+) and D the
//! Mahalanobis-type distance between the stage-(c-1) estimates using the
//! center's componentwise variances. The center itself always has weight 1.
//! Only strictly positive weights are returned, ordered by direction index.
inline std::vector<PsWeight> ps_weights(const CoefficientField& field, int center, int stage_c,
                                        int n_subjects, const PsOptions& opts) {
  const int d = field.grid.size();
  const double radius = field.grid.spacing() * std::pow(opts.h, stage_c);
  const double cn = opts.similarity_scale(n_subjects);
  std::vector<PsWeight> weights;
  for (int r = 0; r < d; ++r) {
    const double dist = field.grid.chord(center, r);
    if (dist > radius) continue;
    const double loc = std::max(0.0, 1.0 - dist / radius);
    double value;
    if (r == center) {
      value = 1.0;
    } else {
      const double mahal =
          ((field.coefficients.row(r) - field.coefficients.row(center)).array().square() /
           field.variances.row(center).array())
              .sum();
      const double st = std::min(1.0, 2.0 * std::max(0.0, 1.0 - mahal / cn));
      value = loc * st;
    }
    if (value > 0.0) weights.push_back({r, value});
  }
  return weights;
}

namespace detail {

//! Stacks the projected responses of every direction as columns of an
//! (n*J) x d matrix, in design_matrix row order.
inline Eigen::MatrixXd projected_columns(const FunctionalDataset& data,
                                         const DirectionGrid& grid) {
  const Eigen::Index rows = static_cast<Eigen::Index>(data.n()) * data.grid_size();
  Eigen::MatrixXd out(rows, grid.size());
  for (int r = 0; r < grid.size(); ++r) {
    out.col(r) = stack_rows(project_responses(data, grid.direction(r)));
  }
  return out;
}

inline AdmmResult solve_direction(const DesignCache& cache,
                                  std::span<const WeightedResponse> blocks, double tau,
                                  double lambda, const Eigen::MatrixXd& omega,
                                  const AdmmOptions& admm, int direction) {
  try {
    return solve_pqr(cache, blocks, tau, lambda, omega, admm);
  } catch (const std::exception& e) {
    throw numeric_error("direction " + std::to_string(direction) + ": " + e.what());
  }
}

}  // namespace detail

//! Penalty level selected by k-fold cross-validation over subjects.
//!
//! Folds split on subject index (subject i belongs to fold i mod folds); the
//! score of a lambda is the mean held-out check loss over the folds and over
//! eight probe directions spread around the grid. The grid minimizer is
//! returned (first hit on ties) and reused for all stages and directions.
inline double select_lambda(const FunctionalDataset& data, const SplineBasis& basis,
                            const DirectionGrid& grid, double tau, const PsOptions& opts) {
  opts.validate();
  if (opts.lambda_grid.size() == 1) return opts.lambda_grid.front();
  data.validate();
  const int n = data.n();
  const int J = data.grid_size();
  const int p = data.covariate_count();
  const int folds = opts.cv_folds;
  for (int f = 0; f < folds; ++f) {
    int held = 0;
    for (int i = f; i < n; i += folds) ++held;
    if (held < p) {
      throw config_error("select_lambda: fold " + std::to_string(f) + " has fewer than " +
                         std::to_string(p) + " subjects");
    }
  }

  std::vector<int> probes;
  const int probe_count = std::min(8, grid.size());
  for (int q = 0; q < probe_count; ++q) {
    probes.push_back(q * grid.size() / probe_count);
  }

  const Eigen::MatrixXd X = design_matrix(data, basis);
  const Eigen::MatrixXd omega = block_penalty(basis, p);
  const Eigen::MatrixXd projections = detail::projected_columns(data, grid);

  std::vector<double> scores(opts.lambda_grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_subjects;
    std::vector<int> test_subjects;
    for (int i = 0; i < n; ++i) {
      (i % folds == f ? test_subjects : train_subjects).push_back(i);
    }
    const auto gather_rows = [J](const std::vector<int>& subjects) {
      std::vector<Eigen::Index> rows;
      rows.reserve(subjects.size() * J);
      for (int i : subjects) {
        for (int j = 0; j < J; ++j) rows.push_back(static_cast<Eigen::Index>(i) * J + j);
      }
      return rows;
    };
    const auto train_rows = gather_rows(train_subjects);
    const auto test_rows = gather_rows(test_subjects);
    const Eigen::MatrixXd X_train = X(train_rows, Eigen::all);
    const Eigen::MatrixXd X_test = X(test_rows, Eigen::all);
    const DesignCache cache(X_train);

    std::vector<double> fold_scores(opts.lambda_grid.size() * probes.size(), 0.0);
    parallel_for(0, static_cast<int>(probes.size()), opts.threads, [&](int pi) {
      const Eigen::VectorXd y_train = projections(train_rows, probes[pi]);
      const Eigen::VectorXd y_test = projections(test_rows, probes[pi]);
      for (std::size_t li = 0; li < opts.lambda_grid.size(); ++li) {
        const WeightedResponse block{&y_train, 1.0};
        const AdmmResult fit =
            detail::solve_direction(cache, std::span<const WeightedResponse>(&block, 1), tau,
                                    opts.lambda_grid[li], omega, opts.admm, probes[pi]);
        const Eigen::VectorXd held_res = y_test - X_test * fit.coefficients;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < held_res.size(); ++i) {
          loss += check_loss(held_res[i], tau);
        }
        fold_scores[li * probes.size() + pi] = loss / static_cast<double>(held_res.size());
      }
    });
    for (std::size_t li = 0; li < opts.lambda_grid.size(); ++li) {
      for (std::size_t pi = 0; pi < probes.size(); ++pi) {
        scores[li] += fold_scores[li * probes.size() + pi];
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t li = 1; li < scores.size(); ++li) {
    if (scores[li] < scores[best]) best = li;
  }
  return opts.lambda_grid[best];
}

//! Stage I: independent penalized fit per direction, filling coefficients and
//! componentwise variance estimates.
inline CoefficientField stage1_fit(const FunctionalDataset& data, const SplineBasis& basis,
                                   const DirectionGrid& grid, double tau, const PsOptions& opts) {
  opts.validate();
  require_quantile_level(tau);
  data.validate();
  const int d = grid.size();
  const int p = data.covariate_count();
  const int K = p * basis.size();

  const double lambda =
      opts.fixed_lambda ? *opts.fixed_lambda : select_lambda(data, basis, grid, tau, opts);

  const Eigen::MatrixXd X = design_matrix(data, basis);
  const Eigen::MatrixXd omega = block_penalty(basis, p);
  const DesignCache cache(X);
  const Eigen::MatrixXd projections = detail::projected_columns(data, grid);

  CoefficientField field;
  field.grid = grid;
  field.tau = tau;
  field.lambda = lambda;
  field.coefficients.resize(d, K);
  field.variances.resize(d, K);
  field.stage = 0;
  field.frozen.assign(d, 0);

  parallel_for(0, d, opts.threads, [&](int r) {
    const Eigen::VectorXd y = projections.col(r);
    const WeightedResponse block{&y, 1.0};
    const AdmmResult fit = detail::solve_direction(
        cache, std::span<const WeightedResponse>(&block, 1), tau, lambda, omega, opts.admm, r);
    field.coefficients.row(r) = fit.coefficients.transpose();
    const Eigen::VectorXd residuals = y - X * fit.coefficients;
    field.variances.row(r) =
        estimate_variances_gram(cache.gram(), residuals, tau, lambda, omega).transpose();
  });
  return field;
}

//! Stage II: one synchronous adaptive sweep. Every non-frozen direction is
//! refit on the weighted stack of its neighbors' projected problems (weights
//! folded into row scaling) plus the single penalty term; all updates read
//! the stage-(c-1) field. Frozen rows are copied through untouched.
inline CoefficientField stage2_update(const FunctionalDataset& data, const SplineBasis& basis,
                                      const CoefficientField& field, int stage_c,
                                      const PsOptions& opts) {
  opts.validate();
  data.validate();
  const int d = field.grid.size();
  const int p = data.covariate_count();

  const Eigen::MatrixXd X = design_matrix(data, basis);
  const Eigen::MatrixXd omega = block_penalty(basis, p);
  const DesignCache cache(X);
  const Eigen::MatrixXd projections = detail::projected_columns(data, field.grid);

  CoefficientField next = field;
  next.stage = stage_c;

  parallel_for(0, d, opts.threads, [&](int r) {
    if (field.frozen[r]) return;
    const auto weights = ps_weights(field, r, stage_c, data.n(), opts);
    std::vector<Eigen::VectorXd> responses;
    std::vector<WeightedResponse> blocks;
    responses.reserve(weights.size());
    blocks.reserve(weights.size());
    for (const auto& w : weights) {
      responses.push_back(projections.col(w.direction));
    }
    for (std::size_t k = 0; k < weights.size(); ++k) {
      blocks.push_back({&responses[k], weights[k].value});
    }
    const AdmmResult fit =
        detail::solve_direction(cache, blocks, field.tau, field.lambda, omega, opts.admm, r);
    next.coefficients.row(r) = fit.coefficients.transpose();

    // Variances re-estimated on the weighted stacked problem.
    double weight_sq = 0.0;
    Eigen::VectorXd stacked_residuals(static_cast<Eigen::Index>(weights.size()) * X.rows());
    const Eigen::VectorXd fitted = X * fit.coefficients;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double w = weights[k].value;
      weight_sq += w * w;
      stacked_residuals.segment(static_cast<Eigen::Index>(k) * X.rows(), X.rows()) =
          w * (responses[k] - fitted);
    }
    next.variances.row(r) = estimate_variances_gram(weight_sq * cache.gram(), stacked_residuals,
                                                    field.tau, field.lambda, omega)
                                .transpose();
  });
  return next;
}

struct StopDecision {
  bool freeze = false;
  double max_statistic = 0.0;
};

//! Stage III: componentwise stop check of the stage-c estimates against the
//! reference stage. Direction r is flagged when any component k satisfies
//! (B_c[k] - B_ref[k])^2 / var_ref[k] > chi2_1(.8 / c) upper quantile.
inline std::vector<StopDecision> stage3_check(const CoefficientField& current,
                                              const CoefficientField& reference, int stage_c) {
  if (stage_c < 1) throw std::invalid_argument("stage3_check: stage must be >= 1");
  const int d = current.grid.size();
  if (reference.grid.size() != d || reference.coefficients.cols() != current.coefficients.cols()) {
    throw std::invalid_argument("stage3_check: field shapes differ");
  }
  const double u = std::min(0.8 / static_cast<double>(stage_c), 1.0 - 1e-12);
  const double threshold = chi2_upper_quantile(1, u);
  std::vector<StopDecision> decisions(d);
  for (int r = 0; r < d; ++r) {
    if (current.frozen[r]) continue;
    const double stat =
        ((current.coefficients.row(r) - reference.coefficients.row(r)).array().square() /
         reference.variances.row(r).array())
            .maxCoeff();
    decisions[r].max_statistic = stat;
    decisions[r].freeze = stat > threshold;
  }
  return decisions;
}

struct StageEvent {
  int stage;
  int direction;
  bool frozen;
  double max_statistic;
};

struct MultistageTrace {
  std::vector<Eigen::MatrixXd> snapshots;  //!< coefficient matrix after each adaptive stage
  std::vector<StageEvent> events;          //!< one entry per (stage, direction)
};

struct MultistageResult {
  CoefficientField initial;
  CoefficientField updated;
  MultistageTrace trace;
};

//! The full three-stage procedure: Stage I initialization, then up to
//! max_stages adaptive sweeps, each followed (beyond the reference stage) by
//! the stop check. A direction that trips the check reverts to its previous
//! stage's estimate and stays frozen afterwards. Stops early once every
//! direction is frozen.
inline MultistageResult run_multistage(const FunctionalDataset& data, const SplineBasis& basis,
                                       const DirectionGrid& grid, double tau,
                                       const PsOptions& opts) {
  opts.validate();
  MultistageResult result;
  result.initial = stage1_fit(data, basis, grid, tau, opts);
  CoefficientField current = result.initial;
  CoefficientField reference;

  for (int c = 1; c <= opts.max_stages; ++c) {
    const CoefficientField previous = current;
    current = stage2_update(data, basis, previous, c, opts);
    if (c == opts.reference_stage) reference = current;
    if (c > opts.reference_stage) {
      const auto decisions = stage3_check(current, reference, c);
      for (int r = 0; r < grid.size(); ++r) {
        if (current.frozen[r]) {
          result.trace.events.push_back({c, r, true, 0.0});
          continue;
        }
        if (decisions[r].freeze) {
          current.coefficients.row(r) = previous.coefficients.row(r);
          current.variances.row(r) = previous.variances.row(r);
          current.frozen[r] = 1;
        }
        result.trace.events.push_back({c, r, decisions[r].freeze, decisions[r].max_statistic});
      }
    } else {
      for (int r = 0; r < grid.size(); ++r) {
        result.trace.events.push_back({c, r, current.frozen[r] != 0, 0.0});
      }
    }
    result.trace.snapshots.push_back(current.coefficients);
    if (std::all_of(current.frozen.begin(), current.frozen.end(),
                    [](char f) { return f != 0; })) {
      break;
    }
  }
  result.updated = current;
  return result;
}

}  // namespace dqr

#endif  // DQR_PS_HPP_
