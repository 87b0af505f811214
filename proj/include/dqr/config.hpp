#ifndef DQR_CONFIG_HPP_
#define DQR_CONFIG_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqr/admm.hpp"
#include "dqr/errors.hpp"
#include "dqr/ps.hpp"
#include "dqr/simulation.hpp"
#include "dqr/spline_basis.hpp"

namespace dqr {

//! Basis specification as it appears in the configuration file: either an
//! explicit interior knot list, or a count spread evenly over a range.
//! `placement` = "range" uses `knot_range` verbatim; "data" derives the knots
//! from the interior of the ingested grid's t-range at fit time.
struct BasisSpec {
  int degree = 3;
  std::optional<std::vector<double>> knots;
  int knot_count = 14;
  std::vector<double> knot_range{0.02, 0.93};
  std::string placement = "range";

  SplineBasis build() const {
    if (knots) return SplineBasis(degree, *knots);
    return SplineBasis(degree, even_knots(knot_count, knot_range[0], knot_range[1]));
  }

  //! Basis for a dataset whose grid spans [lo, hi]: interior knots evenly
  //! inside the open data range.
  SplineBasis build_for_range(double lo, double hi) const {
    if (knots) return SplineBasis(degree, *knots);
    if (placement != "data") return build();
    const double step = (hi - lo) / (knot_count + 1);
    return SplineBasis(degree, even_knots(knot_count, lo + step, hi - step));
  }
};

//! Pass/fail tolerances echoed into reproduction reports.
struct ReportTolerances {
  double nu_initial = 0.03;
  double nu_updated = 0.03;
  double oracle_nu = 0.02;
};

//! Full run configuration: one structured file with per-module sections.
//! Unknown keys are rejected; every omitted key takes the library default and
//! is materialized into the echoed effective configuration.
struct RunConfig {
  BasisSpec basis;
  AdmmOptions admm;
  PsOptions ps;
  SimConfig sim;
  ReportTolerances report;
  std::string output_dir = "out";
  int threads = 1;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& object, const std::string& scope,
                                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (const char* candidate : allowed) {
      if (key == candidate) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw config_error("unknown key: " + (scope.empty() ? key : scope + "." + key));
    }
  }
}

template <typename T>
inline void read_key(const nlohmann::json& object, const char* key, T& target,
                     const std::string& scope) {
  if (!object.contains(key) || object.at(key).is_null()) return;
  try {
    target = object.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error("invalid value for key: " + (scope.empty() ? std::string(key)
                                                                  : scope + "." + key));
  }
}

template <typename T>
inline void read_optional(const nlohmann::json& object, const char* key,
                          std::optional<T>& target, const std::string& scope) {
  if (!object.contains(key)) return;
  if (object.at(key).is_null()) {
    target.reset();
    return;
  }
  try {
    target = object.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error("invalid value for key: " + scope + "." + key);
  }
}

inline CoeffSet parse_coeff_set(const std::string& text) {
  if (text == "smooth") return CoeffSet::kSmooth;
  if (text == "rough") return CoeffSet::kRough;
  throw config_error("sim.coeff_set must be \"smooth\" or \"rough\"");
}

inline ErrorModel parse_error_model(const std::string& text) {
  if (text == "I") return ErrorModel::kGaussian;
  if (text == "II") return ErrorModel::kStudentT3;
  if (text == "III") return ErrorModel::kChiSquared;
  throw config_error("sim.error must be \"I\", \"II\" or \"III\"");
}

}  // namespace detail

inline RunConfig parse_config_json(const nlohmann::json& doc) {
  RunConfig config;
  // format_version is accepted so an echoed effective config can be fed back
  // in as a run configuration.
  detail::reject_unknown_keys(
      doc, "",
      {"basis", "admm", "ps", "sim", "report", "output_dir", "threads", "format_version"});

  if (doc.contains("basis")) {
    const auto& basis = doc.at("basis");
    detail::reject_unknown_keys(basis, "basis",
                                {"degree", "knots", "knot_count", "knot_range", "placement"});
    detail::read_key(basis, "degree", config.basis.degree, "basis");
    detail::read_optional(basis, "knots", config.basis.knots, "basis");
    detail::read_key(basis, "knot_count", config.basis.knot_count, "basis");
    detail::read_key(basis, "knot_range", config.basis.knot_range, "basis");
    detail::read_key(basis, "placement", config.basis.placement, "basis");
    if (config.basis.knot_range.size() != 2 ||
        !(config.basis.knot_range[0] < config.basis.knot_range[1])) {
      throw config_error("basis.knot_range must be [lo, hi] with lo < hi");
    }
    if (config.basis.placement != "range" && config.basis.placement != "data") {
      throw config_error("basis.placement must be \"range\" or \"data\"");
    }
  }

  if (doc.contains("admm")) {
    const auto& admm = doc.at("admm");
    detail::reject_unknown_keys(
        admm, "admm", {"rho", "eps_abs", "eps_rel", "max_iters", "paper_exact_tolerances"});
    detail::read_key(admm, "rho", config.admm.rho, "admm");
    detail::read_key(admm, "eps_abs", config.admm.eps_abs, "admm");
    detail::read_key(admm, "eps_rel", config.admm.eps_rel, "admm");
    detail::read_key(admm, "max_iters", config.admm.max_iters, "admm");
    detail::read_key(admm, "paper_exact_tolerances", config.admm.paper_exact_tolerances, "admm");
  }

  if (doc.contains("ps")) {
    const auto& ps = doc.at("ps");
    detail::reject_unknown_keys(ps, "ps",
                                {"h", "max_stages", "reference_stage", "alpha", "lambda_grid",
                                 "cv_folds", "fixed_lambda", "cn_override"});
    detail::read_key(ps, "h", config.ps.h, "ps");
    detail::read_key(ps, "max_stages", config.ps.max_stages, "ps");
    detail::read_key(ps, "reference_stage", config.ps.reference_stage, "ps");
    detail::read_key(ps, "alpha", config.ps.alpha, "ps");
    detail::read_key(ps, "lambda_grid", config.ps.lambda_grid, "ps");
    detail::read_key(ps, "cv_folds", config.ps.cv_folds, "ps");
    detail::read_optional(ps, "fixed_lambda", config.ps.fixed_lambda, "ps");
    detail::read_optional(ps, "cn_override", config.ps.cn_override, "ps");
  }

  if (doc.contains("sim")) {
    const auto& sim = doc.at("sim");
    detail::reject_unknown_keys(sim, "sim",
                                {"coeff_set", "error", "n", "J", "d", "tau_levels", "probe",
                                 "replications", "seed", "oracle_samples"});
    if (sim.contains("coeff_set")) {
      config.sim.coeff_set = detail::parse_coeff_set(sim.at("coeff_set").get<std::string>());
    }
    if (sim.contains("error")) {
      config.sim.error = detail::parse_error_model(sim.at("error").get<std::string>());
    }
    detail::read_key(sim, "n", config.sim.n, "sim");
    detail::read_key(sim, "J", config.sim.J, "sim");
    detail::read_key(sim, "d", config.sim.d, "sim");
    detail::read_key(sim, "tau_levels", config.sim.tau_levels, "sim");
    if (sim.contains("probe")) {
      const auto probe = sim.at("probe").get<std::vector<double>>();
      if (probe.size() != 3) throw config_error("sim.probe must be [X1, X2, t]");
      config.sim.probe_x1 = probe[0];
      config.sim.probe_x2 = probe[1];
      config.sim.probe_t = probe[2];
    }
    detail::read_key(sim, "replications", config.sim.replications, "sim");
    detail::read_key(sim, "seed", config.sim.seed, "sim");
    detail::read_key(sim, "oracle_samples", config.sim.oracle_samples, "sim");
  }

  if (doc.contains("report")) {
    const auto& report = doc.at("report");
    detail::reject_unknown_keys(report, "report",
                                {"nu_initial_tolerance", "nu_updated_tolerance",
                                 "oracle_nu_tolerance"});
    detail::read_key(report, "nu_initial_tolerance", config.report.nu_initial, "report");
    detail::read_key(report, "nu_updated_tolerance", config.report.nu_updated, "report");
    detail::read_key(report, "oracle_nu_tolerance", config.report.oracle_nu, "report");
  }

  detail::read_key(doc, "output_dir", config.output_dir, "");
  detail::read_key(doc, "threads", config.threads, "");
  if (config.threads < 1) throw config_error("threads must be >= 1");
  return config;
}

//! Parses a configuration file, reporting JSON syntax errors with their line
//! number and unknown/invalid keys by full path.
inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = std::min(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + offset, '\n');
    throw config_error("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) throw config_error("config root must be a JSON object");
  return parse_config_json(doc);
}

//! Effective configuration with every default materialized.
inline nlohmann::json effective_config_json(const RunConfig& config) {
  nlohmann::json doc;
  doc["basis"] = {{"degree", config.basis.degree},
                  {"knot_count", config.basis.knot_count},
                  {"knot_range", config.basis.knot_range},
                  {"placement", config.basis.placement}};
  if (config.basis.knots) {
    doc["basis"]["knots"] = *config.basis.knots;
  } else {
    doc["basis"]["knots"] = nullptr;
  }
  doc["admm"] = {{"rho", config.admm.rho},
                 {"eps_abs", config.admm.eps_abs},
                 {"eps_rel", config.admm.eps_rel},
                 {"max_iters", config.admm.max_iters},
                 {"paper_exact_tolerances", config.admm.paper_exact_tolerances}};
  doc["ps"] = {{"h", config.ps.h},
               {"max_stages", config.ps.max_stages},
               {"reference_stage", config.ps.reference_stage},
               {"alpha", config.ps.alpha},
               {"lambda_grid", config.ps.lambda_grid},
               {"cv_folds", config.ps.cv_folds}};
  doc["ps"]["fixed_lambda"] =
      config.ps.fixed_lambda ? nlohmann::json(*config.ps.fixed_lambda) : nlohmann::json(nullptr);
  doc["ps"]["cn_override"] =
      config.ps.cn_override ? nlohmann::json(*config.ps.cn_override) : nlohmann::json(nullptr);
  doc["sim"] = {{"coeff_set", to_string(config.sim.coeff_set)},
                {"error", to_string(config.sim.error)},
                {"n", config.sim.n},
                {"J", config.sim.J},
                {"d", config.sim.d},
                {"tau_levels", config.sim.tau_levels},
                {"probe", {config.sim.probe_x1, config.sim.probe_x2, config.sim.probe_t}},
                {"replications", config.sim.replications},
                {"seed", config.sim.seed},
                {"oracle_samples", config.sim.oracle_samples}};
  doc["report"] = {{"nu_initial_tolerance", config.report.nu_initial},
                   {"nu_updated_tolerance", config.report.nu_updated},
                   {"oracle_nu_tolerance", config.report.oracle_nu}};
  doc["output_dir"] = config.output_dir;
  doc["threads"] = config.threads;
  doc["format_version"] = 1;
  return doc;
}

}  // namespace dqr

#endif  // DQR_CONFIG_HPP_
