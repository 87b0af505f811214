#ifndef DQR_COMMANDS_HPP_
#define DQR_COMMANDS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dqr/config.hpp"
#include "dqr/envelope.hpp"
#include "dqr/io.hpp"
#include "dqr/ps.hpp"
#include "dqr/simulation.hpp"

namespace dqr {

namespace detail {

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data_error("cannot create output directory " + dir.string());
}

inline void write_effective_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out << effective_config_json(config).dump(2) << '\n';
}

inline PsOptions ps_options_of(const RunConfig& config) {
  PsOptions opts = config.ps;
  opts.admm = config.admm;
  opts.threads = config.threads;
  return opts;
}

}  // namespace detail

//! simulate: draw the configured synthetic dataset and write it as CSV next
//! to the echoed effective configuration.
struct SimulateOutputs {
  std::filesystem::path dataset_csv;
  std::filesystem::path effective_config;
};

inline SimulateOutputs cmd_simulate(const RunConfig& config,
                                    const std::filesystem::path& out_dir) {
  config.sim.validate();
  detail::ensure_directory(out_dir);
  const FunctionalDataset data = gen_dataset(config.sim, derive_seed(config.sim.seed, 0, 0));
  SimulateOutputs outputs{out_dir / "dataset.csv", out_dir / "effective_config.json"};
  write_dataset_csv(outputs.dataset_csv, data);
  detail::write_effective_config(config, outputs.effective_config);
  return outputs;
}

//! fit: ingest a dataset, run the full multistage procedure at every
//! configured quantile level and save the coefficient-field artifact.
struct FitOutputs {
  std::filesystem::path field_json;
  std::vector<std::filesystem::path> trace_csvs;  //!< one per quantile level
  std::filesystem::path effective_config;
};

inline FitOutputs cmd_fit(const RunConfig& config, const std::filesystem::path& data_path,
                          const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);
  const FunctionalDataset data = read_dataset_csv(data_path);
  const SplineBasis basis =
      config.basis.build_for_range(data.t_grid[0], data.t_grid[data.grid_size() - 1]);
  const DirectionGrid grid(config.sim.d);
  const PsOptions opts = detail::ps_options_of(config);

  FieldFile field;
  field.degree = basis.degree();
  field.interior_knots = basis.interior_knots();
  field.directions = grid.size();
  field.covariates = data.covariate_count();
  field.effective_config = effective_config_json(config);
  for (const double tau : config.sim.tau_levels) {
    const MultistageResult result = run_multistage(data, basis, grid, tau, opts);
    FieldFit fit;
    fit.tau = tau;
    fit.lambda = result.initial.lambda;
    fit.initial = result.initial;
    fit.updated = result.updated;
    fit.trace = result.trace.events;
    field.fits.push_back(std::move(fit));
  }

  FitOutputs outputs{out_dir / "field.json", {}, out_dir / "effective_config.json"};
  save_field(outputs.field_json, field);
  for (const auto& fit : field.fits) {
    char name[64];
    std::snprintf(name, sizeof(name), "trace_tau%g.csv", fit.tau);
    outputs.trace_csvs.push_back(out_dir / name);
    write_trace_csv(outputs.trace_csvs.back(), fit);
  }
  detail::write_effective_config(config, outputs.effective_config);
  return outputs;
}

//! envelope: evaluate envelopes from a saved field at probe covariates over
//! one t or a t-sweep, for the requested quantile levels.
struct EnvelopeRequest {
  Eigen::VectorXd x;             //!< covariate vector including the leading 1
  std::vector<double> t_values;  //!< one entry per requested slice
  std::vector<double> taus;      //!< empty = every fitted level
};

struct EnvelopeOutputs {
  std::filesystem::path envelopes_json;
  std::filesystem::path vertices_csv;
};

inline EnvelopeOutputs cmd_envelope(const std::filesystem::path& field_path,
                                    const EnvelopeRequest& request,
                                    const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);
  const FieldFile field = load_field(field_path);
  if (request.x.size() != field.covariates) {
    throw config_error("probe covariate vector must have length " +
                       std::to_string(field.covariates));
  }
  if (request.t_values.empty()) throw config_error("no t values requested");
  const SplineBasis basis = field.basis();
  const DirectionGrid grid = field.grid();

  nlohmann::json doc;
  doc["format_version"] = kFormatVersion;
  doc["effective_config"] = field.effective_config;
  nlohmann::json entries = nlohmann::json::array();

  std::ofstream vertices_out(out_dir / "vertices.csv");
  if (!vertices_out) throw data_error("cannot open vertices.csv for writing");
  vertices_out << "tau,t,stage,vertex,x,y\n";

  for (const auto& fit : field.fits) {
    if (!request.taus.empty() &&
        std::find(request.taus.begin(), request.taus.end(), fit.tau) == request.taus.end()) {
      continue;
    }
    for (const double t : request.t_values) {
      for (const auto& [stage_name, coeff_field] :
           {std::pair<const char*, const CoefficientField&>{"initial", fit.initial},
            std::pair<const char*, const CoefficientField&>{"updated", fit.updated}}) {
        Envelope env = build_envelope(
            grid, directional_quantiles(coeff_field, basis, request.x, t));
        env.tau = fit.tau;
        env.t = t;
        env.x = request.x;
        entries.push_back(envelope_to_json(env, stage_name));
        for (std::size_t v = 0; v < env.vertices.size(); ++v) {
          vertices_out << detail::format_double(fit.tau) << ',' << detail::format_double(t)
                       << ',' << stage_name << ',' << v << ','
                       << detail::format_double(env.vertices[v].x()) << ','
                       << detail::format_double(env.vertices[v].y()) << '\n';
        }
      }
    }
  }
  doc["envelopes"] = std::move(entries);
  EnvelopeOutputs outputs{out_dir / "envelopes.json", out_dir / "vertices.csv"};
  std::ofstream json_out(outputs.envelopes_json);
  if (!json_out) throw data_error("cannot open envelopes.json for writing");
  json_out << doc.dump(2) << '\n';
  return outputs;
}

//! reproduce: the scaled Monte Carlo protocol over every (coefficient set,
//! error model) cell, with a comparison report gated at the configured
//! tolerances.
struct ReproduceOutputs {
  std::filesystem::path report_csv;
  std::filesystem::path report_txt;
  std::filesystem::path effective_config;
  bool all_gates_passed = true;
};

namespace detail {

struct GateResult {
  std::string description;
  bool passed;
};

inline std::string format_metric(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", value);
  return buffer;
}

//! Reference coverage values for the gated cells (truth column of the
//! reproduction protocol).
inline const std::map<std::pair<std::string, double>, double>& reference_oracle_nu() {
  static const std::map<std::pair<std::string, double>, double> table = {
      {{"I", 0.05}, 0.740}, {{"I", 0.1}, 0.560}, {{"I", 0.2}, 0.298},
      {{"II", 0.05}, 0.790}, {{"II", 0.1}, 0.620}};
  return table;
}

}  // namespace detail

inline ReproduceOutputs cmd_reproduce(const RunConfig& config,
                                      const std::filesystem::path& out_dir,
                                      const std::string& variant = "table1") {
  if (variant != "table1") throw config_error("unknown reproduce variant: " + variant);
  detail::ensure_directory(out_dir);

  std::vector<SimReportRow> rows;
  int cell_index = 0;
  int total_excluded = 0;
  int total_initial_crossings = 0;
  int total_updated_crossings = 0;
  for (const CoeffSet coeff_set : {CoeffSet::kSmooth, CoeffSet::kRough}) {
    for (const ErrorModel error :
         {ErrorModel::kGaussian, ErrorModel::kStudentT3, ErrorModel::kChiSquared}) {
      SimConfig cell = config.sim;
      cell.coeff_set = coeff_set;
      cell.error = error;
      cell.seed = derive_seed(config.sim.seed, 2, cell_index++);
      const SimReport report =
          run_replications(cell, config.basis.build(), detail::ps_options_of(config),
                           config.threads);
      rows.insert(rows.end(), report.rows.begin(), report.rows.end());
      total_excluded += report.excluded;
      total_initial_crossings += report.initial_crossings;
      total_updated_crossings += report.updated_crossings;
    }
  }

  ReproduceOutputs outputs{out_dir / "report.csv", out_dir / "report.txt",
                           out_dir / "effective_config.json", true};

  std::ofstream csv(outputs.report_csv);
  if (!csv) throw data_error("cannot open report.csv for writing");
  csv << "coeff_set,error,tau,metric,truth,initial_mean,initial_sd,updated_mean,updated_sd\n";
  for (const auto& row : rows) {
    csv << to_string(row.coeff_set) << ',' << to_string(row.error) << ','
        << detail::format_double(row.tau) << ',' << row.metric << ','
        << detail::format_double(row.summary.truth) << ','
        << detail::format_double(row.summary.initial_mean) << ','
        << detail::format_double(row.summary.initial_sd) << ','
        << detail::format_double(row.summary.updated_mean) << ','
        << detail::format_double(row.summary.updated_sd) << '\n';
  }

  // Gates at the configured tolerances.
  std::vector<detail::GateResult> gates;
  const auto find_row = [&rows](CoeffSet cs, ErrorModel em, double tau,
                                const std::string& metric) -> const SimReportRow* {
    for (const auto& row : rows) {
      if (row.coeff_set == cs && row.error == em && row.metric == metric &&
          std::abs(row.tau - tau) < 1e-12) {
        return &row;
      }
    }
    return nullptr;
  };

  for (const auto& [key, reference] : detail::reference_oracle_nu()) {
    const ErrorModel em = detail::parse_error_model(key.first);
    const auto* row = find_row(CoeffSet::kSmooth, em, key.second, "nu");
    if (row == nullptr) continue;
    const bool ok = std::abs(row->summary.truth - reference) <= config.report.oracle_nu;
    gates.push_back({"oracle nu, error " + key.first + ", tau " +
                         detail::format_metric(key.second) + ": " +
                         detail::format_metric(row->summary.truth) + " vs " +
                         detail::format_metric(reference) + " +- " +
                         detail::format_metric(config.report.oracle_nu),
                     ok});
  }
  if (const auto* row = find_row(CoeffSet::kSmooth, ErrorModel::kGaussian, 0.05, "nu")) {
    gates.push_back({"initial nu (smooth, I, tau .05): " +
                         detail::format_metric(row->summary.initial_mean) + " vs 0.7420 +- " +
                         detail::format_metric(config.report.nu_initial),
                     std::abs(row->summary.initial_mean - 0.742) <= config.report.nu_initial});
    gates.push_back({"updated nu (smooth, I, tau .05): " +
                         detail::format_metric(row->summary.updated_mean) + " vs 0.7410 +- " +
                         detail::format_metric(config.report.nu_updated),
                     std::abs(row->summary.updated_mean - 0.741) <= config.report.nu_updated});
    gates.push_back({"sd shrink (smooth, I, tau .05): " +
                         detail::format_metric(row->summary.updated_sd) + " <= " +
                         detail::format_metric(row->summary.initial_sd),
                     row->summary.updated_sd <= row->summary.initial_sd});
  }
  if (const auto* row = find_row(CoeffSet::kSmooth, ErrorModel::kGaussian, 0.05, "kappa")) {
    gates.push_back({"kappa does not grow (smooth, I, tau .05): " +
                         detail::format_metric(row->summary.updated_mean) + " <= " +
                         detail::format_metric(row->summary.initial_mean),
                     row->summary.updated_mean <= row->summary.initial_mean});
  }

  std::ofstream txt(outputs.report_txt);
  if (!txt) throw data_error("cannot open report.txt for writing");
  txt << "Directional quantile envelope reproduction (" << config.sim.replications
      << " replications per cell)\n";
  txt << "coeff error  tau   metric   truth   initial          updated\n";
  for (const auto& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-6s %-5s %-5.2f %-8s %7.3f %7.3f (%5.3f) %7.3f (%5.3f)",
                  to_string(row.coeff_set).c_str(), to_string(row.error).c_str(), row.tau,
                  row.metric.c_str(), row.summary.truth, row.summary.initial_mean,
                  row.summary.initial_sd, row.summary.updated_mean, row.summary.updated_sd);
    txt << line << '\n';
  }
  txt << '\n';
  txt << "excluded replications: " << total_excluded << '\n';
  txt << "replications with crossing quantile levels (initial/updated): "
      << total_initial_crossings << '/' << total_updated_crossings << '\n';
  txt << '\n';
  for (const auto& gate : gates) {
    txt << (gate.passed ? "PASS" : "FAIL") << "  " << gate.description << '\n';
    outputs.all_gates_passed = outputs.all_gates_passed && gate.passed;
  }
  detail::write_effective_config(config, outputs.effective_config);
  return outputs;
}

}  // namespace dqr

#endif  // DQR_COMMANDS_HPP_
