#ifndef DQR_IO_HPP_
#define DQR_IO_HPP_

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqr/dataset.hpp"
#include "dqr/envelope.hpp"
#include "dqr/errors.hpp"
#include "dqr/ps.hpp"
#include "dqr/spline_basis.hpp"

namespace dqr {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_double(const std::string& text, int line_number) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw data_error("line " + std::to_string(line_number) + ": cannot parse number '" + text +
                     "'");
  }
}

}  // namespace detail

//! Writes a dataset in the interchange schema
//! `subject_id,t,y1,y2,x1,...,xp`, one row per (subject, grid point).
inline void write_dataset_csv(const std::filesystem::path& path, const FunctionalDataset& data) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out << "subject_id,t,y1,y2";
  for (int k = 1; k <= data.covariate_count(); ++k) out << ",x" << k;
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.grid_size(); ++j) {
      out << i << ',' << detail::format_double(data.t_grid[j]) << ','
          << detail::format_double(data.y1(i, j)) << ',' << detail::format_double(data.y2(i, j));
      for (int k = 0; k < data.covariate_count(); ++k) {
        out << ',' << detail::format_double(data.covariates(i, k));
      }
      out << '\n';
    }
  }
}

//! Reads the dataset schema back. Subjects may appear in any order but each
//! must cover the identical grid; rows with missing or malformed values are
//! rejected with their line number.
inline FunctionalDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty dataset file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 5 || header[0] != "subject_id" || header[1] != "t" || header[2] != "y1" ||
      header[3] != "y2") {
    throw data_error("header must start with subject_id,t,y1,y2,x1,...");
  }
  const int p = static_cast<int>(header.size()) - 4;
  for (int k = 0; k < p; ++k) {
    if (header[4 + k] != "x" + std::to_string(k + 1)) {
      throw data_error("covariate columns must be named x1..xp in order");
    }
  }

  struct SubjectRows {
    std::vector<double> t, y1, y2;
    std::vector<double> covariates;  // first row's values
    bool covariates_set = false;
  };
  std::map<std::string, SubjectRows> subjects;
  std::vector<std::string> order;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<int>(fields.size()) != 4 + p) {
      throw data_error("line " + std::to_string(line_number) + ": expected " +
                       std::to_string(4 + p) + " fields, found " + std::to_string(fields.size()));
    }
    for (const auto& field : fields) {
      if (field.empty()) {
        throw data_error("line " + std::to_string(line_number) + ": missing value");
      }
    }
    auto [it, inserted] = subjects.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    SubjectRows& rows = it->second;
    rows.t.push_back(detail::parse_double(fields[1], line_number));
    rows.y1.push_back(detail::parse_double(fields[2], line_number));
    rows.y2.push_back(detail::parse_double(fields[3], line_number));
    if (!rows.covariates_set) {
      for (int k = 0; k < p; ++k) {
        rows.covariates.push_back(detail::parse_double(fields[4 + k], line_number));
      }
      rows.covariates_set = true;
    }
  }
  if (order.empty()) throw data_error("dataset has no rows");

  const auto& first = subjects[order.front()];
  const int J = static_cast<int>(first.t.size());
  FunctionalDataset data;
  data.t_grid = Eigen::Map<const Eigen::VectorXd>(first.t.data(), J);
  data.y1.resize(static_cast<int>(order.size()), J);
  data.y2.resize(static_cast<int>(order.size()), J);
  data.covariates.resize(static_cast<int>(order.size()), p);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& rows = subjects[order[i]];
    if (static_cast<int>(rows.t.size()) != J) {
      throw data_error("subject " + order[i] + " has " + std::to_string(rows.t.size()) +
                       " rows; expected " + std::to_string(J));
    }
    for (int j = 0; j < J; ++j) {
      if (rows.t[j] != first.t[j]) {
        throw data_error("subject " + order[i] + ": grid differs from the first subject");
      }
      data.y1(static_cast<int>(i), j) = rows.y1[j];
      data.y2(static_cast<int>(i), j) = rows.y2[j];
    }
    for (int k = 0; k < p; ++k) data.covariates(static_cast<int>(i), k) = rows.covariates[k];
  }
  data.validate();
  return data;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

}  // namespace detail

//! One fitted quantile level inside a saved coefficient-field file.
struct FieldFit {
  double tau = 0.0;
  double lambda = 0.0;
  CoefficientField initial;
  CoefficientField updated;
  std::vector<StageEvent> trace;
};

//! On-disk model artifact: basis spec, direction count, covariate count and
//! the per-tau initial/updated coefficient fields.
struct FieldFile {
  int degree = 3;
  std::vector<double> interior_knots;
  int directions = 100;
  int covariates = 3;
  std::vector<FieldFit> fits;
  nlohmann::json effective_config;

  SplineBasis basis() const { return SplineBasis(degree, interior_knots); }
  DirectionGrid grid() const { return DirectionGrid(directions); }
};

inline void save_field(const std::filesystem::path& path, const FieldFile& field) {
  nlohmann::json doc;
  doc["format_version"] = kFormatVersion;
  doc["effective_config"] = field.effective_config;
  doc["basis"] = {{"degree", field.degree}, {"interior_knots", field.interior_knots}};
  doc["grid"] = {{"d", field.directions}};
  doc["p"] = field.covariates;
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& fit : field.fits) {
    nlohmann::json entry;
    entry["tau"] = fit.tau;
    entry["lambda"] = fit.lambda;
    entry["initial"] = {{"coefficients", detail::matrix_to_json(fit.initial.coefficients)},
                        {"variances", detail::matrix_to_json(fit.initial.variances)}};
    nlohmann::json frozen = nlohmann::json::array();
    for (char f : fit.updated.frozen) frozen.push_back(f != 0);
    entry["updated"] = {{"coefficients", detail::matrix_to_json(fit.updated.coefficients)},
                        {"variances", detail::matrix_to_json(fit.updated.variances)},
                        {"stage", fit.updated.stage},
                        {"frozen", frozen}};
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& event : fit.trace) {
      trace.push_back({{"stage", event.stage},
                       {"direction", event.direction},
                       {"frozen", event.frozen},
                       {"max_statistic", event.max_statistic}});
    }
    entry["trace"] = std::move(trace);
    fits.push_back(std::move(entry));
  }
  doc["fits"] = std::move(fits);
  std::ofstream out(path);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

inline FieldFile load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error("field file parse error: " + std::string(e.what()));
  }
  if (doc.value("format_version", -1) != kFormatVersion) {
    throw data_error("unsupported field file format version");
  }
  FieldFile field;
  field.effective_config = doc.value("effective_config", nlohmann::json::object());
  field.degree = doc.at("basis").at("degree").get<int>();
  field.interior_knots = doc.at("basis").at("interior_knots").get<std::vector<double>>();
  field.directions = doc.at("grid").at("d").get<int>();
  field.covariates = doc.at("p").get<int>();
  for (const auto& entry : doc.at("fits")) {
    FieldFit fit;
    fit.tau = entry.at("tau").get<double>();
    fit.lambda = entry.at("lambda").get<double>();
    const DirectionGrid grid(field.directions);
    for (CoefficientField* target : {&fit.initial, &fit.updated}) {
      target->grid = grid;
      target->tau = fit.tau;
      target->lambda = fit.lambda;
    }
    fit.initial.coefficients = detail::matrix_from_json(entry.at("initial").at("coefficients"));
    fit.initial.variances = detail::matrix_from_json(entry.at("initial").at("variances"));
    fit.initial.frozen.assign(field.directions, 0);
    fit.updated.coefficients = detail::matrix_from_json(entry.at("updated").at("coefficients"));
    fit.updated.variances = detail::matrix_from_json(entry.at("updated").at("variances"));
    fit.updated.stage = entry.at("updated").at("stage").get<int>();
    fit.updated.frozen.clear();
    for (const auto& f : entry.at("updated").at("frozen")) {
      fit.updated.frozen.push_back(f.get<bool>() ? 1 : 0);
    }
    for (const auto& event : entry.at("trace")) {
      fit.trace.push_back({event.at("stage").get<int>(), event.at("direction").get<int>(),
                           event.at("frozen").get<bool>(),
                           event.at("max_statistic").get<double>()});
    }
    field.fits.push_back(std::move(fit));
  }
  return field;
}

//! Multistage trace as CSV: stage,direction_index,frozen,max_component_statistic.
inline void write_trace_csv(const std::filesystem::path& path, const FieldFit& fit) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");
  out << "stage,direction_index,frozen,max_component_statistic\n";
  for (const auto& event : fit.trace) {
    out << event.stage << ',' << event.direction << ',' << (event.frozen ? 1 : 0) << ','
        << detail::format_double(event.max_statistic) << '\n';
  }
}

//! Envelope export entry: {tau, t, x, q[], vertices[][2], empty}.
inline nlohmann::json envelope_to_json(const Envelope& env, const std::string& stage) {
  nlohmann::json entry;
  entry["tau"] = env.tau;
  entry["t"] = env.t;
  entry["stage"] = stage;
  nlohmann::json x = nlohmann::json::array();
  for (Eigen::Index k = 0; k < env.x.size(); ++k) x.push_back(env.x[k]);
  entry["x"] = std::move(x);
  nlohmann::json q = nlohmann::json::array();
  for (Eigen::Index r = 0; r < env.q.size(); ++r) q.push_back(env.q[r]);
  entry["q"] = std::move(q);
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : env.vertices) vertices.push_back({v.x(), v.y()});
  entry["vertices"] = std::move(vertices);
  entry["empty"] = env.empty;
  return entry;
}

}  // namespace dqr

#endif  // DQR_IO_HPP_
