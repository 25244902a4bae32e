#include "mtreg/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mtreg/linalg.hpp"

namespace mtreg {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

Matrix from_row_major(const std::vector<double>& values, Index d) {
  if (static_cast<Index>(values.size()) != d * d) {
    throw std::runtime_error("covariance JSON: matrix length is not d*d");
  }
  Matrix m(d, d);
  std::size_t at = 0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = values[at++];
  }
  return m;
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

TaskData load_task_csv(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw std::runtime_error("cannot open CSV file: " + path.string());
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw std::runtime_error("empty CSV file: " + path.string());
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "y") {
    throw std::runtime_error("CSV header must end with column 'y': " +
                             path.string());
  }
  const Index d = static_cast<Index>(header.size()) - 1;
  for (Index j = 0; j < d; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw std::runtime_error("CSV header column " + std::to_string(j) +
                               " must be named f" + std::to_string(j) + ": " +
                               path.string());
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != d + 1) {
      throw std::runtime_error(
          path.string() + ":" + std::to_string(line_no) + ": expected " +
          std::to_string(d + 1) + " fields, found " +
          std::to_string(fields.size()));
    }
    std::vector<double> row(d + 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      try {
        row[i] = std::stod(fields[i]);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": cannot parse '" + fields[i] +
                                 "' as a number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error("CSV file has no data rows: " + path.string());
  }
  TaskData task;
  task.design.resize(static_cast<Index>(rows.size()), d);
  task.response.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < d; ++j) task.design(static_cast<Index>(i), j) = rows[i][j];
    task.response[static_cast<Index>(i)] = rows[i][d];
  }
  return task;
}

}  // namespace

MultiTaskDataset load_dataset_manifest(
    const std::filesystem::path& manifest_path) {
  std::ifstream file(manifest_path);
  if (!file) {
    throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  }
  json manifest;
  try {
    file >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + manifest_path.string() +
                             ": " + e.what());
  }
  if (!manifest.contains("tasks") || !manifest["tasks"].is_array() ||
      manifest["tasks"].empty()) {
    throw std::runtime_error("manifest " + manifest_path.string() +
                             " must list a non-empty 'tasks' array");
  }
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<TaskData> tasks;
  for (const json& entry : manifest["tasks"]) {
    std::string csv;
    if (entry.is_string()) {
      csv = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("csv")) {
      csv = entry["csv"].get<std::string>();
    } else {
      throw std::runtime_error("manifest " + manifest_path.string() +
                               ": task entries must be CSV paths");
    }
    std::filesystem::path path(csv);
    if (path.is_relative()) path = base / path;
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("manifest " + manifest_path.string() +
                               " references missing CSV file: " + path.string());
    }
    tasks.push_back(load_task_csv(path));
  }
  MultiTaskDataset dataset = make_dataset(std::move(tasks));
  const auto report = validate_dataset(dataset);
  if (!report.empty()) {
    throw std::runtime_error("manifest " + manifest_path.string() +
                             " yields an invalid dataset: " + report.front());
  }
  return dataset;
}

std::filesystem::path save_dataset(const MultiTaskDataset& dataset,
                                   const std::filesystem::path& directory,
                                   const std::string& name) {
  std::filesystem::create_directories(directory);
  json manifest;
  manifest["name"] = name;
  manifest["tasks"] = json::array();
  for (Index l = 0; l < dataset.num_tasks(); ++l) {
    const std::string csv_name = "task" + std::to_string(l) + ".csv";
    std::ofstream csv(directory / csv_name);
    for (Index j = 0; j < dataset.dimension; ++j) csv << "f" << j << ",";
    csv << "y\n";
    csv.precision(17);
    const TaskData& task = dataset.tasks[l];
    for (Index i = 0; i < task.design.rows(); ++i) {
      for (Index j = 0; j < dataset.dimension; ++j) csv << task.design(i, j) << ",";
      csv << task.response[i] << "\n";
    }
    manifest["tasks"].push_back(csv_name);
  }
  const std::filesystem::path manifest_path = directory / (name + ".json");
  std::ofstream out(manifest_path);
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

std::string covariance_to_json(const CovarianceEstimate& estimate,
                               const SolveTrace& trace) {
  json out;
  out["d"] = covariance_dim(estimate);
  if (const auto* diag = std::get_if<DiagonalCovariance>(&estimate)) {
    out["structure"] = "diagonal";
    out["omega"] = to_std(diag->omega());
  } else if (const auto* full = std::get_if<FullCovariance>(&estimate)) {
    out["structure"] = "full";
    out["matrix"] = row_major(full->matrix());
  } else {
    const auto& decomp = std::get<DiagPlusLowRank>(estimate);
    out["structure"] = "diag_lowrank";
    out["omega"] = to_std(decomp.sparse_part.omega());
    out["matrix"] = row_major(decomp.lowrank_part.matrix());
    out["rank_estimate"] = decomp.rank_estimate;
  }
  out["iterations"] = trace.iterations;
  out["converged"] = trace.converged;
  out["final_objective"] = trace.final_objective();
  return out.dump(2);
}

CovarianceEstimate covariance_from_json(const std::string& text) {
  json in = json::parse(text);
  const Index d = in.at("d").get<Index>();
  const std::string structure = in.at("structure").get<std::string>();
  if (structure == "diagonal") {
    const auto omega = in.at("omega").get<std::vector<double>>();
    if (static_cast<Index>(omega.size()) != d) {
      throw std::runtime_error("covariance JSON: omega length is not d");
    }
    return DiagonalCovariance(Eigen::Map<const Vector>(omega.data(), d));
  }
  if (structure == "full") {
    return FullCovariance(
        from_row_major(in.at("matrix").get<std::vector<double>>(), d));
  }
  if (structure == "diag_lowrank") {
    const auto omega = in.at("omega").get<std::vector<double>>();
    if (static_cast<Index>(omega.size()) != d) {
      throw std::runtime_error("covariance JSON: omega length is not d");
    }
    DiagPlusLowRank decomp;
    decomp.sparse_part =
        DiagonalCovariance(Eigen::Map<const Vector>(omega.data(), d));
    decomp.lowrank_part = FullCovariance(
        from_row_major(in.at("matrix").get<std::vector<double>>(), d));
    decomp.rank_estimate = in.value("rank_estimate", Index{0});
    return decomp;
  }
  throw std::runtime_error("covariance JSON: unknown structure '" + structure +
                           "'");
}

std::string coefficients_to_json(const CoefficientSet& coefficients) {
  json out;
  out["m"] = coefficients.num_tasks();
  out["d"] = coefficients.dim();
  out["betas"] = json::array();
  for (const Vector& beta : coefficients.betas) {
    out["betas"].push_back(to_std(beta));
  }
  out["support"] = coefficients.support;
  return out.dump(2);
}

CoefficientSet coefficients_from_json(const std::string& text) {
  json in = json::parse(text);
  const Index m = in.at("m").get<Index>();
  const Index d = in.at("d").get<Index>();
  const json& betas = in.at("betas");
  if (static_cast<Index>(betas.size()) != m) {
    throw std::runtime_error("coefficient JSON: betas length is not m");
  }
  std::vector<Vector> vectors;
  vectors.reserve(m);
  for (const json& row : betas) {
    const auto values = row.get<std::vector<double>>();
    if (static_cast<Index>(values.size()) != d) {
      throw std::runtime_error("coefficient JSON: beta length is not d");
    }
    vectors.push_back(Eigen::Map<const Vector>(values.data(), d));
  }
  return make_coefficient_set(std::move(vectors));
}

CoefficientSet load_coefficients(const std::filesystem::path& path) {
  return coefficients_from_json(read_text_file(path));
}

std::string bound_report_to_json(const BoundReport& report) {
  json out;
  out["mismatch_omega"] = report.mismatch_omega;
  out["lower"] = report.lower;
  out["upper"] = report.upper;
  out["optimal_term"] = report.optimal_term;
  out["mc_error_estimate"] = report.mc_error_estimate;
  out["mc_stderr"] = report.mc_stderr;
  out["simplified_upper"] = report.simplified_upper;
  out["mc_trials"] = report.mc_trials;
  out["sandwich_ok"] = report.sandwich_ok;
  out["simplified_ok"] = report.simplified_ok;
  return out.dump(2);
}

std::string coherence_report_to_json(const CoherenceReport& report) {
  json out;
  out["theta"] = report.theta;
  out["x_max_sq"] = report.x_max_sq;
  out["rho_min_t"] = report.rho_min_t;
  out["rho_max_gram"] = report.rho_max_gram;
  out["s"] = report.s;
  out["rho_min_exact"] = report.rho_min_exact;
  out["condition_ok"] = report.condition_ok;
  return out.dump(2);
}

std::string identifiability_report_to_json(
    const IdentifiabilityReport& report) {
  json out;
  out["alpha"] = report.alpha;
  out["beta"] = report.beta;
  out["product"] = report.product;
  out["rank"] = report.rank;
  out["identifiable"] = report.identifiable;
  return out.dump(2);
}

std::string consistency_sweep_to_json(
    const std::vector<ConsistencySweepRow>& rows) {
  json out = json::array();
  for (const ConsistencySweepRow& row : rows) {
    json entry;
    entry["m"] = row.m;
    entry["median_discrepancy"] = row.median_discrepancy;
    entry["per_seed"] = row.per_seed;
    out.push_back(entry);
  }
  return out.dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::stringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream file(path);
  if (!file) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  file << text;
}

}  // namespace mtreg
