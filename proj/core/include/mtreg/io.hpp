#pragma once

#include <filesystem>
#include <string>

#include "mtreg/covariance.hpp"
#include "mtreg/theory.hpp"
#include "mtreg/types.hpp"

namespace mtreg {

/// Loads a dataset from a JSON manifest listing per-task CSV files. Relative
/// CSV paths resolve against the manifest's directory. Each CSV carries a
/// header row naming d feature columns f0..f{d-1} plus a final column y;
/// values are parsed as 64-bit floats. Throws std::runtime_error with a
/// message naming the offending file on any malformed input.
MultiTaskDataset load_dataset_manifest(const std::filesystem::path& manifest_path);

/// Writes a dataset as per-task CSV files plus a manifest under `directory`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const MultiTaskDataset& dataset,
                                   const std::filesystem::path& directory,
                                   const std::string& name);

/// JSON wire format for covariance estimates:
///   {"structure": "diagonal"|"full"|"diag_lowrank", "d": int,
///    "omega": [...] and/or "matrix": row-major [...],
///    "iterations": int, "converged": bool, "final_objective": double}
std::string covariance_to_json(const CovarianceEstimate& estimate,
                               const SolveTrace& trace);
CovarianceEstimate covariance_from_json(const std::string& text);

/// JSON wire format for coefficient sets:
///   {"m": int, "d": int, "betas": [[...], ...], "support": [...]}
std::string coefficients_to_json(const CoefficientSet& coefficients);
CoefficientSet coefficients_from_json(const std::string& text);
CoefficientSet load_coefficients(const std::filesystem::path& path);

std::string bound_report_to_json(const BoundReport& report);
std::string coherence_report_to_json(const CoherenceReport& report);
std::string identifiability_report_to_json(const IdentifiabilityReport& report);
std::string consistency_sweep_to_json(const std::vector<ConsistencySweepRow>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mtreg
