#pragma once

#include <optional>
#include <string>

#include "mtreg/synthetic.hpp"
#include "mtreg/types.hpp"

namespace mtreg {

/// Rows of an estimate whose Euclidean norm exceeds this fraction of the
/// largest row norm count as selected when support metrics are computed.
inline constexpr double kSupportRowTol = 1e-6;

/// || Bhat - Bbar ||_F / || Bbar ||_F over the stacked m x d coefficient
/// matrices. Throws std::invalid_argument on shape mismatch or zero truth.
double normalized_l2_error(const CoefficientSet& estimate,
                           const GroundTruth& truth);

/// Mean over tasks of the per-task normalized errors; secondary reading of
/// the same metric, reported alongside the stacked one.
double per_task_normalized_l2_error(const CoefficientSet& estimate,
                                    const GroundTruth& truth);

/// Joint support of an estimate: feature j is selected when its across-task
/// coefficient row has norm > kSupportRowTol * max row norm.
std::vector<Index> joint_support(const CoefficientSet& estimate);

/// Hamming distance in [0, d] between the estimated joint-support indicator
/// and the true shared-support indicator.
Index hamming_support_distance(const CoefficientSet& estimate,
                               const GroundTruth& truth);

/// One aggregated results row.
struct MetricsRow {
  std::string method;
  int k = 0;
  double normalized_l2_mean = 0.0;
  double normalized_l2_std = 0.0;
  double per_task_l2_mean = 0.0;
  double hamming_mean = 0.0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  int runs = 0;
  int failures = 0;
};

/// Mean and unbiased standard deviation (0 when fewer than two values).
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd aggregate(const std::vector<double>& values);

}  // namespace mtreg
