#pragma once

#include <cstdint>
#include <vector>

#include "convemo/data.hpp"

namespace convemo {

struct MetricsReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred] counts
  double shift_f1 = -1.0;  // training diagnostic; negative when not computed
};

MetricsReport compute_metrics(const std::vector<int>& gold,
                              const std::vector<int>& pred,
                              std::size_t n_classes);

/// Binary F1 over all ordered pairs pooled across dialogues; positive class
/// is shift (1). Prediction matrices are flat row-major like ShiftLabelMatrix.
double shift_f1(const std::vector<ShiftLabelMatrix>& gold,
                const std::vector<std::vector<std::uint8_t>>& pred);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace convemo
