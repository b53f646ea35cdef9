#pragma once

#include <span>

namespace tabplus {

/// Area under the ROC curve via the rank-sum statistic with average ranks
/// for tied scores: P(s+ > s-) + 0.5 P(s+ = s-). Labels are 0/1.
/// Throws std::invalid_argument if only one class is present, the spans
/// differ in length, or a score is NaN.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace tabplus
