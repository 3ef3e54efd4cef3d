#pragma once

// Text tables and confusion-matrix images rendered from report JSON only.

#include "hypermml/trainer.hpp"

#include <string>
#include <utility>
#include <vector>

namespace hypermml {

// Subject | Acc | F1 with percentages, followed by the per-subject average.
// `columns` side-by-side column groups (1 gives a plain list).
std::string format_subject_table(const std::vector<SubjectRow>& rows, int columns = 1);

// Unweighted mean of the per-subject accuracy and F1.
std::pair<double, double> subject_average(const std::vector<SubjectRow>& rows);

// Variant | Acc | F1.
std::string format_ablation_table(const AblationReport& report);

// Rows are true classes, columns predicted; cells shaded by row-normalized rate.
std::string confusion_svg(const EvalReport& report);

}  // namespace hypermml
