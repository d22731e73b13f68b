#pragma once

#include <string>
#include <vector>

namespace floodbench {

struct GradCheckResult {
    std::string name;
    double worst_rel = 0.0;  // worst relative error among non-negligible entries
    double tolerance = 0.0;
    int64_t checked = 0;  // gradient entries compared
    bool passed = false;
};

// Finite-difference checks for every differentiable op on random small
// inputs (64-bit, central differences).
std::vector<GradCheckResult> run_op_checks();

// Whole-model check: all parameter tensors of a tiny model probed against
// central differences through forward + softmax + cross-entropy.
GradCheckResult check_model_end_to_end(const std::string& kind);

// Op checks plus SPAUNet and BIT end-to-end.
std::vector<GradCheckResult> run_full_suite();

bool all_passed(const std::vector<GradCheckResult>& results);

// One line per result: name, worst rel-err, tolerance, entry count, verdict.
std::string format_report(const std::vector<GradCheckResult>& results);

}  // namespace floodbench
