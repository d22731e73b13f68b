#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floodbench/common.hpp"

namespace floodbench {

// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
    explicit ConfusionMatrix(int k_) : k(k_), counts(static_cast<size_t>(k_) * k_, 0) {
        if (k_ != 2 && k_ != 4)
            throw ContractError("confusion matrix supports K in {2,4}, got " +
                                std::to_string(k_));
    }
    int64_t& at(int g, int p) { return counts[static_cast<size_t>(g * k + p)]; }
    int64_t at(int g, int p) const { return counts[static_cast<size_t>(g * k + p)]; }
    int64_t total() const;
    int64_t row_sum(int g) const;
    int64_t col_sum(int p) const;

    int k;
    std::vector<int64_t> counts;
};

ConfusionMatrix confusion(const std::vector<uint8_t>& labels,
                          const std::vector<uint8_t>& preds, int k);

// 0 stays 0; {1,2,3} map to 1 (damaged).
std::vector<uint8_t> binary_collapse(const std::vector<uint8_t>& map);

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    // Set when the corresponding denominator was zero (rate reported as 0).
    bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

struct MetricsReport {
    int k = 0;
    std::vector<ClassMetrics> per_class;
    double macro_f1 = 0.0;
    double overall_accuracy = 0.0;
    double kappa = 0.0;
    std::vector<int64_t> matrix;  // k*k row-major copy of the source counts
};

// One-vs-rest per-class rates, unweighted macro-F1, overall accuracy, and
// chance-corrected kappa with expected agreement from the marginal products.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

struct NormalizedMatrix {
    int k = 0;
    std::vector<double> rows;      // k*k, each nonzero row sums to 1
    std::vector<bool> zero_rows;   // flagged rows are emitted as zeros
};

NormalizedMatrix normalize_rows(const ConfusionMatrix& cm);

}  // namespace floodbench
