#include "floodbench/metrics.hpp"

namespace floodbench {

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
}

int64_t ConfusionMatrix::row_sum(int g) const {
    int64_t t = 0;
    for (int p = 0; p < k; ++p) t += at(g, p);
    return t;
}

int64_t ConfusionMatrix::col_sum(int p) const {
    int64_t t = 0;
    for (int g = 0; g < k; ++g) t += at(g, p);
    return t;
}

ConfusionMatrix confusion(const std::vector<uint8_t>& labels,
                          const std::vector<uint8_t>& preds, int k) {
    if (labels.size() != preds.size())
        throw ShapeError("confusion: " + std::to_string(labels.size()) +
                         " labels vs " + std::to_string(preds.size()) +
                         " predictions");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k)
            throw DataError("confusion: ground-truth value " +
                            std::to_string(int(labels[i])) + " >= K=" +
                            std::to_string(k));
        if (preds[i] >= k)
            throw DataError("confusion: prediction value " +
                            std::to_string(int(preds[i])) + " >= K=" +
                            std::to_string(k));
        ++cm.at(labels[i], preds[i]);
    }
    return cm;
}

std::vector<uint8_t> binary_collapse(const std::vector<uint8_t>& map) {
    std::vector<uint8_t> out(map.size());
    for (size_t i = 0; i < map.size(); ++i) {
        if (map[i] > 3)
            throw DataError("binary_collapse: value " + std::to_string(int(map[i])) +
                            " outside the 4-class damage scale");
        out[i] = map[i] == 0 ? 0 : 1;
    }
    return out;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    const int64_t total = cm.total();
    if (total == 0) throw ContractError("compute_metrics on an empty matrix");

    MetricsReport r;
    r.k = cm.k;
    r.matrix = cm.counts;

    int64_t trace = 0;
    double f1_sum = 0.0;
    for (int c = 0; c < cm.k; ++c) {
        const int64_t tp = cm.at(c, c);
        const int64_t fp = cm.col_sum(c) - tp;
        const int64_t fn = cm.row_sum(c) - tp;
        trace += tp;
        ClassMetrics m;
        if (tp + fp > 0)
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        else
            m.precision_undefined = true;
        if (tp + fn > 0)
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        else
            m.recall_undefined = true;
        if (m.precision + m.recall > 0.0)
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        else
            m.f1_undefined = true;
        f1_sum += m.f1;
        r.per_class.push_back(m);
    }

    r.macro_f1 = f1_sum / static_cast<double>(cm.k);
    r.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);

    double pe = 0.0;
    const double denom = static_cast<double>(total) * static_cast<double>(total);
    for (int c = 0; c < cm.k; ++c)
        pe += static_cast<double>(cm.row_sum(c)) * static_cast<double>(cm.col_sum(c)) /
              denom;
    if (1.0 - pe < 1e-15) {
        // Both marginals fully concentrated: agreement is either perfect or
        // pure chance with no room for correction.
        r.kappa = r.overall_accuracy >= 1.0 ? 1.0 : 0.0;
    } else {
        r.kappa = (r.overall_accuracy - pe) / (1.0 - pe);
    }
    return r;
}

NormalizedMatrix normalize_rows(const ConfusionMatrix& cm) {
    NormalizedMatrix out;
    out.k = cm.k;
    out.rows.assign(static_cast<size_t>(cm.k) * cm.k, 0.0);
    out.zero_rows.assign(static_cast<size_t>(cm.k), false);
    for (int g = 0; g < cm.k; ++g) {
        const int64_t s = cm.row_sum(g);
        if (s == 0) {
            out.zero_rows[static_cast<size_t>(g)] = true;
            continue;
        }
        for (int p = 0; p < cm.k; ++p)
            out.rows[static_cast<size_t>(g * cm.k + p)] =
                static_cast<double>(cm.at(g, p)) / static_cast<double>(s);
    }
    return out;
}

}  // namespace floodbench
