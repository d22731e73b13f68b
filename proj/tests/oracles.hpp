// Brute-force reference implementations used to pin expected values in the
// tests. Everything here is written as plain nested loops in double precision
// with no shared code paths into the library under test.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracles {

// Zero-padded stride-1 cross correlation.
// input [B,Ci,H,W], kernel [Co,Ci,k,k], bias length Co (empty = no bias).
inline std::vector<double> conv2d(const std::vector<double>& input, int64_t B,
                                  int64_t Ci, int64_t H, int64_t W,
                                  const std::vector<double>& kernel, int64_t Co,
                                  int64_t k, const std::vector<double>& bias,
                                  int64_t pad) {
    const int64_t Ho = H + 2 * pad - k + 1;
    const int64_t Wo = W + 2 * pad - k + 1;
    std::vector<double> out(static_cast<size_t>(B * Co * Ho * Wo), 0.0);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t y = 0; y < Ho; ++y)
                for (int64_t x = 0; x < Wo; ++x) {
                    double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(co)];
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t dy = 0; dy < k; ++dy)
                            for (int64_t dx = 0; dx < k; ++dx) {
                                const int64_t sy = y + dy - pad;
                                const int64_t sx = x + dx - pad;
                                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                                acc += input[static_cast<size_t>(
                                           ((b * Ci + ci) * H + sy) * W + sx)] *
                                       kernel[static_cast<size_t>(
                                           ((co * Ci + ci) * k + dy) * k + dx)];
                            }
                    out[static_cast<size_t>(((b * Co + co) * Ho + y) * Wo + x)] = acc;
                }
    return out;
}

// 2x2 stride-2 max pooling of [B,C,H,W] with even H and W.
inline std::vector<double> max_pool2(const std::vector<double>& input, int64_t B,
                                     int64_t C, int64_t H, int64_t W) {
    const int64_t Ho = H / 2, Wo = W / 2;
    std::vector<double> out(static_cast<size_t>(B * C * Ho * Wo));
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < Ho; ++y)
                for (int64_t x = 0; x < Wo; ++x) {
                    double m = -1e300;
                    for (int64_t dy = 0; dy < 2; ++dy)
                        for (int64_t dx = 0; dx < 2; ++dx)
                            m = std::max(m, input[static_cast<size_t>(
                                                ((b * C + c) * H + 2 * y + dy) * W +
                                                2 * x + dx)]);
                    out[static_cast<size_t>(((b * C + c) * Ho + y) * Wo + x)] = m;
                }
    return out;
}

// Per-neuron spatial-inhibition attention over [B,C,H,W]: each value scaled
// by sigmoid(1/e) with e = 4(v + l)/((t-mu)^2 + 2v + 2l), mu and v the
// inclusive population mean and variance of the value's channel slice.
inline std::vector<double> inhibition_attention(const std::vector<double>& x,
                                                int64_t B, int64_t C, int64_t H,
                                                int64_t W, double lambda) {
    const int64_t n = H * W;
    std::vector<double> out(x.size());
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            const size_t base = static_cast<size_t>((b * C + c) * n);
            double mu = 0.0;
            for (int64_t i = 0; i < n; ++i) mu += x[base + static_cast<size_t>(i)];
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                const double d = x[base + static_cast<size_t>(i)] - mu;
                var += d * d;
            }
            var /= static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                const double t = x[base + static_cast<size_t>(i)];
                const double e =
                    4.0 * (var + lambda) / ((t - mu) * (t - mu) + 2.0 * var + 2.0 * lambda);
                out[base + static_cast<size_t>(i)] = t / (1.0 + std::exp(-1.0 / e));
            }
        }
    return out;
}

// Row-wise softmax of an [rows, cols] matrix.
inline std::vector<double> softmax_rows(const std::vector<double>& x, int64_t rows,
                                        int64_t cols) {
    std::vector<double> out(x.size());
    for (int64_t r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r * cols);
        double m = -1e300;
        for (int64_t c = 0; c < cols; ++c) m = std::max(m, x[base + static_cast<size_t>(c)]);
        double z = 0.0;
        for (int64_t c = 0; c < cols; ++c)
            z += std::exp(x[base + static_cast<size_t>(c)] - m);
        for (int64_t c = 0; c < cols; ++c)
            out[base + static_cast<size_t>(c)] =
                std::exp(x[base + static_cast<size_t>(c)] - m) / z;
    }
    return out;
}

// softmax(q k^T / sqrt(d)) v with q [n,d], k [m,d], v [m,d].
inline std::vector<double> scaled_attention(const std::vector<double>& q,
                                            const std::vector<double>& k,
                                            const std::vector<double>& v, int64_t n,
                                            int64_t m, int64_t d) {
    std::vector<double> scores(static_cast<size_t>(n * m));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < d; ++t)
                acc += q[static_cast<size_t>(i * d + t)] * k[static_cast<size_t>(j * d + t)];
            scores[static_cast<size_t>(i * m + j)] = acc * scale;
        }
    const std::vector<double> w = softmax_rows(scores, n, m);
    std::vector<double> out(static_cast<size_t>(n * d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < d; ++t) {
            double acc = 0.0;
            for (int64_t j = 0; j < m; ++j)
                acc += w[static_cast<size_t>(i * m + j)] * v[static_cast<size_t>(j * d + t)];
            out[static_cast<size_t>(i * d + t)] = acc;
        }
    return out;
}

// Weighted cross entropy over probabilities [B,4,H,W] with row-major labels.
inline double weighted_ce(const std::vector<double>& probs, int64_t B, int64_t H,
                          int64_t W, const std::vector<uint8_t>& labels,
                          const std::array<double, 4>& w) {
    double acc = 0.0;
    const int64_t n = H * W;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < n; ++i) {
            const int y = labels[static_cast<size_t>(b * n + i)];
            const double p =
                std::max(probs[static_cast<size_t>((b * 4 + y) * n + i)], 1e-12);
            acc -= w[static_cast<size_t>(y)] * std::log(p);
        }
    return acc / static_cast<double>(B * n);
}

// Mean per-pixel entropy of probabilities [B,4,H,W].
inline double mean_entropy(const std::vector<double>& probs, int64_t B, int64_t H,
                           int64_t W) {
    double acc = 0.0;
    const int64_t n = H * W;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < n; ++i)
            for (int64_t c = 0; c < 4; ++c) {
                const double p = probs[static_cast<size_t>((b * 4 + c) * n + i)];
                if (p > 0.0) acc -= p * std::log(p);
            }
    return acc / static_cast<double>(B * n);
}

// KL(p || q) after epsilon smoothing and renormalization of both inputs.
inline double smoothed_kl(const std::array<double, 4>& p,
                          const std::array<double, 4>& q, double eps = 1e-8) {
    std::array<double, 4> ps{}, qs{};
    double zp = 0.0, zq = 0.0;
    for (int c = 0; c < 4; ++c) {
        ps[static_cast<size_t>(c)] = p[static_cast<size_t>(c)] + eps;
        qs[static_cast<size_t>(c)] = q[static_cast<size_t>(c)] + eps;
        zp += ps[static_cast<size_t>(c)];
        zq += qs[static_cast<size_t>(c)];
    }
    double acc = 0.0;
    for (int c = 0; c < 4; ++c)
        acc += ps[static_cast<size_t>(c)] / zp *
               std::log((ps[static_cast<size_t>(c)] / zp) / (qs[static_cast<size_t>(c)] / zq));
    return acc;
}

// Counting-based classification report over label/prediction pairs.
struct ClassCounts {
    int64_t tp = 0, fp = 0, fn = 0;
};

struct Report {
    std::vector<double> precision, recall, f1;
    double macro_f1 = 0.0, overall_accuracy = 0.0, kappa = 0.0;
};

inline Report count_report(const std::vector<uint8_t>& labels,
                           const std::vector<uint8_t>& preds, int k) {
    std::vector<ClassCounts> c(static_cast<size_t>(k));
    int64_t agree = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const int g = labels[i], p = preds[i];
        if (g == p) {
            ++agree;
            ++c[static_cast<size_t>(g)].tp;
        } else {
            ++c[static_cast<size_t>(p)].fp;
            ++c[static_cast<size_t>(g)].fn;
        }
    }
    const auto total = static_cast<double>(labels.size());
    Report r;
    for (int cls = 0; cls < k; ++cls) {
        const ClassCounts& cc = c[static_cast<size_t>(cls)];
        const double prec =
            cc.tp + cc.fp > 0 ? static_cast<double>(cc.tp) / static_cast<double>(cc.tp + cc.fp) : 0.0;
        const double rec =
            cc.tp + cc.fn > 0 ? static_cast<double>(cc.tp) / static_cast<double>(cc.tp + cc.fn) : 0.0;
        const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        r.precision.push_back(prec);
        r.recall.push_back(rec);
        r.f1.push_back(f1);
        r.macro_f1 += f1 / static_cast<double>(k);
    }
    r.overall_accuracy = static_cast<double>(agree) / total;
    double pe = 0.0;
    for (int cls = 0; cls < k; ++cls) {
        const ClassCounts& cc = c[static_cast<size_t>(cls)];
        const double row = static_cast<double>(cc.tp + cc.fn);
        const double col = static_cast<double>(cc.tp + cc.fp);
        pe += row * col / (total * total);
    }
    if (1.0 - pe < 1e-15)
        r.kappa = r.overall_accuracy >= 1.0 ? 1.0 : 0.0;
    else
        r.kappa = (r.overall_accuracy - pe) / (1.0 - pe);
    return r;
}

}  // namespace oracles
