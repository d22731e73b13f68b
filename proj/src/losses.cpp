#include "floodbench/losses.hpp"

#include <algorithm>
#include <cmath>

namespace floodbench {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kKlEps = 1e-8;

void check_weights(const ClassWeights& weights) {
    for (double v : weights.w)
        if (!(v > 0.0)) throw ContractError("class weights must all be positive");
}

template <typename S>
void check_probmap(const Tensor<S>& probs, const char* op) {
    if (probs.rank() != 4 || probs.dim(1) != 4)
        throw ShapeError(std::string(op) + " expects probabilities [B,4,H,W], got " +
                         shape_str(probs.shape()));
}

std::array<double, 4> smooth(const std::array<double, 4>& p) {
    double s = 0.0;
    std::array<double, 4> out;
    for (int c = 0; c < 4; ++c) {
        out[static_cast<size_t>(c)] = p[static_cast<size_t>(c)] + kKlEps;
        s += out[static_cast<size_t>(c)];
    }
    for (double& v : out) v /= s;
    return out;
}

void check_normalized(const std::array<double, 4>& p, const char* op) {
    double s = 0.0;
    for (double v : p) {
        if (v < 0.0)
            throw ContractError(std::string(op) + ": negative distribution entry");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-6)
        throw ContractError(std::string(op) + ": distribution sums to " +
                            std::to_string(s) + ", expected 1");
}

}  // namespace

ClassWeights inverse_frequency_weights(const std::array<int64_t, 4>& counts) {
    int64_t total = 0;
    for (int64_t c : counts) {
        if (c < 0) throw ContractError("negative class count");
        total += c;
    }
    if (total == 0) throw ContractError("inverse_frequency_weights on empty counts");
    std::array<double, 4> raw;
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) {
        const int64_t m = std::max<int64_t>(counts[static_cast<size_t>(c)], 1);
        raw[static_cast<size_t>(c)] = static_cast<double>(total) / static_cast<double>(m);
        sum += raw[static_cast<size_t>(c)];
    }
    ClassWeights out;
    for (int c = 0; c < 4; ++c) out.w[static_cast<size_t>(c)] = raw[static_cast<size_t>(c)] * 4.0 / sum;
    return out;
}

template <typename S>
Tensor<S> weighted_cross_entropy(Tape<S>& tape, const Tensor<S>& probs,
                                 const std::vector<uint8_t>& labels,
                                 const ClassWeights& weights) {
    check_probmap(probs, "weighted_cross_entropy");
    check_weights(weights);
    const int64_t B = probs.dim(0), H = probs.dim(2), W = probs.dim(3);
    const int64_t HW = H * W, M = B * HW;
    if (static_cast<int64_t>(labels.size()) != M)
        throw ShapeError("weighted_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(M) + " pixels");
    for (uint8_t y : labels)
        if (y > 3)
            throw DataError("label value " + std::to_string(int(y)) +
                            " outside the 4-class damage scale");

    Tensor<S> out = Tensor<S>::zeros({1}, probs.requires_grad() && tape.recording());
    const S* p = probs.value().data();
    double acc = 0.0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < HW; ++i) {
            const uint8_t y = labels[static_cast<size_t>(b * HW + i)];
            const double pv = std::max<double>(
                static_cast<double>(p[(b * 4 + y) * HW + i]), kProbFloor);
            acc -= weights.w[y] * std::log(pv);
        }
    out.value()[0] = static_cast<S>(acc / static_cast<double>(M));
    check_finite("weighted_cross_entropy", out.value());

    if (out.requires_grad())
        tape.record("weighted_cross_entropy", [=]() {
            const S g = out.grad()[0];
            std::vector<S>& dp = probs.node()->grad;
            const std::vector<S>& pv = probs.value();
            for (int64_t b = 0; b < B; ++b)
                for (int64_t i = 0; i < HW; ++i) {
                    const uint8_t y = labels[static_cast<size_t>(b * HW + i)];
                    const size_t u = static_cast<size_t>((b * 4 + y) * HW + i);
                    const double v = static_cast<double>(pv[u]);
                    if (v >= kProbFloor)
                        dp[u] -= static_cast<S>(static_cast<double>(g) * weights.w[y] /
                                                (v * static_cast<double>(M)));
                }
        });
    return out;
}

template <typename S>
Tensor<S> entropy_loss(Tape<S>& tape, const Tensor<S>& probs) {
    check_probmap(probs, "entropy_loss");
    const int64_t B = probs.dim(0), HW = probs.dim(2) * probs.dim(3);
    const int64_t N = B * HW;
    Tensor<S> out = Tensor<S>::zeros({1}, probs.requires_grad() && tape.recording());
    const S* p = probs.value().data();
    double acc = 0.0;
    const int64_t n = probs.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(p[i]);
        acc -= v * std::log(std::max(v, kProbFloor));
    }
    out.value()[0] = static_cast<S>(acc / static_cast<double>(N));
    check_finite("entropy_loss", out.value());

    if (out.requires_grad())
        tape.record("entropy_loss", [=]() {
            const double g = static_cast<double>(out.grad()[0]);
            std::vector<S>& dp = probs.node()->grad;
            const std::vector<S>& pv = probs.value();
            const double inv_n = 1.0 / static_cast<double>(N);
            for (int64_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(pv[static_cast<size_t>(i)]);
                const double d = v >= kProbFloor ? std::log(v) + 1.0
                                                 : std::log(kProbFloor);
                dp[static_cast<size_t>(i)] -= static_cast<S>(g * d * inv_n);
            }
        });
    return out;
}

double kl_divergence(const std::array<double, 4>& p, const std::array<double, 4>& q) {
    check_normalized(p, "kl_divergence P");
    check_normalized(q, "kl_divergence Q");
    const std::array<double, 4> ps = smooth(p), qs = smooth(q);
    double acc = 0.0;
    for (int c = 0; c < 4; ++c)
        acc += ps[static_cast<size_t>(c)] *
               std::log(ps[static_cast<size_t>(c)] / qs[static_cast<size_t>(c)]);
    return acc;
}

template <typename S>
Tensor<S> mean_kl(Tape<S>& tape, const Tensor<S>& dists,
                  const std::array<double, 4>& q) {
    if (dists.rank() != 2 || dists.dim(1) != 4)
        throw ShapeError("mean_kl expects distributions [N,4], got " +
                         shape_str(dists.shape()));
    check_normalized(q, "mean_kl Q");
    const int64_t N = dists.dim(0);
    const std::array<double, 4> qs = smooth(q);

    Tensor<S> out = Tensor<S>::zeros({1}, dists.requires_grad() && tape.recording());
    const S* d = dists.value().data();
    // Per-row smoothed sum and KL value, shared with the backward pass:
    // d(row_kl)/d(p_c) = (ln(p'_c/q'_c) - row_kl) / row_sum.
    auto row_sum = std::make_shared<std::vector<double>>(static_cast<size_t>(N));
    auto row_kl = std::make_shared<std::vector<double>>(static_cast<size_t>(N));
    double acc = 0.0;
    for (int64_t i = 0; i < N; ++i) {
        std::array<double, 4> row;
        double sum_check = 0.0;
        for (int c = 0; c < 4; ++c) {
            row[static_cast<size_t>(c)] = static_cast<double>(d[i * 4 + c]);
            sum_check += row[static_cast<size_t>(c)];
            if (row[static_cast<size_t>(c)] < -1e-9)
                throw ContractError("mean_kl: negative distribution entry in row " +
                                    std::to_string(i));
        }
        if (std::abs(sum_check - 1.0) > 1e-6)
            throw ContractError("mean_kl: row " + std::to_string(i) + " sums to " +
                                std::to_string(sum_check) + ", expected 1");
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += row[static_cast<size_t>(c)] + kKlEps;
        double kl = 0.0;
        for (int c = 0; c < 4; ++c) {
            const double pc = (row[static_cast<size_t>(c)] + kKlEps) / s;
            kl += pc * std::log(pc / qs[static_cast<size_t>(c)]);
        }
        (*row_sum)[static_cast<size_t>(i)] = s;
        (*row_kl)[static_cast<size_t>(i)] = kl;
        acc += kl;
    }
    out.value()[0] = static_cast<S>(acc / static_cast<double>(N));
    check_finite("mean_kl", out.value());

    if (out.requires_grad())
        tape.record("mean_kl", [=]() {
            const double g = static_cast<double>(out.grad()[0]) / static_cast<double>(N);
            std::vector<S>& dd = dists.node()->grad;
            const std::vector<S>& dv = dists.value();
            for (int64_t i = 0; i < N; ++i) {
                const double s = (*row_sum)[static_cast<size_t>(i)];
                const double kl = (*row_kl)[static_cast<size_t>(i)];
                for (int c = 0; c < 4; ++c) {
                    const size_t u = static_cast<size_t>(i * 4 + c);
                    const double pc = (static_cast<double>(dv[u]) + kKlEps) / s;
                    dd[u] += static_cast<S>(
                        g * (std::log(pc / qs[static_cast<size_t>(c)]) - kl) / s);
                }
            }
        });
    return out;
}

template <typename S>
Tensor<S> consistency_loss(Tape<S>& tape, const Tensor<S>& dists,
                           const std::vector<std::array<double, 4>>& refs,
                           const std::vector<double>& betas) {
    if (refs.empty()) throw ContractError("consistency_loss with no references");
    if (refs.size() != betas.size())
        throw ContractError("consistency_loss: " + std::to_string(refs.size()) +
                            " references but " + std::to_string(betas.size()) +
                            " weights");
    for (double b : betas)
        if (b < 0.0) throw ContractError("consistency weights must be >= 0");
    Tensor<S> total;
    for (size_t k = 0; k < refs.size(); ++k) {
        Tensor<S> term = mul_scalar(tape, mean_kl(tape, dists, refs[k]),
                                    static_cast<S>(betas[k]));
        total = k == 0 ? term : add(tape, total, term);
    }
    return total;
}

template <typename S>
Tensor<S> total_ssl_loss(Tape<S>& tape, const Tensor<S>& l_s,
                         const Tensor<S>& l_entropy, const Tensor<S>& l_kl,
                         S alpha) {
    for (const Tensor<S>* t : {&l_s, &l_entropy, &l_kl})
        if (t->numel() != 1)
            throw ShapeError("total_ssl_loss expects scalar components");
    return add(tape, l_s, add(tape, mul_scalar(tape, l_entropy, alpha), l_kl));
}

#define FB_INSTANTIATE_LOSSES(S)                                                   \
    template Tensor<S> weighted_cross_entropy<S>(Tape<S>&, const Tensor<S>&,       \
                                                 const std::vector<uint8_t>&,      \
                                                 const ClassWeights&);             \
    template Tensor<S> entropy_loss<S>(Tape<S>&, const Tensor<S>&);                \
    template Tensor<S> mean_kl<S>(Tape<S>&, const Tensor<S>&,                      \
                                  const std::array<double, 4>&);                   \
    template Tensor<S> consistency_loss<S>(                                        \
        Tape<S>&, const Tensor<S>&, const std::vector<std::array<double, 4>>&,     \
        const std::vector<double>&);                                               \
    template Tensor<S> total_ssl_loss<S>(Tape<S>&, const Tensor<S>&,               \
                                         const Tensor<S>&, const Tensor<S>&, S);

FB_INSTANTIATE_LOSSES(float)
FB_INSTANTIATE_LOSSES(double)

}  // namespace floodbench
