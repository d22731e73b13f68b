#include "floodbench/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "floodbench/attention.hpp"
#include "floodbench/losses.hpp"
#include "floodbench/models.hpp"
#include "floodbench/tensor.hpp"

namespace floodbench {
namespace {

using T = Tensor<double>;
using TapeD = Tape<double>;

constexpr double kOpTol = 1e-6;
constexpr double kModelTol = 1e-4;
constexpr double kOpStep = 1e-5;
// Small enough that a deep net's ReLU kinks and pool-argmax boundaries are
// almost never crossed by the probe, yet far above double roundoff.
constexpr double kModelStep = 1e-5;
// Differences this small are FD noise around a zero gradient, not a defect.
constexpr double kOpFloor = 1e-10;
constexpr double kModelFloor = 1e-8;

T random_tensor(Rng& rng, std::vector<int64_t> shape, double lo, double hi) {
    T t = T::zeros(std::move(shape));
    for (double& v : t.value()) v = rng.uniform(lo, hi);
    return t;
}

// Random values bounded away from zero (for kinked ops like relu/abs).
T random_offzero(Rng& rng, std::vector<int64_t> shape) {
    T t = T::zeros(std::move(shape));
    for (double& v : t.value()) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform(0.0, 1.0) < 0.5 ? -mag : mag;
    }
    return t;
}

// Rows normalized to sum 1, entries bounded away from 0 so log stays smooth.
T random_simplex(Rng& rng, std::vector<int64_t> shape, int64_t axis_len) {
    T t = random_tensor(rng, std::move(shape), 0.1, 1.0);
    auto& v = t.value();
    for (size_t i = 0; i < v.size(); i += static_cast<size_t>(axis_len)) {
        double s = 0.0;
        for (int64_t c = 0; c < axis_len; ++c) s += v[i + static_cast<size_t>(c)];
        for (int64_t c = 0; c < axis_len; ++c) v[i + static_cast<size_t>(c)] /= s;
    }
    return t;
}

// Pixel-axis variant for [B,4,H,W] probability maps.
T random_probmap(Rng& rng, int64_t b, int64_t h, int64_t w) {
    T t = random_tensor(rng, {b, 4, h, w}, 0.1, 1.0);
    auto& v = t.value();
    const int64_t hw = h * w;
    for (int64_t i = 0; i < b; ++i)
        for (int64_t p = 0; p < hw; ++p) {
            double s = 0.0;
            for (int64_t c = 0; c < 4; ++c) s += v[static_cast<size_t>((i * 4 + c) * hw + p)];
            for (int64_t c = 0; c < 4; ++c) v[static_cast<size_t>((i * 4 + c) * hw + p)] /= s;
        }
    return t;
}

// Scalar probe of a tensor-valued op: loss = sum(r * y) with fixed random r.
// The same projection must be used for the analytic and both FD evaluations.
struct Probe {
    T r;
    T operator()(TapeD& tape, const T& y) {
        if (!r.defined()) {
            Rng rng(0x70726f6a);  // fixed; shapes are deterministic per check
            r = random_tensor(rng, y.shape(), -1.0, 1.0);
        }
        if (r.shape() != y.shape()) throw ContractError("probe shape drifted between evals");
        return sum_all(tape, mul(tape, y, r));
    }
};

// Central difference compared against the analytic value over a ladder of
// shrinking steps. A kinked path (ReLU threshold, pool-argmax boundary inside
// the probe interval) contaminates the large-step estimate but converges to
// the analytic value as the interval tightens; a genuinely wrong gradient
// disagrees at every scale. Returns the best relative error achieved, or 0
// when the difference drops under the noise floor.
double fd_best_rel(const std::function<double()>& eval, double& slot, double an,
                   double h0, double abs_floor, double rel_tol) {
    double best = 1e300;
    double h = h0;
    const double saved = slot;
    for (int scale = 0; scale < 6; ++scale, h *= 0.5) {
        slot = saved + h;
        const double up = eval();
        slot = saved - h;
        const double down = eval();
        slot = saved;
        const double fd = (up - down) / (2.0 * h);
        const double diff = std::abs(an - fd);
        if (diff <= abs_floor) return 0.0;
        best = std::min(best, diff / std::max({std::abs(an), std::abs(fd), 1e-12}));
        if (best <= rel_tol) break;
    }
    return best;
}

GradCheckResult check_scalar_fn(const std::string& name, std::vector<T> inputs,
                                const std::function<T(TapeD&)>& fn, double rel_tol,
                                double abs_floor, double h) {
    for (T& t : inputs) t.set_requires_grad(true);

    std::vector<std::vector<double>> analytic;
    {
        TapeD tape;
        T loss = fn(tape);
        for (T& t : inputs) t.zero_grad();
        tape.backward(loss);
        for (T& t : inputs) analytic.push_back(t.grad());
    }

    auto eval = [&]() {
        TapeD tape;
        NoGrad<double> guard(tape);
        return fn(tape).item();
    };

    GradCheckResult result;
    result.name = name;
    result.tolerance = rel_tol;
    for (size_t i = 0; i < inputs.size(); ++i) {
        auto& vals = inputs[i].value();
        for (size_t j = 0; j < vals.size(); ++j) {
            const double rel =
                fd_best_rel(eval, vals[j], analytic[i][j], h, abs_floor, rel_tol);
            result.worst_rel = std::max(result.worst_rel, rel);
            ++result.checked;
        }
    }
    result.passed = result.worst_rel <= rel_tol;
    return result;
}

GradCheckResult check_op(const std::string& name, std::vector<T> inputs,
                         std::function<T(TapeD&, std::vector<T>&)> op,
                         double rel_tol = kOpTol, double h = kOpStep) {
    auto probe = std::make_shared<Probe>();
    auto captured = std::make_shared<std::vector<T>>(inputs);
    // The FD loop perturbs the tensors held by `captured`; check_scalar_fn
    // receives the same tensor handles so both see every perturbation.
    return check_scalar_fn(
        name, *captured,
        [probe, captured, op](TapeD& tape) {
            T y = op(tape, *captured);
            return (*probe)(tape, y);
        },
        rel_tol, kOpFloor, h);
}

TransformerLayerParams<double> random_layer(Rng& rng, int64_t channels,
                                            int64_t heads, int64_t dim) {
    TransformerLayerParams<double> p;
    for (int64_t h = 0; h < heads; ++h) {
        p.wq.push_back(random_tensor(rng, {channels, dim}, -0.5, 0.5));
        p.wk.push_back(random_tensor(rng, {channels, dim}, -0.5, 0.5));
        p.wv.push_back(random_tensor(rng, {channels, dim}, -0.5, 0.5));
    }
    p.wo = random_tensor(rng, {heads * dim, channels}, -0.5, 0.5);
    p.mlp_w1 = random_tensor(rng, {channels, 2 * channels}, -0.5, 0.5);
    p.mlp_b1 = random_tensor(rng, {2 * channels}, -0.2, 0.2);
    p.mlp_w2 = random_tensor(rng, {2 * channels, channels}, -0.5, 0.5);
    p.mlp_b2 = random_tensor(rng, {channels}, -0.2, 0.2);
    return p;
}

std::vector<T> layer_tensors(const TransformerLayerParams<double>& p) {
    std::vector<T> ts;
    for (const T& t : p.wq) ts.push_back(t);
    for (const T& t : p.wk) ts.push_back(t);
    for (const T& t : p.wv) ts.push_back(t);
    ts.push_back(p.wo);
    ts.push_back(p.mlp_w1);
    ts.push_back(p.mlp_b1);
    ts.push_back(p.mlp_w2);
    ts.push_back(p.mlp_b2);
    return ts;
}

}  // namespace

std::vector<GradCheckResult> run_op_checks() {
    std::vector<GradCheckResult> out;
    Rng rng(20240817);

    out.push_back(check_op(
        "conv2d_same",
        {random_tensor(rng, {2, 3, 5, 5}, -1, 1), random_tensor(rng, {4, 3, 3, 3}, -1, 1),
         random_tensor(rng, {4}, -0.5, 0.5)},
        [](TapeD& t, std::vector<T>& in) { return conv2d(t, in[0], in[1], in[2]); }));
    out.push_back(check_op(
        "conv2d_1x1_nobias",
        {random_tensor(rng, {2, 3, 4, 4}, -1, 1), random_tensor(rng, {2, 3, 1, 1}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return conv2d(t, in[0], in[1], T(), 0); }));
    out.push_back(check_op(
        "max_pool2", {random_tensor(rng, {2, 3, 4, 4}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return max_pool2(t, in[0]); }));
    out.push_back(check_op(
        "upsample_nearest2", {random_tensor(rng, {2, 3, 3, 3}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return upsample_nearest2(t, in[0]); }));
    out.push_back(check_op("relu", {random_offzero(rng, {2, 3, 4, 4})},
                           [](TapeD& t, std::vector<T>& in) { return relu(t, in[0]); }));
    out.push_back(check_op("sigmoid", {random_tensor(rng, {2, 2, 3, 3}, -2, 2)},
                           [](TapeD& t, std::vector<T>& in) { return sigmoid(t, in[0]); }));
    out.push_back(check_op("abs_val", {random_offzero(rng, {2, 3, 3, 3})},
                           [](TapeD& t, std::vector<T>& in) { return abs_val(t, in[0]); }));
    out.push_back(check_op(
        "add", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 2, 2}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return add(t, in[0], in[1]); }));
    out.push_back(check_op(
        "sub", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 2, 2}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return sub(t, in[0], in[1]); }));
    out.push_back(check_op(
        "mul", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 2, 2}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return mul(t, in[0], in[1]); }));
    out.push_back(check_op("add_scalar", {random_tensor(rng, {2, 3, 2, 2}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return add_scalar(t, in[0], 0.37); }));
    out.push_back(check_op("mul_scalar", {random_tensor(rng, {2, 3, 2, 2}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return mul_scalar(t, in[0], -1.3); }));
    out.push_back(check_op(
        "add_bc", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 1, 1}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return add_bc(t, in[0], in[1]); }));
    out.push_back(check_op(
        "sub_bc", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 1, 1}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return sub_bc(t, in[0], in[1]); }));
    out.push_back(check_op(
        "div_bc", {random_tensor(rng, {2, 3, 2, 2}, -1, 1), random_tensor(rng, {2, 3, 1, 1}, 0.5, 1.5)},
        [](TapeD& t, std::vector<T>& in) { return div_bc(t, in[0], in[1]); }));
    out.push_back(check_op(
        "concat_dim1_4d",
        {random_tensor(rng, {2, 2, 3, 3}, -1, 1), random_tensor(rng, {2, 3, 3, 3}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return concat_dim1(t, {in[0], in[1]}); }));
    out.push_back(check_op(
        "concat_dim1_3d",
        {random_tensor(rng, {2, 2, 4}, -1, 1), random_tensor(rng, {2, 3, 4}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return concat_dim1(t, {in[0], in[1]}); }));
    out.push_back(check_op("slice_dim1", {random_tensor(rng, {2, 6, 3}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return slice_dim1(t, in[0], 1, 3); }));
    out.push_back(check_op(
        "concat_lastdim",
        {random_tensor(rng, {2, 3, 4}, -1, 1), random_tensor(rng, {2, 3, 2}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return concat_lastdim(t, {in[0], in[1]}); }));
    out.push_back(check_op(
        "linear",
        {random_tensor(rng, {4, 5}, -1, 1), random_tensor(rng, {5, 3}, -1, 1),
         random_tensor(rng, {3}, -0.5, 0.5)},
        [](TapeD& t, std::vector<T>& in) { return linear(t, in[0], in[1], in[2]); }));
    out.push_back(check_op(
        "linear3", {random_tensor(rng, {2, 4, 5}, -1, 1), random_tensor(rng, {5, 3}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return linear3(t, in[0], in[1]); }));
    out.push_back(check_op(
        "matmul", {random_tensor(rng, {3, 4}, -1, 1), random_tensor(rng, {4, 5}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return matmul(t, in[0], in[1]); }));
    out.push_back(check_op(
        "bmm", {random_tensor(rng, {2, 3, 4}, -1, 1), random_tensor(rng, {2, 4, 5}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return bmm(t, in[0], in[1]); }));
    out.push_back(check_op(
        "bmm_transpose_b",
        {random_tensor(rng, {2, 3, 4}, -1, 1), random_tensor(rng, {2, 5, 4}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return bmm(t, in[0], in[1], true); }));
    out.push_back(check_op("softmax_lastdim", {random_tensor(rng, {2, 3, 5}, -2, 2)},
                           [](TapeD& t, std::vector<T>& in) { return softmax_lastdim(t, in[0]); }));
    out.push_back(check_op("softmax_channels", {random_tensor(rng, {2, 4, 3, 3}, -2, 2)},
                           [](TapeD& t, std::vector<T>& in) { return softmax_channels(t, in[0]); }));
    out.push_back(check_op("sum_all", {random_tensor(rng, {2, 3, 4}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return sum_all(t, in[0]); }));
    out.push_back(check_op("mean_all", {random_tensor(rng, {2, 3, 4}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return mean_all(t, in[0]); }));
    out.push_back(check_op("mean_spatial", {random_tensor(rng, {2, 3, 4, 4}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return mean_spatial(t, in[0]); }));
    out.push_back(check_op("reshape", {random_tensor(rng, {2, 3, 4}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return reshape(t, in[0], {4, 6}); }));
    out.push_back(check_op("transpose_12", {random_tensor(rng, {2, 3, 4}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return transpose_12(t, in[0]); }));
    out.push_back(check_op("transpose2d", {random_tensor(rng, {3, 5}, -1, 1)},
                           [](TapeD& t, std::vector<T>& in) { return transpose2d(t, in[0]); }));

    // Attention blocks (composites of many primitives). The shrinking-step
    // ladder keeps even these deep compositions inside the primitive bound.
    out.push_back(check_op(
        "prior_attention", {random_tensor(rng, {2, 3, 6, 6}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return prior_attention(t, in[0], 1e-4); }));
    out.push_back(check_op(
        "tokenize",
        {random_tensor(rng, {2, 4, 4, 4}, -1, 1), random_tensor(rng, {2, 4, 1, 1}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return tokenize(t, in[0], in[1]); }));
    out.push_back(check_op(
        "attention_head",
        {random_tensor(rng, {3, 4}, -1, 1), random_tensor(rng, {5, 4}, -1, 1),
         random_tensor(rng, {5, 4}, -1, 1)},
        [](TapeD& t, std::vector<T>& in) { return attention_head(t, in[0], in[1], in[2]); }));
    {
        Rng lr(7);
        auto layer = std::make_shared<TransformerLayerParams<double>>(random_layer(lr, 8, 2, 4));
        std::vector<T> ins = {random_tensor(rng, {2, 4, 8}, -1, 1)};
        auto lts = layer_tensors(*layer);
        ins.insert(ins.end(), lts.begin(), lts.end());
        out.push_back(check_op(
            "msa_encode", ins,
            [layer](TapeD& t, std::vector<T>& in) { return msa_encode(t, in[0], *layer); }));
    }
    {
        Rng lr(9);
        auto layer = std::make_shared<TransformerLayerParams<double>>(random_layer(lr, 8, 2, 4));
        std::vector<T> ins = {random_tensor(rng, {2, 8, 2, 2}, -1, 1),
                              random_tensor(rng, {2, 3, 8}, -1, 1)};
        auto lts = layer_tensors(*layer);
        ins.insert(ins.end(), lts.begin(), lts.end());
        out.push_back(check_op(
            "ma_decode", ins,
            [layer](TapeD& t, std::vector<T>& in) { return ma_decode(t, in[0], in[1], *layer); }));
    }

    // Losses, differentiated w.r.t. the probability inputs.
    {
        std::vector<uint8_t> labels(2 * 3 * 3);
        for (uint8_t& v : labels) v = static_cast<uint8_t>(rng.index(4));
        ClassWeights w;
        w.w = {2.0, 1.0, 1.0, 4.0};
        out.push_back(check_op(
            "weighted_cross_entropy", {random_probmap(rng, 2, 3, 3)},
            [labels, w](TapeD& t, std::vector<T>& in) {
                return weighted_cross_entropy(t, in[0], labels, w);
            }));
    }
    out.push_back(check_op("entropy_loss", {random_probmap(rng, 2, 3, 3)},
                           [](TapeD& t, std::vector<T>& in) { return entropy_loss(t, in[0]); }));
    // The KL ops insist their rows stay normalized within 1e-6, so the FD
    // step must sit below that while staying far above double roundoff.
    constexpr double kSimplexStep = 5e-7;
    {
        std::array<double, 4> q{0.4, 0.3, 0.2, 0.1};
        out.push_back(check_op(
            "mean_kl", {random_simplex(rng, {5, 4}, 4)},
            [q](TapeD& t, std::vector<T>& in) { return mean_kl(t, in[0], q); }, kOpTol,
            kSimplexStep));
    }
    {
        std::vector<std::array<double, 4>> refs{{0.4, 0.3, 0.2, 0.1}, {0.25, 0.25, 0.25, 0.25}};
        std::vector<double> betas{0.7, 0.3};
        out.push_back(check_op(
            "consistency_loss", {random_simplex(rng, {5, 4}, 4)},
            [refs, betas](TapeD& t, std::vector<T>& in) {
                return consistency_loss(t, in[0], refs, betas);
            },
            kOpTol, kSimplexStep));
    }
    return out;
}

GradCheckResult check_model_end_to_end(const std::string& kind) {
    ModelConfig cfg;
    cfg.encoder_channels = {4, 8, 16, 32, 64};
    cfg.bit_feature_dim = 8;
    cfg.bit_token_count = 2;
    cfg.bit_head_count = 2;
    cfg.bit_head_dim = 4;
    auto model = make_model<double>(kind, cfg, 11);

    Rng rng(17);
    const T pre = random_tensor(rng, {1, cfg.input_channels, 16, 16}, 0.0, 1.0);
    const T post = random_tensor(rng, {1, cfg.input_channels, 16, 16}, 0.0, 1.0);
    std::vector<uint8_t> labels(16 * 16);
    for (uint8_t& v : labels) v = static_cast<uint8_t>(rng.index(4));
    const ClassWeights weights;

    auto eval_loss = [&](TapeD& tape) {
        T logits = model->forward(tape, pre, post);
        T probs = softmax_channels(tape, logits);
        return weighted_cross_entropy(tape, probs, labels, weights);
    };

    std::vector<std::vector<double>> analytic;
    {
        TapeD tape;
        T loss = eval_loss(tape);
        model->zero_grad();
        tape.backward(loss);
        for (auto& [name, p] : model->parameters()) analytic.push_back(p.grad());
    }
    auto eval = [&]() {
        TapeD tape;
        NoGrad<double> guard(tape);
        return eval_loss(tape).item();
    };

    GradCheckResult result;
    result.name = kind + "_end_to_end";
    result.tolerance = kModelTol;
    // Small tensors are probed exhaustively, large ones at sampled entries
    // spread by the deterministic generator.
    constexpr size_t kSamplePerTensor = 24;
    Rng pick(23);
    auto& params = model->parameters();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].second.value();
        std::vector<size_t> idx;
        if (vals.size() <= kSamplePerTensor) {
            idx.resize(vals.size());
            for (size_t j = 0; j < vals.size(); ++j) idx[j] = j;
        } else {
            while (idx.size() < kSamplePerTensor) {
                const size_t j = static_cast<size_t>(pick.index(vals.size()));
                if (std::find(idx.begin(), idx.end(), j) == idx.end()) idx.push_back(j);
            }
        }
        for (size_t j : idx) {
            const double rel = fd_best_rel(eval, vals[j], analytic[pi][j], kModelStep,
                                           kModelFloor, kModelTol);
            result.worst_rel = std::max(result.worst_rel, rel);
            ++result.checked;
        }
    }
    result.passed = result.worst_rel <= kModelTol;
    return result;
}

std::vector<GradCheckResult> run_full_suite() {
    std::vector<GradCheckResult> out = run_op_checks();
    out.push_back(check_model_end_to_end("spaunet"));
    out.push_back(check_model_end_to_end("bit"));
    return out;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

std::string format_report(const std::vector<GradCheckResult>& results) {
    std::string out;
    char buf[160];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%-24s worst_rel %.3e  tol %.0e  entries %lld  %s\n",
                      r.name.c_str(), r.worst_rel, r.tolerance,
                      static_cast<long long>(r.checked), r.passed ? "ok" : "FAIL");
        out += buf;
    }
    return out;
}

}  // namespace floodbench
