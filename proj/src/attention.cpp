#include "floodbench/attention.hpp"

#include <cmath>

namespace floodbench {

double simam_energy(const std::vector<double>& channel, size_t target_index,
                    double lambda) {
    if (channel.empty()) throw ShapeError("simam_energy on an empty channel");
    if (target_index >= channel.size())
        throw ShapeError("simam_energy target index out of range");
    if (!(lambda > 0.0)) throw ContractError("simam_energy requires lambda > 0");
    const double n = static_cast<double>(channel.size());
    double mean = 0.0;
    for (double v : channel) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : channel) var += (v - mean) * (v - mean);
    var /= n;
    const double t = channel[target_index];
    return 4.0 * (var + lambda) / ((t - mean) * (t - mean) + 2.0 * var + 2.0 * lambda);
}

template <typename S>
Tensor<S> prior_attention(Tape<S>& tape, const Tensor<S>& x, S lambda) {
    if (x.rank() != 4)
        throw ShapeError("prior_attention expects [B,C,H,W], got " +
                         shape_str(x.shape()));
    if (!(lambda > S(0))) throw ContractError("prior_attention requires lambda > 0");
    // 1/e* = ((t-mu)^2 + 2 var + 2 lambda) / (4 var + 4 lambda), per channel.
    Tensor<S> mu = mean_spatial(tape, x);
    Tensor<S> d = sub_bc(tape, x, mu);
    Tensor<S> d2 = mul(tape, d, d);
    Tensor<S> var = mean_spatial(tape, d2);
    Tensor<S> den_c = add_scalar(tape, mul_scalar(tape, var, S(2)), S(2) * lambda);
    Tensor<S> num_c = add_scalar(tape, mul_scalar(tape, var, S(4)), S(4) * lambda);
    Tensor<S> inv_e = div_bc(tape, add_bc(tape, d2, den_c), num_c);
    Tensor<S> w = sigmoid(tape, inv_e);
    return mul(tape, x, w);
}

template <typename S>
Tensor<S> tokenize(Tape<S>& tape, const Tensor<S>& feature,
                   const Tensor<S>& token_kernel) {
    if (feature.rank() != 4)
        throw ShapeError("tokenize expects [B,C,H,W], got " +
                         shape_str(feature.shape()));
    if (token_kernel.rank() != 4 || token_kernel.dim(2) != 1 ||
        token_kernel.dim(3) != 1)
        throw ShapeError("tokenize kernel must be pointwise [L',C,1,1], got " +
                         shape_str(token_kernel.shape()));
    const int64_t B = feature.dim(0), C = feature.dim(1);
    const int64_t HW = feature.dim(2) * feature.dim(3);
    const int64_t L = token_kernel.dim(0);
    if (L * 4 > HW)
        throw ContractError("tokenize: token count " + std::to_string(L) +
                            " does not compress spatial extent " +
                            std::to_string(HW));
    Tensor<S> maps = conv2d(tape, feature, token_kernel, Tensor<S>(), 0);
    Tensor<S> weights = softmax_lastdim(tape, reshape(tape, maps, {B, L, HW}));
    Tensor<S> flat = reshape(tape, feature, {B, C, HW});
    return bmm(tape, weights, flat, /*transpose_b=*/true);
}

template <typename S>
Tensor<S> attention_head(Tape<S>& tape, const Tensor<S>& q, const Tensor<S>& k,
                         const Tensor<S>& v) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw ShapeError("attention_head expects 2D Q/K/V");
    const int64_t d = q.dim(1);
    if (k.dim(1) != d)
        throw ShapeError("attention_head: Q dim " + std::to_string(d) +
                         " vs K dim " + std::to_string(k.dim(1)));
    if (v.dim(0) != k.dim(0))
        throw ShapeError("attention_head: K rows " + std::to_string(k.dim(0)) +
                         " vs V rows " + std::to_string(v.dim(0)));
    Tensor<S> scores = matmul(tape, q, transpose2d(tape, k));
    Tensor<S> scaled =
        mul_scalar(tape, scores, S(1) / static_cast<S>(std::sqrt(double(d))));
    Tensor<S> attn = softmax_lastdim(tape, scaled);
    return matmul(tape, attn, v);
}

namespace {

template <typename S>
void check_layer(const TransformerLayerParams<S>& p, int64_t C, const char* op) {
    const int64_t h = p.head_count();
    if (h == 0) throw ContractError(std::string(op) + ": no attention heads");
    if (p.wk.size() != p.wq.size() || p.wv.size() != p.wq.size())
        throw ContractError(std::string(op) + ": per-head projection lists disagree");
    const int64_t d = p.head_dim();
    for (int64_t j = 0; j < h; ++j) {
        for (const Tensor<S>* w :
             {&p.wq[static_cast<size_t>(j)], &p.wk[static_cast<size_t>(j)],
              &p.wv[static_cast<size_t>(j)]}) {
            if (w->rank() != 2 || w->dim(0) != C || w->dim(1) != d)
                throw ShapeError(std::string(op) + ": head projection must be [" +
                                 std::to_string(C) + "," + std::to_string(d) +
                                 "], got " + shape_str(w->shape()));
        }
    }
    if (p.wo.rank() != 2 || p.wo.dim(0) != h * d || p.wo.dim(1) != C)
        throw ShapeError(std::string(op) + ": output projection must be [" +
                         std::to_string(h * d) + "," + std::to_string(C) +
                         "], got " + shape_str(p.wo.shape()));
}

// x + MLP(x) with hidden width 2C and ReLU between the two affine maps.
template <typename S>
Tensor<S> mlp_residual(Tape<S>& tape, const Tensor<S>& x,
                       const TransformerLayerParams<S>& p) {
    const int64_t B = x.dim(0), L = x.dim(1), C = x.dim(2);
    Tensor<S> flat = reshape(tape, x, {B * L, C});
    Tensor<S> hidden = relu(tape, linear(tape, flat, p.mlp_w1, p.mlp_b1));
    Tensor<S> out = linear(tape, hidden, p.mlp_w2, p.mlp_b2);
    return add(tape, x, reshape(tape, out, {B, L, C}));
}

}  // namespace

template <typename S>
Tensor<S> multi_head_attention(Tape<S>& tape, const Tensor<S>& q_in,
                               const Tensor<S>& kv_in,
                               const TransformerLayerParams<S>& p) {
    if (q_in.rank() != 3 || kv_in.rank() != 3)
        throw ShapeError("multi_head_attention expects [B,L,C] inputs");
    const int64_t C = q_in.dim(2);
    if (kv_in.dim(2) != C || kv_in.dim(0) != q_in.dim(0))
        throw ShapeError("multi_head_attention: query/key shapes disagree: " +
                         shape_str(q_in.shape()) + " vs " + shape_str(kv_in.shape()));
    check_layer(p, C, "multi_head_attention");
    const int64_t h = p.head_count(), d = p.head_dim();
    const S scale = S(1) / static_cast<S>(std::sqrt(double(d)));
    std::vector<Tensor<S>> heads;
    heads.reserve(static_cast<size_t>(h));
    for (int64_t j = 0; j < h; ++j) {
        const size_t u = static_cast<size_t>(j);
        Tensor<S> q = linear3(tape, q_in, p.wq[u]);
        Tensor<S> k = linear3(tape, kv_in, p.wk[u]);
        Tensor<S> v = linear3(tape, kv_in, p.wv[u]);
        Tensor<S> attn = softmax_lastdim(
            tape, mul_scalar(tape, bmm(tape, q, k, /*transpose_b=*/true), scale));
        heads.push_back(bmm(tape, attn, v));
    }
    return linear3(tape, concat_lastdim(tape, heads), p.wo);
}

template <typename S>
Tensor<S> msa_encode(Tape<S>& tape, const Tensor<S>& tokens,
                     const TransformerLayerParams<S>& p) {
    Tensor<S> attended =
        add(tape, tokens, multi_head_attention(tape, tokens, tokens, p));
    return mlp_residual(tape, attended, p);
}

template <typename S>
Tensor<S> ma_decode(Tape<S>& tape, const Tensor<S>& feat, const Tensor<S>& tokens,
                    const TransformerLayerParams<S>& p) {
    if (feat.rank() != 4)
        throw ShapeError("ma_decode expects pixel features [B,C,H,W], got " +
                         shape_str(feat.shape()));
    const int64_t B = feat.dim(0), C = feat.dim(1), H = feat.dim(2), W = feat.dim(3);
    Tensor<S> queries =
        transpose_12(tape, reshape(tape, feat, {B, C, H * W}));  // [B,HW,C]
    Tensor<S> attended =
        add(tape, queries, multi_head_attention(tape, queries, tokens, p));
    Tensor<S> refined = mlp_residual(tape, attended, p);
    return reshape(tape, transpose_12(tape, refined), {B, C, H, W});
}

#define FB_INSTANTIATE_ATTENTION(S)                                              \
    template Tensor<S> prior_attention<S>(Tape<S>&, const Tensor<S>&, S);        \
    template Tensor<S> tokenize<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&); \
    template Tensor<S> attention_head<S>(Tape<S>&, const Tensor<S>&,             \
                                         const Tensor<S>&, const Tensor<S>&);    \
    template struct TransformerLayerParams<S>;                                   \
    template Tensor<S> multi_head_attention<S>(Tape<S>&, const Tensor<S>&,       \
                                               const Tensor<S>&,                 \
                                               const TransformerLayerParams<S>&); \
    template Tensor<S> msa_encode<S>(Tape<S>&, const Tensor<S>&,                 \
                                     const TransformerLayerParams<S>&);          \
    template Tensor<S> ma_decode<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&, \
                                    const TransformerLayerParams<S>&);

FB_INSTANTIATE_ATTENTION(float)
FB_INSTANTIATE_ATTENTION(double)

}  // namespace floodbench
