#pragma once

#include <vector>

#include "floodbench/tensor.hpp"

namespace floodbench {

// Spatial-inhibition energy of one neuron against its channel's population
// statistics (inclusive mean/variance over all H*W positions):
//   e* = 4(var + lambda) / ((t - mean)^2 + 2 var + 2 lambda)
// Scalar reference path; the vectorized module is prior_attention.
double simam_energy(const std::vector<double>& channel, size_t target_index,
                    double lambda);

// Parameter-free attention: x * sigmoid(1/e*), energies computed per
// (batch, channel) slice. lambda must be positive.
template <typename S>
Tensor<S> prior_attention(Tape<S>& tape, const Tensor<S>& x, S lambda);

// Pointwise conv -> per-map spatial softmax -> weighted feature sum.
// feature [B,C,H,W], token_kernel [L',C,1,1] -> tokens [B,L',C].
// Enforces L' <= H*W/4 (tokens must compress the spatial extent).
template <typename S>
Tensor<S> tokenize(Tape<S>& tape, const Tensor<S>& feature,
                   const Tensor<S>& token_kernel);

// softmax(Q K^T / sqrt(d)) V on already-projected matrices.
// q [n,d], k [m,d], v [m,d] -> [n,d].
template <typename S>
Tensor<S> attention_head(Tape<S>& tape, const Tensor<S>& q, const Tensor<S>& k,
                         const Tensor<S>& v);

// One transformer layer's parameters: h per-head projections [C,d], an
// output projection [h*d,C], and a 2-layer MLP with hidden width 2C.
// No normalization layers anywhere.
template <typename S>
struct TransformerLayerParams {
    std::vector<Tensor<S>> wq, wk, wv;
    Tensor<S> wo;
    Tensor<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;

    int64_t head_count() const { return static_cast<int64_t>(wq.size()); }
    int64_t head_dim() const { return wq.at(0).dim(1); }
    int64_t channels() const { return wq.at(0).dim(0); }
};

// Multi-head attention with queries from q_in and keys/values from kv_in,
// both [B,L,C]; heads concatenated then projected back to C.
template <typename S>
Tensor<S> multi_head_attention(Tape<S>& tape, const Tensor<S>& q_in,
                               const Tensor<S>& kv_in,
                               const TransformerLayerParams<S>& p);

// Encoder layer: tokens + MHA(tokens), then + MLP. tokens [B,L,C].
template <typename S>
Tensor<S> msa_encode(Tape<S>& tape, const Tensor<S>& tokens,
                     const TransformerLayerParams<S>& p);

// Decoder layer: pixels query the token set. feat [B,C,H,W],
// tokens [B,L',C]; output returns to [B,C,H,W] with residual and MLP.
template <typename S>
Tensor<S> ma_decode(Tape<S>& tape, const Tensor<S>& feat, const Tensor<S>& tokens,
                    const TransformerLayerParams<S>& p);

}  // namespace floodbench
