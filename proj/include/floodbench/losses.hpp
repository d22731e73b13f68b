#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "floodbench/tensor.hpp"

namespace floodbench {

// Per-class weights for the supervised loss; all entries must be positive.
struct ClassWeights {
    std::array<double, 4> w{1.0, 1.0, 1.0, 1.0};
};

// Inverse-frequency weights normalized to mean 1. Zero counts are lifted to
// one pixel so absent classes get the largest finite weight.
ClassWeights inverse_frequency_weights(const std::array<int64_t, 4>& counts);

// -(1/M) sum_i w[y_i] log p_i[y_i] over all M pixels; probabilities clamped
// to >= 1e-12 before the log. probs [B,4,H,W] softmaxed over the class axis,
// labels row-major [B*H*W] with values in {0..3}.
template <typename S>
Tensor<S> weighted_cross_entropy(Tape<S>& tape, const Tensor<S>& probs,
                                 const std::vector<uint8_t>& labels,
                                 const ClassWeights& weights);

// -(1/N) sum_pixels sum_c p log p, in [0, ln 4] for 4 classes.
template <typename S>
Tensor<S> entropy_loss(Tape<S>& tape, const Tensor<S>& probs);

// KL(P || Q) between two length-4 distributions; both are smoothed by
// epsilon = 1e-8 and renormalized first. Inputs must sum to 1 within 1e-6.
double kl_divergence(const std::array<double, 4>& p,
                     const std::array<double, 4>& q);

// (1/N) sum_i KL(dists_i || q): mean row-wise KL of [N,4] against one fixed
// reference, differentiable in dists. Same smoothing as kl_divergence.
template <typename S>
Tensor<S> mean_kl(Tape<S>& tape, const Tensor<S>& dists,
                  const std::array<double, 4>& q);

// sum_k beta_k * mean_kl(dists, refs[k]); refs and betas must be non-empty
// and the same length.
template <typename S>
Tensor<S> consistency_loss(Tape<S>& tape, const Tensor<S>& dists,
                           const std::vector<std::array<double, 4>>& refs,
                           const std::vector<double>& betas);

// l_s + alpha * l_entropy + l_kl (consistency weights are already inside
// l_kl). All inputs are scalars.
template <typename S>
Tensor<S> total_ssl_loss(Tape<S>& tape, const Tensor<S>& l_s,
                         const Tensor<S>& l_entropy, const Tensor<S>& l_kl,
                         S alpha);

}  // namespace floodbench
