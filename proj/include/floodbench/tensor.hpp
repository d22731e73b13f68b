#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "floodbench/common.hpp"

namespace floodbench {

// Dense row-major tensor participating in reverse-mode differentiation.
// S is float (training) or double (gradient-check mode).
template <typename S>
struct TensorData {
    std::vector<int64_t> shape;
    std::vector<S> value;
    std::vector<S> grad;  // same length as value when requires_grad
    bool requires_grad = false;
};

template <typename S>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor from(std::vector<int64_t> shape, std::vector<S> data,
                       bool requires_grad = false);
    static Tensor scalar(S v);

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<int64_t>& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int64_t dim(int i) const { return d_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(d_->value.size()); }

    std::vector<S>& value() { return d_->value; }
    const std::vector<S>& value() const { return d_->value; }
    std::vector<S>& grad() { return d_->grad; }
    const std::vector<S>& grad() const { return d_->grad; }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool on);
    void zero_grad();

    S item() const;  // numel()==1 only

    TensorData<S>* node() const { return d_.get(); }

private:
    std::shared_ptr<TensorData<S>> d_;
};

// Ordered record of executed differentiable operations. backward() replays
// the record in exact reverse execution order, accumulating gradients
// additively. Confined to one training thread.
template <typename S>
class Tape {
public:
    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    void record(const char* name, std::function<void()> fn);
    void backward(const Tensor<S>& loss);
    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        const char* name;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
    bool recording_ = true;
};

// RAII guard disabling tape recording (inference / label generation).
template <typename S>
class NoGrad {
public:
    explicit NoGrad(Tape<S>& tape) : tape_(tape), prev_(tape.recording()) {
        tape_.set_recording(false);
    }
    ~NoGrad() { tape_.set_recording(prev_); }

private:
    Tape<S>& tape_;
    bool prev_;
};

// ---- differentiable operations ------------------------------------------

// input [B,Cin,H,W] * kernel [Cout,Cin,k,k] + bias [Cout] -> [B,Cout,H',W'],
// stride 1, H' = H + 2*padding - k + 1. Pass padding = -1 for "same" ((k-1)/2).
// bias may be an undefined Tensor for bias-free convolutions.
template <typename S>
Tensor<S> conv2d(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& kernel,
                 const Tensor<S>& bias, int64_t padding = -1);

// 2x2 window max, stride 2; gradient routes to the first row-major argmax.
template <typename S>
Tensor<S> max_pool2(Tape<S>& tape, const Tensor<S>& input);

// Nearest-neighbour x2; backward sums the 4 corresponding output grads.
template <typename S>
Tensor<S> upsample_nearest2(Tape<S>& tape, const Tensor<S>& input);

template <typename S>
Tensor<S> relu(Tape<S>& tape, const Tensor<S>& x);
template <typename S>
Tensor<S> sigmoid(Tape<S>& tape, const Tensor<S>& x);
template <typename S>
Tensor<S> abs_val(Tape<S>& tape, const Tensor<S>& x);

template <typename S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> sub(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> add_scalar(Tape<S>& tape, const Tensor<S>& x, S c);
template <typename S>
Tensor<S> mul_scalar(Tape<S>& tape, const Tensor<S>& x, S c);

// x [B,C,H,W] op y [B,C,1,1], y broadcast over the spatial extent.
template <typename S>
Tensor<S> add_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y);
template <typename S>
Tensor<S> sub_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y);
template <typename S>
Tensor<S> div_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y);

// Concatenate along dim 1 (channels of [B,C,H,W], tokens of [B,L,C]).
template <typename S>
Tensor<S> concat_dim1(Tape<S>& tape, const std::vector<Tensor<S>>& xs);
// Contiguous slice [start, start+len) along dim 1.
template <typename S>
Tensor<S> slice_dim1(Tape<S>& tape, const Tensor<S>& x, int64_t start, int64_t len);
// Concatenate along the last dim (per-head attention outputs).
template <typename S>
Tensor<S> concat_lastdim(Tape<S>& tape, const std::vector<Tensor<S>>& xs);

// x [N,din] * w [din,dout] (+ bias [dout]); bias may be undefined.
template <typename S>
Tensor<S> linear(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& w,
                 const Tensor<S>& bias);
// x [B,L,din] * w [din,dout], no bias (attention projections).
template <typename S>
Tensor<S> linear3(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& w);

template <typename S>
Tensor<S> matmul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b);
// Batched matmul on 3D tensors [B,n,k] x [B,k,m] (-> [B,n,m]); with
// transpose_b, b is [B,m,k].
template <typename S>
Tensor<S> bmm(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b,
              bool transpose_b = false);

// Softmax along `axis`; supported axes: last dim of any tensor, and dim 1 of
// a 4D tensor (class axis of [B,C,H,W] maps).
template <typename S>
Tensor<S> softmax(Tape<S>& tape, const Tensor<S>& x, int axis);
template <typename S>
Tensor<S> softmax_lastdim(Tape<S>& tape, const Tensor<S>& x);
template <typename S>
Tensor<S> softmax_channels(Tape<S>& tape, const Tensor<S>& x);

template <typename S>
Tensor<S> sum_all(Tape<S>& tape, const Tensor<S>& x);
template <typename S>
Tensor<S> mean_all(Tape<S>& tape, const Tensor<S>& x);
// [B,C,H,W] -> [B,C,1,1], mean over the spatial extent.
template <typename S>
Tensor<S> mean_spatial(Tape<S>& tape, const Tensor<S>& x);

template <typename S>
Tensor<S> reshape(Tape<S>& tape, const Tensor<S>& x, std::vector<int64_t> shape);
// Swap dims 1 and 2 of a 3D tensor.
template <typename S>
Tensor<S> transpose_12(Tape<S>& tape, const Tensor<S>& x);
template <typename S>
Tensor<S> transpose2d(Tape<S>& tape, const Tensor<S>& x);

// NaN/Inf guard applied to every op's forward output.
template <typename S>
void check_finite(const char* op, const std::vector<S>& v);

}  // namespace floodbench
