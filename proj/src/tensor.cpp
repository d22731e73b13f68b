#include "floodbench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace floodbench {

namespace {

int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t s : shape) {
        if (s <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        n *= s;
    }
    return n;
}

template <typename S>
void expect_rank(const Tensor<S>& t, int r, const char* op) {
    if (t.rank() != r)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) +
                         ", got shape " + shape_str(t.shape()));
}

template <typename S>
void expect_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

// Result tensor of an op: differentiable only when some input is and the tape
// is live, so inference builds no graph.
template <typename S>
Tensor<S> make_out(Tape<S>& tape, std::vector<int64_t> shape,
                   std::initializer_list<const Tensor<S>*> ins) {
    bool rg = false;
    for (const Tensor<S>* t : ins) rg = rg || (t->defined() && t->requires_grad());
    return Tensor<S>::zeros(std::move(shape), rg && tape.recording());
}

template <typename S>
void finish(Tape<S>& tape, const char* name, const Tensor<S>& out,
            std::function<void()> backward_fn) {
    check_finite(name, out.value());
    if (out.requires_grad()) tape.record(name, std::move(backward_fn));
}

// ---- matmul kernels (accumulate into c) ---------------------------------

// c[M,N] += a[M,K] * b[K,N]
template <typename S>
void mm_nn(const S* __restrict__ a, const S* __restrict__ b, S* __restrict__ c,
           int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        S* crow = c + i * N;
        const S* arow = a + i * K;
        for (int64_t k = 0; k < K; ++k) {
            const S av = arow[k];
            const S* brow = b + k * N;
            for (int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[M,N] += a[M,K] * b[N,K]^T  (rows of b are dotted against rows of a)
template <typename S>
void mm_nt(const S* __restrict__ a, const S* __restrict__ b, S* __restrict__ c,
           int64_t M, int64_t K, int64_t N) {
    constexpr int64_t VL = 16;
    for (int64_t i = 0; i < M; ++i) {
        const S* arow = a + i * K;
        S* crow = c + i * N;
        for (int64_t j = 0; j < N; ++j) {
            const S* brow = b + j * K;
            S part[VL] = {};
            int64_t k = 0;
            for (; k + VL <= K; k += VL)
                for (int64_t v = 0; v < VL; ++v) part[v] += arow[k + v] * brow[k + v];
            S acc = 0;
            for (; k < K; ++k) acc += arow[k] * brow[k];
            for (int64_t v = 0; v < VL; ++v) acc += part[v];
            crow[j] += acc;
        }
    }
}

// c[K,N] += a[M,K]^T * b[M,N]
template <typename S>
void mm_tn(const S* __restrict__ a, const S* __restrict__ b, S* __restrict__ c,
           int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const S* arow = a + i * K;
        const S* brow = b + i * N;
        for (int64_t k = 0; k < K; ++k) {
            const S av = arow[k];
            S* crow = c + k * N;
            for (int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---- convolution kernels ------------------------------------------------

template <typename S>
void conv_fwd(const S* __restrict__ in, const S* __restrict__ w, const S* bias,
              S* __restrict__ out, int64_t B, int64_t Cin, int64_t H, int64_t W,
              int64_t Cout, int64_t k, int64_t pad, int64_t Ho, int64_t Wo) {
    for (int64_t b = 0; b < B; ++b) {
        const S* in_b = in + b * Cin * H * W;
        S* out_b = out + b * Cout * Ho * Wo;
        for (int64_t co = 0; co < Cout; ++co) {
            S* out_p = out_b + co * Ho * Wo;
            const S bv = bias ? bias[co] : S(0);
            for (int64_t i = 0; i < Ho * Wo; ++i) out_p[i] = bv;
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const S* in_p = in_b + ci * H * W;
                const S* w_p = w + (co * Cin + ci) * k * k;
                for (int64_t ky = 0; ky < k; ++ky) {
                    const int64_t y0 = std::max<int64_t>(0, pad - ky);
                    const int64_t y1 = std::min(Ho, H + pad - ky);
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const S wv = w_p[ky * k + kx];
                        const int64_t x0 = std::max<int64_t>(0, pad - kx);
                        const int64_t x1 = std::min(Wo, W + pad - kx);
                        for (int64_t y = y0; y < y1; ++y) {
                            S* __restrict__ orow = out_p + y * Wo;
                            const S* __restrict__ irow =
                                in_p + (y + ky - pad) * W + (kx - pad);
                            for (int64_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename S>
void conv_bwd_input(const S* __restrict__ dout, const S* __restrict__ w,
                    S* __restrict__ din, int64_t B, int64_t Cin, int64_t H,
                    int64_t W, int64_t Cout, int64_t k, int64_t pad, int64_t Ho,
                    int64_t Wo) {
    for (int64_t b = 0; b < B; ++b) {
        const S* dout_b = dout + b * Cout * Ho * Wo;
        S* din_b = din + b * Cin * H * W;
        for (int64_t co = 0; co < Cout; ++co) {
            const S* dout_p = dout_b + co * Ho * Wo;
            for (int64_t ci = 0; ci < Cin; ++ci) {
                S* din_p = din_b + ci * H * W;
                const S* w_p = w + (co * Cin + ci) * k * k;
                for (int64_t ky = 0; ky < k; ++ky) {
                    const int64_t y0 = std::max<int64_t>(0, pad - ky);
                    const int64_t y1 = std::min(Ho, H + pad - ky);
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const S wv = w_p[ky * k + kx];
                        const int64_t x0 = std::max<int64_t>(0, pad - kx);
                        const int64_t x1 = std::min(Wo, W + pad - kx);
                        for (int64_t y = y0; y < y1; ++y) {
                            const S* __restrict__ grow = dout_p + y * Wo;
                            S* __restrict__ drow =
                                din_p + (y + ky - pad) * W + (kx - pad);
                            for (int64_t x = x0; x < x1; ++x) drow[x] += wv * grow[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename S>
void conv_bwd_weight(const S* __restrict__ dout, const S* __restrict__ in,
                     S* __restrict__ dw, int64_t B, int64_t Cin, int64_t H,
                     int64_t W, int64_t Cout, int64_t k, int64_t pad, int64_t Ho,
                     int64_t Wo) {
    constexpr int64_t VL = 16;
    for (int64_t b = 0; b < B; ++b) {
        const S* dout_b = dout + b * Cout * Ho * Wo;
        const S* in_b = in + b * Cin * H * W;
        for (int64_t co = 0; co < Cout; ++co) {
            const S* dout_p = dout_b + co * Ho * Wo;
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const S* in_p = in_b + ci * H * W;
                S* dw_p = dw + (co * Cin + ci) * k * k;
                for (int64_t ky = 0; ky < k; ++ky) {
                    const int64_t y0 = std::max<int64_t>(0, pad - ky);
                    const int64_t y1 = std::min(Ho, H + pad - ky);
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const int64_t x0 = std::max<int64_t>(0, pad - kx);
                        const int64_t x1 = std::min(Wo, W + pad - kx);
                        S part[VL] = {};
                        S acc = 0;
                        for (int64_t y = y0; y < y1; ++y) {
                            const S* __restrict__ grow = dout_p + y * Wo;
                            const S* __restrict__ irow =
                                in_p + (y + ky - pad) * W + (kx - pad);
                            int64_t x = x0;
                            for (; x + VL <= x1; x += VL)
                                for (int64_t v = 0; v < VL; ++v)
                                    part[v] += grow[x + v] * irow[x + v];
                            for (; x < x1; ++x) acc += grow[x] * irow[x];
                        }
                        for (int64_t v = 0; v < VL; ++v) acc += part[v];
                        dw_p[ky * k + kx] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace

// ---- Tensor -------------------------------------------------------------

template <typename S>
Tensor<S> Tensor<S>::zeros(std::vector<int64_t> shape, bool requires_grad) {
    Tensor<S> t;
    t.d_ = std::make_shared<TensorData<S>>();
    const int64_t n = numel_of(shape);
    t.d_->shape = std::move(shape);
    t.d_->value.assign(static_cast<size_t>(n), S(0));
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->grad.assign(static_cast<size_t>(n), S(0));
    return t;
}

template <typename S>
Tensor<S> Tensor<S>::from(std::vector<int64_t> shape, std::vector<S> data,
                          bool requires_grad) {
    const int64_t n = numel_of(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    Tensor<S> t;
    t.d_ = std::make_shared<TensorData<S>>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(data);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->grad.assign(static_cast<size_t>(n), S(0));
    return t;
}

template <typename S>
Tensor<S> Tensor<S>::scalar(S v) {
    return from({1}, {v});
}

template <typename S>
void Tensor<S>::set_requires_grad(bool on) {
    d_->requires_grad = on;
    if (on && d_->grad.size() != d_->value.size())
        d_->grad.assign(d_->value.size(), S(0));
}

template <typename S>
void Tensor<S>::zero_grad() {
    std::fill(d_->grad.begin(), d_->grad.end(), S(0));
}

template <typename S>
S Tensor<S>::item() const {
    if (numel() != 1)
        throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return d_->value[0];
}

// ---- Tape ---------------------------------------------------------------

template <typename S>
void Tape<S>::record(const char* name, std::function<void()> fn) {
    if (recording_) nodes_.push_back({name, std::move(fn)});
}

template <typename S>
void Tape<S>::backward(const Tensor<S>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward requires a scalar loss");
    if (!loss.requires_grad())
        throw ContractError("backward on a loss that does not require gradients");
    loss.node()->grad[0] = S(1);
    for (size_t i = nodes_.size(); i-- > 0;) nodes_[i].fn();
}

template <typename S>
void check_finite(const char* op, const std::vector<S>& v) {
    const S lim = std::numeric_limits<S>::max();
    for (const S x : v) {
        if (!(std::abs(x) <= lim))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

// ---- convolution / pooling / upsampling ---------------------------------

template <typename S>
Tensor<S> conv2d(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& kernel,
                 const Tensor<S>& bias, int64_t padding) {
    expect_rank(input, 4, "conv2d input");
    expect_rank(kernel, 4, "conv2d kernel");
    const int64_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2),
                  W = input.dim(3);
    const int64_t Cout = kernel.dim(0), k = kernel.dim(2);
    if (kernel.dim(1) != Cin)
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input has " + std::to_string(Cin));
    if (kernel.dim(3) != k) throw ShapeError("conv2d: kernel must be square");
    if (bias.defined()) {
        expect_rank(bias, 1, "conv2d bias");
        if (bias.dim(0) != Cout)
            throw ShapeError("conv2d: bias length " + std::to_string(bias.dim(0)) +
                             " vs " + std::to_string(Cout) + " output channels");
    }
    const int64_t pad = padding < 0 ? (k - 1) / 2 : padding;
    const int64_t Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
    if (Ho <= 0 || Wo <= 0)
        throw ShapeError("conv2d: kernel size " + std::to_string(k) +
                         " exceeds padded input " + shape_str(input.shape()));

    Tensor<S> out = bias.defined()
                        ? make_out(tape, {B, Cout, Ho, Wo}, {&input, &kernel, &bias})
                        : make_out(tape, {B, Cout, Ho, Wo}, {&input, &kernel});
    conv_fwd(input.value().data(), kernel.value().data(),
             bias.defined() ? bias.value().data() : nullptr, out.value().data(), B,
             Cin, H, W, Cout, k, pad, Ho, Wo);

    finish(tape, "conv2d", out, [=]() {
        const std::vector<S>& g = out.grad();
        if (input.requires_grad())
            conv_bwd_input(g.data(), kernel.value().data(), input.node()->grad.data(),
                           B, Cin, H, W, Cout, k, pad, Ho, Wo);
        if (kernel.requires_grad())
            conv_bwd_weight(g.data(), input.value().data(), kernel.node()->grad.data(),
                            B, Cin, H, W, Cout, k, pad, Ho, Wo);
        if (bias.defined() && bias.requires_grad()) {
            std::vector<S>& db = bias.node()->grad;
            for (int64_t b = 0; b < B; ++b)
                for (int64_t co = 0; co < Cout; ++co) {
                    const S* grow = g.data() + (b * Cout + co) * Ho * Wo;
                    S acc = 0;
                    for (int64_t i = 0; i < Ho * Wo; ++i) acc += grow[i];
                    db[static_cast<size_t>(co)] += acc;
                }
        }
    });
    return out;
}

template <typename S>
Tensor<S> max_pool2(Tape<S>& tape, const Tensor<S>& input) {
    expect_rank(input, 4, "max_pool2");
    const int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2),
                  W = input.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("max_pool2 requires even spatial dims, got " +
                         shape_str(input.shape()));
    const int64_t Ho = H / 2, Wo = W / 2;
    Tensor<S> out = make_out(tape, {B, C, Ho, Wo}, {&input});

    // Flat input index of each window maximum; ties go to the first element
    // in row-major window order.
    auto argmax = std::make_shared<std::vector<int64_t>>(
        static_cast<size_t>(B * C * Ho * Wo));
    const S* in = input.value().data();
    S* o = out.value().data();
    int64_t* am = argmax->data();
    for (int64_t p = 0; p < B * C; ++p) {
        const S* plane = in + p * H * W;
        const int64_t base = p * H * W;
        for (int64_t y = 0; y < Ho; ++y)
            for (int64_t x = 0; x < Wo; ++x) {
                const int64_t i00 = 2 * y * W + 2 * x;
                int64_t best = i00;
                S bv = plane[i00];
                const int64_t cand[3] = {i00 + 1, i00 + W, i00 + W + 1};
                for (int64_t c : cand)
                    if (plane[c] > bv) {
                        bv = plane[c];
                        best = c;
                    }
                const int64_t oi = p * Ho * Wo + y * Wo + x;
                o[oi] = bv;
                am[oi] = base + best;
            }
    }

    finish(tape, "max_pool2", out, [=]() {
        if (!input.requires_grad()) return;
        std::vector<S>& din = input.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<int64_t>& idx = *argmax;
        for (size_t i = 0; i < idx.size(); ++i)
            din[static_cast<size_t>(idx[i])] += g[i];
    });
    return out;
}

template <typename S>
Tensor<S> upsample_nearest2(Tape<S>& tape, const Tensor<S>& input) {
    expect_rank(input, 4, "upsample_nearest2");
    const int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2),
                  W = input.dim(3);
    const int64_t Ho = H * 2, Wo = W * 2;
    Tensor<S> out = make_out(tape, {B, C, Ho, Wo}, {&input});
    const S* in = input.value().data();
    S* o = out.value().data();
    for (int64_t p = 0; p < B * C; ++p) {
        const S* ip = in + p * H * W;
        S* op = o + p * Ho * Wo;
        for (int64_t y = 0; y < Ho; ++y) {
            const S* irow = ip + (y / 2) * W;
            S* orow = op + y * Wo;
            for (int64_t x = 0; x < Wo; ++x) orow[x] = irow[x / 2];
        }
    }

    finish(tape, "upsample_nearest2", out, [=]() {
        if (!input.requires_grad()) return;
        std::vector<S>& din = input.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t p = 0; p < B * C; ++p) {
            S* dp = din.data() + p * H * W;
            const S* gp = g.data() + p * Ho * Wo;
            for (int64_t y = 0; y < Ho; ++y) {
                S* drow = dp + (y / 2) * W;
                const S* grow = gp + y * Wo;
                for (int64_t x = 0; x < Wo; ++x) drow[x / 2] += grow[x];
            }
        }
    });
    return out;
}

// ---- elementwise --------------------------------------------------------

template <typename S>
Tensor<S> relu(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xi = x.value().data();
    S* o = out.value().data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = xi[i] > S(0) ? xi[i] : S(0);
    finish(tape, "relu", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<S>& v = x.value();
        for (int64_t i = 0; i < n; ++i)
            if (v[static_cast<size_t>(i)] > S(0)) dx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    });
    return out;
}

template <typename S>
Tensor<S> sigmoid(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xi = x.value().data();
    S* o = out.value().data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        const S v = xi[i];
        if (v >= S(0)) {
            o[i] = S(1) / (S(1) + std::exp(-v));
        } else {
            const S e = std::exp(v);
            o[i] = e / (S(1) + e);
        }
    }
    finish(tape, "sigmoid", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<S>& s = out.value();
        for (int64_t i = 0; i < n; ++i) {
            const S sv = s[static_cast<size_t>(i)];
            dx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * sv * (S(1) - sv);
        }
    });
    return out;
}

template <typename S>
Tensor<S> abs_val(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xi = x.value().data();
    S* o = out.value().data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = std::abs(xi[i]);
    finish(tape, "abs_val", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<S>& v = x.value();
        for (int64_t i = 0; i < n; ++i) {
            const S vi = v[static_cast<size_t>(i)];
            if (vi > S(0))
                dx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
            else if (vi < S(0))
                dx[static_cast<size_t>(i)] -= g[static_cast<size_t>(i)];
        }
    });
    return out;
}

namespace {

template <typename S, typename FwdFn, typename BwdA, typename BwdB>
Tensor<S> binary_elementwise(Tape<S>& tape, const char* name, const Tensor<S>& a,
                             const Tensor<S>& b, FwdFn fwd, BwdA ga, BwdB gb) {
    expect_same_shape(a, b, name);
    Tensor<S> out = make_out(tape, a.shape(), {&a, &b});
    const S* av = a.value().data();
    const S* bv = b.value().data();
    S* o = out.value().data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = fwd(av[i], bv[i]);
    finish(tape, name, out, [=]() {
        const std::vector<S>& g = out.grad();
        const std::vector<S>& avv = a.value();
        const std::vector<S>& bvv = b.value();
        if (a.requires_grad()) {
            std::vector<S>& da = a.node()->grad;
            for (int64_t i = 0; i < n; ++i) {
                const size_t u = static_cast<size_t>(i);
                da[u] += ga(g[u], avv[u], bvv[u]);
            }
        }
        if (b.requires_grad()) {
            std::vector<S>& db = b.node()->grad;
            for (int64_t i = 0; i < n; ++i) {
                const size_t u = static_cast<size_t>(i);
                db[u] += gb(g[u], avv[u], bvv[u]);
            }
        }
    });
    return out;
}

}  // namespace

template <typename S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise(
        tape, "add", a, b, [](S x, S y) { return x + y; },
        [](S g, S, S) { return g; }, [](S g, S, S) { return g; });
}

template <typename S>
Tensor<S> sub(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise(
        tape, "sub", a, b, [](S x, S y) { return x - y; },
        [](S g, S, S) { return g; }, [](S g, S, S) { return -g; });
}

template <typename S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    return binary_elementwise(
        tape, "mul", a, b, [](S x, S y) { return x * y; },
        [](S g, S, S y) { return g * y; }, [](S g, S x, S) { return g * x; });
}

template <typename S>
Tensor<S> add_scalar(Tape<S>& tape, const Tensor<S>& x, S c) {
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xi = x.value().data();
    S* o = out.value().data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = xi[i] + c;
    finish(tape, "add_scalar", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t i = 0; i < n; ++i) dx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    });
    return out;
}

template <typename S>
Tensor<S> mul_scalar(Tape<S>& tape, const Tensor<S>& x, S c) {
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xi = x.value().data();
    S* o = out.value().data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = xi[i] * c;
    finish(tape, "mul_scalar", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t i = 0; i < n; ++i) dx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * c;
    });
    return out;
}

// ---- spatial broadcast --------------------------------------------------

namespace {

template <typename S>
void expect_bc(const Tensor<S>& x, const Tensor<S>& y, const char* op) {
    expect_rank(x, 4, op);
    expect_rank(y, 4, op);
    if (y.dim(0) != x.dim(0) || y.dim(1) != x.dim(1) || y.dim(2) != 1 ||
        y.dim(3) != 1)
        throw ShapeError(std::string(op) + ": broadcast operand must be [" +
                         std::to_string(x.dim(0)) + "," + std::to_string(x.dim(1)) +
                         ",1,1], got " + shape_str(y.shape()));
}

}  // namespace

template <typename S>
Tensor<S> add_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y) {
    expect_bc(x, y, "add_bc");
    const int64_t P = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<S> out = make_out(tape, x.shape(), {&x, &y});
    const S* xv = x.value().data();
    const S* yv = y.value().data();
    S* o = out.value().data();
    for (int64_t p = 0; p < P; ++p) {
        const S c = yv[p];
        for (int64_t i = 0; i < HW; ++i) o[p * HW + i] = xv[p * HW + i] + c;
    }
    finish(tape, "add_bc", out, [=]() {
        const std::vector<S>& g = out.grad();
        if (x.requires_grad()) {
            std::vector<S>& dx = x.node()->grad;
            for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (y.requires_grad()) {
            std::vector<S>& dy = y.node()->grad;
            for (int64_t p = 0; p < P; ++p) {
                S acc = 0;
                for (int64_t i = 0; i < HW; ++i) acc += g[static_cast<size_t>(p * HW + i)];
                dy[static_cast<size_t>(p)] += acc;
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> sub_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y) {
    expect_bc(x, y, "sub_bc");
    const int64_t P = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<S> out = make_out(tape, x.shape(), {&x, &y});
    const S* xv = x.value().data();
    const S* yv = y.value().data();
    S* o = out.value().data();
    for (int64_t p = 0; p < P; ++p) {
        const S c = yv[p];
        for (int64_t i = 0; i < HW; ++i) o[p * HW + i] = xv[p * HW + i] - c;
    }
    finish(tape, "sub_bc", out, [=]() {
        const std::vector<S>& g = out.grad();
        if (x.requires_grad()) {
            std::vector<S>& dx = x.node()->grad;
            for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (y.requires_grad()) {
            std::vector<S>& dy = y.node()->grad;
            for (int64_t p = 0; p < P; ++p) {
                S acc = 0;
                for (int64_t i = 0; i < HW; ++i) acc += g[static_cast<size_t>(p * HW + i)];
                dy[static_cast<size_t>(p)] -= acc;
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> div_bc(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& y) {
    expect_bc(x, y, "div_bc");
    const int64_t P = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<S> out = make_out(tape, x.shape(), {&x, &y});
    const S* xv = x.value().data();
    const S* yv = y.value().data();
    S* o = out.value().data();
    for (int64_t p = 0; p < P; ++p) {
        const S inv = S(1) / yv[p];
        for (int64_t i = 0; i < HW; ++i) o[p * HW + i] = xv[p * HW + i] * inv;
    }
    finish(tape, "div_bc", out, [=]() {
        const std::vector<S>& g = out.grad();
        const std::vector<S>& ov = out.value();
        const std::vector<S>& yvv = y.value();
        if (x.requires_grad()) {
            std::vector<S>& dx = x.node()->grad;
            for (int64_t p = 0; p < P; ++p) {
                const S inv = S(1) / yvv[static_cast<size_t>(p)];
                for (int64_t i = 0; i < HW; ++i) {
                    const size_t u = static_cast<size_t>(p * HW + i);
                    dx[u] += g[u] * inv;
                }
            }
        }
        if (y.requires_grad()) {
            std::vector<S>& dy = y.node()->grad;
            for (int64_t p = 0; p < P; ++p) {
                const S inv = S(1) / yvv[static_cast<size_t>(p)];
                S acc = 0;
                for (int64_t i = 0; i < HW; ++i) {
                    const size_t u = static_cast<size_t>(p * HW + i);
                    acc += g[u] * ov[u];
                }
                dy[static_cast<size_t>(p)] -= acc * inv;
            }
        }
    });
    return out;
}

// ---- concatenation ------------------------------------------------------

template <typename S>
Tensor<S> concat_dim1(Tape<S>& tape, const std::vector<Tensor<S>>& xs) {
    if (xs.empty()) throw ShapeError("concat_dim1 on empty input list");
    const int r = xs[0].rank();
    if (r < 2) throw ShapeError("concat_dim1 requires rank >= 2");
    int64_t Ctot = 0;
    for (const Tensor<S>& t : xs) {
        if (t.rank() != r)
            throw ShapeError("concat_dim1: rank mismatch " + shape_str(t.shape()) +
                             " vs " + shape_str(xs[0].shape()));
        for (int d = 0; d < r; ++d)
            if (d != 1 && t.dim(d) != xs[0].dim(d))
                throw ShapeError("concat_dim1: dim mismatch " + shape_str(t.shape()) +
                                 " vs " + shape_str(xs[0].shape()));
        Ctot += t.dim(1);
    }
    const int64_t B = xs[0].dim(0);
    int64_t inner = 1;
    for (int d = 2; d < r; ++d) inner *= xs[0].dim(d);

    std::vector<int64_t> oshape = xs[0].shape();
    oshape[1] = Ctot;
    bool rg = false;
    for (const Tensor<S>& t : xs) rg = rg || t.requires_grad();
    Tensor<S> out = Tensor<S>::zeros(std::move(oshape), rg && tape.recording());

    S* o = out.value().data();
    for (int64_t b = 0; b < B; ++b) {
        int64_t off = 0;
        for (const Tensor<S>& t : xs) {
            const int64_t sz = t.dim(1) * inner;
            std::memcpy(o + (b * Ctot) * inner + off, t.value().data() + b * sz,
                        static_cast<size_t>(sz) * sizeof(S));
            off += sz;
        }
    }

    auto inputs = xs;
    finish(tape, "concat_dim1", out, [out, inputs, B, Ctot, inner]() {
        const std::vector<S>& g = out.grad();
        for (int64_t b = 0; b < B; ++b) {
            int64_t off = 0;
            for (const Tensor<S>& t : inputs) {
                const int64_t sz = t.dim(1) * inner;
                if (t.requires_grad()) {
                    S* dst = t.node()->grad.data() + b * sz;
                    const S* src = g.data() + (b * Ctot) * inner + off;
                    for (int64_t i = 0; i < sz; ++i) dst[i] += src[i];
                }
                off += sz;
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> slice_dim1(Tape<S>& tape, const Tensor<S>& x, int64_t start, int64_t len) {
    const int r = x.rank();
    if (r < 2) throw ShapeError("slice_dim1 requires rank >= 2");
    const int64_t C = x.dim(1);
    if (start < 0 || len <= 0 || start + len > C)
        throw ShapeError("slice_dim1: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") outside dim of size " +
                         std::to_string(C));
    const int64_t B = x.dim(0);
    int64_t inner = 1;
    for (int d = 2; d < r; ++d) inner *= x.dim(d);
    std::vector<int64_t> oshape = x.shape();
    oshape[1] = len;
    Tensor<S> out = make_out(tape, std::move(oshape), {&x});
    S* o = out.value().data();
    const S* xv = x.value().data();
    for (int64_t b = 0; b < B; ++b)
        std::memcpy(o + b * len * inner, xv + (b * C + start) * inner,
                    static_cast<size_t>(len * inner) * sizeof(S));
    finish(tape, "slice_dim1", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t b = 0; b < B; ++b) {
            S* dst = dx.data() + (b * C + start) * inner;
            const S* src = g.data() + b * len * inner;
            for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
    return out;
}

template <typename S>
Tensor<S> concat_lastdim(Tape<S>& tape, const std::vector<Tensor<S>>& xs) {
    if (xs.empty()) throw ShapeError("concat_lastdim on empty input list");
    const int r = xs[0].rank();
    int64_t rows = 1;
    for (int d = 0; d < r - 1; ++d) rows *= xs[0].dim(d);
    int64_t Dtot = 0;
    for (const Tensor<S>& t : xs) {
        if (t.rank() != r)
            throw ShapeError("concat_lastdim: rank mismatch " + shape_str(t.shape()) +
                             " vs " + shape_str(xs[0].shape()));
        for (int d = 0; d < r - 1; ++d)
            if (t.dim(d) != xs[0].dim(d))
                throw ShapeError("concat_lastdim: dim mismatch " +
                                 shape_str(t.shape()) + " vs " +
                                 shape_str(xs[0].shape()));
        Dtot += t.dim(r - 1);
    }
    std::vector<int64_t> oshape = xs[0].shape();
    oshape[static_cast<size_t>(r - 1)] = Dtot;
    bool rg = false;
    for (const Tensor<S>& t : xs) rg = rg || t.requires_grad();
    Tensor<S> out = Tensor<S>::zeros(std::move(oshape), rg && tape.recording());

    S* o = out.value().data();
    for (int64_t row = 0; row < rows; ++row) {
        int64_t off = 0;
        for (const Tensor<S>& t : xs) {
            const int64_t sz = t.dim(r - 1);
            std::memcpy(o + row * Dtot + off, t.value().data() + row * sz,
                        static_cast<size_t>(sz) * sizeof(S));
            off += sz;
        }
    }

    auto inputs = xs;
    finish(tape, "concat_lastdim", out, [out, inputs, rows, Dtot, r]() {
        const std::vector<S>& g = out.grad();
        for (int64_t row = 0; row < rows; ++row) {
            int64_t off = 0;
            for (const Tensor<S>& t : inputs) {
                const int64_t sz = t.dim(r - 1);
                if (t.requires_grad()) {
                    S* dst = t.node()->grad.data() + row * sz;
                    const S* src = g.data() + row * Dtot + off;
                    for (int64_t i = 0; i < sz; ++i) dst[i] += src[i];
                }
                off += sz;
            }
        }
    });
    return out;
}

// ---- linear / matmul ----------------------------------------------------

namespace {

template <typename S>
Tensor<S> linear_impl(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& w,
                      const Tensor<S>& bias, int64_t N, int64_t din, int64_t dout,
                      std::vector<int64_t> oshape) {
    Tensor<S> out = bias.defined() ? make_out(tape, std::move(oshape), {&x, &w, &bias})
                                   : make_out(tape, std::move(oshape), {&x, &w});
    S* o = out.value().data();
    mm_nn(x.value().data(), w.value().data(), o, N, din, dout);
    if (bias.defined()) {
        const S* bv = bias.value().data();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = 0; j < dout; ++j) o[i * dout + j] += bv[j];
    }
    finish(tape, "linear", out, [=]() {
        const std::vector<S>& g = out.grad();
        if (x.requires_grad())
            mm_nt(g.data(), w.value().data(), x.node()->grad.data(), N, dout, din);
        if (w.requires_grad())
            mm_tn(x.value().data(), g.data(), w.node()->grad.data(), N, din, dout);
        if (bias.defined() && bias.requires_grad()) {
            std::vector<S>& db = bias.node()->grad;
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < dout; ++j)
                    db[static_cast<size_t>(j)] += g[static_cast<size_t>(i * dout + j)];
        }
    });
    return out;
}

}  // namespace

template <typename S>
Tensor<S> linear(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& w,
                 const Tensor<S>& bias) {
    expect_rank(x, 2, "linear input");
    expect_rank(w, 2, "linear weight");
    const int64_t N = x.dim(0), din = x.dim(1);
    if (w.dim(0) != din)
        throw ShapeError("linear: input features " + std::to_string(din) +
                         " vs weight rows " + std::to_string(w.dim(0)));
    const int64_t dout = w.dim(1);
    if (bias.defined()) {
        expect_rank(bias, 1, "linear bias");
        if (bias.dim(0) != dout)
            throw ShapeError("linear: bias length " + std::to_string(bias.dim(0)) +
                             " vs " + std::to_string(dout) + " outputs");
    }
    return linear_impl(tape, x, w, bias, N, din, dout, {N, dout});
}

template <typename S>
Tensor<S> linear3(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& w) {
    expect_rank(x, 3, "linear3 input");
    expect_rank(w, 2, "linear3 weight");
    const int64_t B = x.dim(0), L = x.dim(1), din = x.dim(2);
    if (w.dim(0) != din)
        throw ShapeError("linear3: input features " + std::to_string(din) +
                         " vs weight rows " + std::to_string(w.dim(0)));
    return linear_impl(tape, x, w, Tensor<S>(), B * L, din, w.dim(1),
                       {B, L, w.dim(1)});
}

template <typename S>
Tensor<S> matmul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    expect_rank(a, 2, "matmul lhs");
    expect_rank(b, 2, "matmul rhs");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    return linear_impl(tape, a, b, Tensor<S>(), a.dim(0), a.dim(1), b.dim(1),
                       {a.dim(0), b.dim(1)});
}

template <typename S>
Tensor<S> bmm(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b,
              bool transpose_b) {
    expect_rank(a, 3, "bmm lhs");
    expect_rank(b, 3, "bmm rhs");
    const int64_t B = a.dim(0), n = a.dim(1), k = a.dim(2);
    if (b.dim(0) != B)
        throw ShapeError("bmm: batch mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const int64_t m = transpose_b ? b.dim(1) : b.dim(2);
    const int64_t bk = transpose_b ? b.dim(2) : b.dim(1);
    if (bk != k)
        throw ShapeError("bmm: inner dim mismatch " + shape_str(a.shape()) +
                         (transpose_b ? " x^T " : " x ") + shape_str(b.shape()));
    Tensor<S> out = make_out(tape, {B, n, m}, {&a, &b});
    const S* av = a.value().data();
    const S* bv = b.value().data();
    S* o = out.value().data();
    for (int64_t s = 0; s < B; ++s) {
        const S* as = av + s * n * k;
        const S* bs = bv + s * k * m;
        S* os = o + s * n * m;
        if (transpose_b)
            mm_nt(as, bs, os, n, k, m);
        else
            mm_nn(as, bs, os, n, k, m);
    }
    finish(tape, "bmm", out, [=]() {
        const std::vector<S>& g = out.grad();
        for (int64_t s = 0; s < B; ++s) {
            const S* gs = g.data() + s * n * m;
            const S* as = a.value().data() + s * n * k;
            const S* bs = b.value().data() + s * k * m;
            if (a.requires_grad()) {
                S* da = a.node()->grad.data() + s * n * k;
                if (transpose_b)
                    mm_nn(gs, bs, da, n, m, k);
                else
                    mm_nt(gs, bs, da, n, m, k);
            }
            if (b.requires_grad()) {
                S* db = b.node()->grad.data() + s * k * m;
                if (transpose_b)
                    mm_tn(gs, as, db, n, m, k);
                else
                    mm_tn(as, gs, db, n, k, m);
            }
        }
    });
    return out;
}

// ---- softmax ------------------------------------------------------------

template <typename S>
Tensor<S> softmax_lastdim(Tape<S>& tape, const Tensor<S>& x) {
    const int r = x.rank();
    const int64_t n = x.dim(r - 1);
    const int64_t rows = x.numel() / n;
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xv = x.value().data();
    S* o = out.value().data();
    for (int64_t row = 0; row < rows; ++row) {
        const S* xr = xv + row * n;
        S* orow = o + row * n;
        S mx = xr[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        S sum = 0;
        for (int64_t i = 0; i < n; ++i) {
            orow[i] = std::exp(xr[i] - mx);
            sum += orow[i];
        }
        const S inv = S(1) / sum;
        for (int64_t i = 0; i < n; ++i) orow[i] *= inv;
    }
    finish(tape, "softmax_lastdim", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<S>& s = out.value();
        for (int64_t row = 0; row < rows; ++row) {
            const S* gr = g.data() + row * n;
            const S* sr = s.data() + row * n;
            S dot = 0;
            for (int64_t i = 0; i < n; ++i) dot += gr[i] * sr[i];
            S* dr = dx.data() + row * n;
            for (int64_t i = 0; i < n; ++i) dr[i] += sr[i] * (gr[i] - dot);
        }
    });
    return out;
}

template <typename S>
Tensor<S> softmax_channels(Tape<S>& tape, const Tensor<S>& x) {
    expect_rank(x, 4, "softmax_channels");
    const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<S> out = make_out(tape, x.shape(), {&x});
    const S* xv = x.value().data();
    S* o = out.value().data();
    for (int64_t b = 0; b < B; ++b) {
        const S* xb = xv + b * C * HW;
        S* ob = o + b * C * HW;
        for (int64_t i = 0; i < HW; ++i) {
            S mx = xb[i];
            for (int64_t c = 1; c < C; ++c) mx = std::max(mx, xb[c * HW + i]);
            S sum = 0;
            for (int64_t c = 0; c < C; ++c) {
                const S e = std::exp(xb[c * HW + i] - mx);
                ob[c * HW + i] = e;
                sum += e;
            }
            const S inv = S(1) / sum;
            for (int64_t c = 0; c < C; ++c) ob[c * HW + i] *= inv;
        }
    }
    finish(tape, "softmax_channels", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        const std::vector<S>& s = out.value();
        for (int64_t b = 0; b < B; ++b) {
            const S* gb = g.data() + b * C * HW;
            const S* sb = s.data() + b * C * HW;
            S* db = dx.data() + b * C * HW;
            for (int64_t i = 0; i < HW; ++i) {
                S dot = 0;
                for (int64_t c = 0; c < C; ++c) dot += gb[c * HW + i] * sb[c * HW + i];
                for (int64_t c = 0; c < C; ++c)
                    db[c * HW + i] += sb[c * HW + i] * (gb[c * HW + i] - dot);
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> softmax(Tape<S>& tape, const Tensor<S>& x, int axis) {
    const int r = x.rank();
    if (axis == -1 || axis == r - 1) return softmax_lastdim(tape, x);
    if (axis == 1 && r == 4) return softmax_channels(tape, x);
    throw ShapeError("softmax: unsupported axis " + std::to_string(axis) +
                     " for shape " + shape_str(x.shape()));
}

// ---- reductions ---------------------------------------------------------

namespace {

template <typename S>
S sum_fixed_order(const S* v, int64_t n) {
    constexpr int64_t VL = 16;
    S part[VL] = {};
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        for (int64_t j = 0; j < VL; ++j) part[j] += v[i + j];
    S acc = 0;
    for (; i < n; ++i) acc += v[i];
    for (int64_t j = 0; j < VL; ++j) acc += part[j];
    return acc;
}

}  // namespace

template <typename S>
Tensor<S> sum_all(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = make_out(tape, {1}, {&x});
    out.value()[0] = sum_fixed_order(x.value().data(), x.numel());
    finish(tape, "sum_all", out, [=]() {
        if (!x.requires_grad()) return;
        const S g = out.grad()[0];
        std::vector<S>& dx = x.node()->grad;
        for (S& d : dx) d += g;
    });
    return out;
}

template <typename S>
Tensor<S> mean_all(Tape<S>& tape, const Tensor<S>& x) {
    const int64_t n = x.numel();
    Tensor<S> out = make_out(tape, {1}, {&x});
    out.value()[0] = sum_fixed_order(x.value().data(), n) / static_cast<S>(n);
    finish(tape, "mean_all", out, [=]() {
        if (!x.requires_grad()) return;
        const S g = out.grad()[0] / static_cast<S>(n);
        std::vector<S>& dx = x.node()->grad;
        for (S& d : dx) d += g;
    });
    return out;
}

template <typename S>
Tensor<S> mean_spatial(Tape<S>& tape, const Tensor<S>& x) {
    expect_rank(x, 4, "mean_spatial");
    const int64_t P = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<S> out = make_out(tape, {x.dim(0), x.dim(1), 1, 1}, {&x});
    const S* xv = x.value().data();
    S* o = out.value().data();
    for (int64_t p = 0; p < P; ++p)
        o[p] = sum_fixed_order(xv + p * HW, HW) / static_cast<S>(HW);
    finish(tape, "mean_spatial", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t p = 0; p < P; ++p) {
            const S gp = g[static_cast<size_t>(p)] / static_cast<S>(HW);
            S* dp = dx.data() + p * HW;
            for (int64_t i = 0; i < HW; ++i) dp[i] += gp;
        }
    });
    return out;
}

// ---- shape ops ----------------------------------------------------------

template <typename S>
Tensor<S> reshape(Tape<S>& tape, const Tensor<S>& x, std::vector<int64_t> shape) {
    if (numel_of(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape) + " changes element count");
    Tensor<S> out = make_out(tape, std::move(shape), {&x});
    std::copy(x.value().begin(), x.value().end(), out.value().begin());
    finish(tape, "reshape", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
    return out;
}

template <typename S>
Tensor<S> transpose_12(Tape<S>& tape, const Tensor<S>& x) {
    expect_rank(x, 3, "transpose_12");
    const int64_t B = x.dim(0), X = x.dim(1), Y = x.dim(2);
    Tensor<S> out = make_out(tape, {B, Y, X}, {&x});
    const S* xv = x.value().data();
    S* o = out.value().data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < X; ++i)
            for (int64_t j = 0; j < Y; ++j)
                o[(b * Y + j) * X + i] = xv[(b * X + i) * Y + j];
    finish(tape, "transpose_12", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < X; ++i)
                for (int64_t j = 0; j < Y; ++j)
                    dx[static_cast<size_t>((b * X + i) * Y + j)] +=
                        g[static_cast<size_t>((b * Y + j) * X + i)];
    });
    return out;
}

template <typename S>
Tensor<S> transpose2d(Tape<S>& tape, const Tensor<S>& x) {
    expect_rank(x, 2, "transpose2d");
    const int64_t M = x.dim(0), N = x.dim(1);
    Tensor<S> out = make_out(tape, {N, M}, {&x});
    const S* xv = x.value().data();
    S* o = out.value().data();
    for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) o[j * M + i] = xv[i * N + j];
    finish(tape, "transpose2d", out, [=]() {
        if (!x.requires_grad()) return;
        std::vector<S>& dx = x.node()->grad;
        const std::vector<S>& g = out.grad();
        for (int64_t i = 0; i < M; ++i)
            for (int64_t j = 0; j < N; ++j)
                dx[static_cast<size_t>(i * N + j)] += g[static_cast<size_t>(j * M + i)];
    });
    return out;
}

// ---- explicit instantiations --------------------------------------------

#define FB_INSTANTIATE_TENSOR(S)                                                     \
    template class Tensor<S>;                                                        \
    template class Tape<S>;                                                          \
    template void check_finite<S>(const char*, const std::vector<S>&);               \
    template Tensor<S> conv2d<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&,       \
                                 const Tensor<S>&, int64_t);                         \
    template Tensor<S> max_pool2<S>(Tape<S>&, const Tensor<S>&);                     \
    template Tensor<S> upsample_nearest2<S>(Tape<S>&, const Tensor<S>&);             \
    template Tensor<S> relu<S>(Tape<S>&, const Tensor<S>&);                          \
    template Tensor<S> sigmoid<S>(Tape<S>&, const Tensor<S>&);                       \
    template Tensor<S> abs_val<S>(Tape<S>&, const Tensor<S>&);                       \
    template Tensor<S> add<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);         \
    template Tensor<S> sub<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);         \
    template Tensor<S> mul<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);         \
    template Tensor<S> add_scalar<S>(Tape<S>&, const Tensor<S>&, S);                 \
    template Tensor<S> mul_scalar<S>(Tape<S>&, const Tensor<S>&, S);                 \
    template Tensor<S> add_bc<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);      \
    template Tensor<S> sub_bc<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);      \
    template Tensor<S> div_bc<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);      \
    template Tensor<S> concat_dim1<S>(Tape<S>&, const std::vector<Tensor<S>>&);      \
    template Tensor<S> slice_dim1<S>(Tape<S>&, const Tensor<S>&, int64_t, int64_t);  \
    template Tensor<S> concat_lastdim<S>(Tape<S>&, const std::vector<Tensor<S>>&);   \
    template Tensor<S> linear<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&,       \
                                 const Tensor<S>&);                                  \
    template Tensor<S> linear3<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);     \
    template Tensor<S> matmul<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&);      \
    template Tensor<S> bmm<S>(Tape<S>&, const Tensor<S>&, const Tensor<S>&, bool);   \
    template Tensor<S> softmax<S>(Tape<S>&, const Tensor<S>&, int);                  \
    template Tensor<S> softmax_lastdim<S>(Tape<S>&, const Tensor<S>&);               \
    template Tensor<S> softmax_channels<S>(Tape<S>&, const Tensor<S>&);              \
    template Tensor<S> sum_all<S>(Tape<S>&, const Tensor<S>&);                       \
    template Tensor<S> mean_all<S>(Tape<S>&, const Tensor<S>&);                      \
    template Tensor<S> mean_spatial<S>(Tape<S>&, const Tensor<S>&);                  \
    template Tensor<S> reshape<S>(Tape<S>&, const Tensor<S>&, std::vector<int64_t>); \
    template Tensor<S> transpose_12<S>(Tape<S>&, const Tensor<S>&);                  \
    template Tensor<S> transpose2d<S>(Tape<S>&, const Tensor<S>&);

FB_INSTANTIATE_TENSOR(float)
FB_INSTANTIATE_TENSOR(double)

}  // namespace floodbench
