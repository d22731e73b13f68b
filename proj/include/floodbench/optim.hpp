#pragma once

#include <string>
#include <utility>
#include <vector>

#include "floodbench/tensor.hpp"

namespace floodbench {

template <typename S>
using NamedParams = std::vector<std::pair<std::string, Tensor<S>>>;

// Adam with bias correction. State is keyed by parameter position, so the
// same optimizer instance must always see the same parameter list.
template <typename S>
class Adam {
public:
    explicit Adam(S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(NamedParams<S>& params, S lr);
    void reset();
    int64_t steps_taken() const { return t_; }

private:
    struct State {
        std::vector<S> m, v;
    };
    std::vector<State> state_;
    S beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

// Step decay: factor 0.2 every 60 epochs, applied at epoch boundaries.
double lr_schedule(double initial, int epoch);

}  // namespace floodbench
