#include "floodbench/optim.hpp"

#include <cmath>

namespace floodbench {

template <typename S>
void Adam<S>::step(NamedParams<S>& params, S lr) {
    if (state_.empty()) {
        state_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            const size_t n = params[i].second.value().size();
            state_[i].m.assign(n, S(0));
            state_[i].v.assign(n, S(0));
        }
    }
    if (state_.size() != params.size())
        throw ContractError("Adam::step: parameter list changed size");

    ++t_;
    const S c1 = S(1) - std::pow(beta1_, static_cast<S>(t_));
    const S c2 = S(1) - std::pow(beta2_, static_cast<S>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<S>& p = params[i].second;
        std::vector<S>& pv = p.value();
        const std::vector<S>& g = p.grad();
        std::vector<S>& m = state_[i].m;
        std::vector<S>& v = state_[i].v;
        if (m.size() != pv.size())
            throw ContractError("Adam::step: parameter " + params[i].first +
                                " changed size");
        for (size_t j = 0; j < pv.size(); ++j) {
            m[j] = beta1_ * m[j] + (S(1) - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (S(1) - beta2_) * g[j] * g[j];
            const S mhat = m[j] / c1;
            const S vhat = v[j] / c2;
            pv[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

template <typename S>
void Adam<S>::reset() {
    state_.clear();
    t_ = 0;
}

double lr_schedule(double initial, int epoch) {
    if (epoch < 0) throw ContractError("lr_schedule: negative epoch");
    return initial * std::pow(0.2, epoch / 60);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace floodbench
