#include "ampal/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ampal {

AdamState AdamState::init(const std::vector<Array>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.push_back(Array::zeros(p.shape));
        s.v.push_back(Array::zeros(p.shape));
    }
    return s;
}

void adam_step(std::vector<Array>& params, const std::vector<Array>& grads,
               AdamState& state, const AdamConfig& config) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw std::invalid_argument("adam_step: params/grads/state count mismatch");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i])) {
            throw std::invalid_argument("adam_step: shape mismatch at parameter " +
                                        std::to_string(i));
        }
        require_finite(grads[i], "adam_step gradients");
    }

    state.t += 1;
    const real bc1 = real(1) - std::pow(config.beta1, static_cast<real>(state.t));
    const real bc2 = real(1) - std::pow(config.beta2, static_cast<real>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (int64_t j = 0; j < p.size(); ++j) {
            m[j] = config.beta1 * m[j] + (real(1) - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (real(1) - config.beta2) * g[j] * g[j];
            const real mhat = m[j] / bc1;
            const real vhat = v[j] / bc2;
            p[j] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
        }
    }
}

}  // namespace ampal
