#include "dialectbert/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dialectbert {

AdamState AdamState::for_parameters(std::span<const Tensor> params, double learning_rate) {
    AdamState state;
    state.learning_rate = learning_rate;
    for (const Tensor& p : params) {
        state.m.emplace_back(p.numel(), 0.0);
        state.v.emplace_back(p.numel(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.m.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel()) {
            throw std::invalid_argument("adam_step: moment shape mismatch for parameter " + std::to_string(i) +
                                        " of shape " + shape_str(params[i].shape()));
        }
        for (const double g : params[i].grad()) {
            if (!std::isfinite(g)) {
                throw std::invalid_argument("adam_step: non-finite gradient in parameter " + std::to_string(i));
            }
        }
    }

    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto grad = params[i].grad();
        auto values = params[i].mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grad.empty() ? 0.0 : grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            values[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void zero_grads(std::span<Tensor> params) {
    for (Tensor& p : params) {
        p.zero_grad();
    }
}

}  // namespace dialectbert
