#pragma once

#include "dialectbert/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dialectbert {

/// Bias-corrected Adam. Defaults follow the common fine-tuning library defaults
/// (no weight decay).
struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double learning_rate = 5e-5;

    /// Zeroed moments shaped like `params`.
    static AdamState for_parameters(std::span<const Tensor> params, double learning_rate = 5e-5);
};

/// One update of every parameter from its accumulated gradient (no gradient = zero).
/// Throws std::invalid_argument before touching anything if a gradient is non-finite
/// or the state does not match the parameter shapes.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grads(std::span<Tensor> params);

}  // namespace dialectbert
