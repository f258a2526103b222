#pragma once

#include "salience/layers.hpp"

#include <cstdint>
#include <vector>

namespace salience::nn {

/// Adaptive moment estimation with bias correction. One state instance per
/// trained model; moments are laid out parallel to the parameter list.
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;

    void attach(const std::vector<Params*>& params);
};

/// One update: moments from current grads, bias-corrected step against the
/// gradient. Gradients are consumed (zeroed) afterwards.
void adam_step(const std::vector<Params*>& params, AdamState& state);

} // namespace salience::nn
