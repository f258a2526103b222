#include "salience/adam.hpp"

#include "salience/common.hpp"

#include <cmath>

namespace salience::nn {

void AdamState::attach(const std::vector<Params*>& params) {
    first_moment.clear();
    second_moment.clear();
    step_count = 0;
    for (const Params* p : params) {
        first_moment.emplace_back(p->value.shape());
        second_moment.emplace_back(p->value.shape());
    }
}

void adam_step(const std::vector<Params*>& params, AdamState& state) {
    if (state.first_moment.size() != params.size())
        throw DataError("adam_step: state not attached to this parameter list");

    ++state.step_count;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& value = params[p]->value;
        Tensor& grad = params[p]->grad;
        Tensor& m = state.first_moment[p];
        Tensor& v = state.second_moment[p];
        if (!grad.same_shape(value)) throw DataError("adam_step: gradient shape mismatch");

        for (std::size_t i = 0; i < value.size(); ++i) {
            double g = grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        grad.zero();
    }
}

} // namespace salience::nn
