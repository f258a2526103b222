#pragma once

#include "salience/layers.hpp"

#include <functional>
#include <span>
#include <string>

namespace salience::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Central finite differences against the gradients already stored in each
/// Params::grad. `loss` must recompute the scalar loss from current parameter
/// values without touching gradients. Step 1e-5 by default; entries whose
/// absolute disagreement is below `atol` count as matching (finite-difference
/// round-off dominates near-zero gradients). Graphs above 1e4 parameters or
/// non-finite losses are rejected.
GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<Params* const> params,
                               double step = 1e-5, double atol = 1e-8);

} // namespace salience::nn
