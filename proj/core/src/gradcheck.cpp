#include "salience/gradcheck.hpp"

#include "salience/common.hpp"

#include <algorithm>
#include <cmath>

namespace salience::nn {

GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<Params* const> params, double step, double atol) {
    std::size_t total = 0;
    for (const Params* p : params) total += p->value.size();
    if (total > 10000) throw DataError("gradient_check: graph too large (> 1e4 parameters)");

    if (!std::isfinite(loss())) throw NumericalError("gradient_check: non-finite loss");

    GradCheckReport report;
    for (Params* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            double saved = p->value[i];
            p->value[i] = saved + step;
            double plus = loss();
            p->value[i] = saved - step;
            double minus = loss();
            p->value[i] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw NumericalError("gradient_check: non-finite loss during perturbation");

            double numeric = (plus - minus) / (2.0 * step);
            double analytic = p->grad[i];
            if (std::abs(numeric - analytic) <= atol) continue;
            double denom = std::max(std::abs(numeric), std::abs(analytic));
            double rel = std::abs(numeric - analytic) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p->name;
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace salience::nn
