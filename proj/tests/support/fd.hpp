#pragma once

// Central finite-difference oracle used by every gradient test. A check
// perturbs each slot of a buffer by +/-step, recomputes the scalar loss from
// scratch, and compares (hi - lo) / (2 step) against the analytic gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace fd {

struct Result {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
};

inline double rel_err(double analytic, double numeric, double guard = 1e-6) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), guard});
    return std::fabs(analytic - numeric) / denom;
}

// `slots` is the live buffer the loss reads from; `analytic` its gradient.
inline Result check(std::vector<double>& slots, const std::vector<double>& analytic,
                    const std::function<double()>& loss, double step = 1e-5,
                    double guard = 1e-6) {
    Result res;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double saved = slots[i];
        slots[i] = saved + step;
        const double hi = loss();
        slots[i] = saved - step;
        const double lo = loss();
        slots[i] = saved;
        const double numeric = (hi - lo) / (2.0 * step);
        const double err = rel_err(analytic[i], numeric, guard);
        if (err > res.max_rel_err) {
            res.max_rel_err = err;
            res.worst_index = i;
            res.worst_analytic = analytic[i];
            res.worst_fd = numeric;
        }
    }
    return res;
}

// Same, but only over a subset of slot indices (for large parameter sets).
inline Result check_sampled(std::vector<double>& slots, const std::vector<double>& analytic,
                            const std::function<double()>& loss,
                            const std::vector<std::size_t>& indices, double step = 1e-5,
                            double guard = 1e-6) {
    Result res;
    for (std::size_t i : indices) {
        const double saved = slots[i];
        slots[i] = saved + step;
        const double hi = loss();
        slots[i] = saved - step;
        const double lo = loss();
        slots[i] = saved;
        const double numeric = (hi - lo) / (2.0 * step);
        const double err = rel_err(analytic[i], numeric, guard);
        if (err > res.max_rel_err) {
            res.max_rel_err = err;
            res.worst_index = i;
            res.worst_analytic = analytic[i];
            res.worst_fd = numeric;
        }
    }
    return res;
}

}  // namespace fd
