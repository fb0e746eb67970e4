#pragma once

#include <functional>

#include "maisteer/types.hpp"

namespace maisteer {

struct NelderMeadOptions {
    double tolerance = 1e-7; // stop once the simplex diameter drops below this
    int max_evaluations = 4000;
};

struct NelderMeadResult {
    RVector x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Maximizes f starting from a simplex spanned by `start` and `start + step_i e_i`.
/// The returned point is never worse than `start`.
NelderMeadResult nelder_mead_maximize(const std::function<double(const RVector &)> &f,
                                      const RVector &start, const RVector &step,
                                      const NelderMeadOptions &options = {});

} // namespace maisteer
