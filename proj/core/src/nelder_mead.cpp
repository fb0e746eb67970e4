#include "maisteer/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace maisteer {

NelderMeadResult nelder_mead_maximize(const std::function<double(const RVector &)> &f,
                                      const RVector &start, const RVector &step,
                                      const NelderMeadOptions &options) {
    const auto n = start.size();
    if (n == 0 || step.size() != n) {
        throw InputError("Nelder-Mead needs a non-empty start and a step of the same size");
    }
    // Minimize g = -f with the standard coefficients.
    constexpr double kReflect = 1.0;
    constexpr double kExpand = 2.0;
    constexpr double kContract = 0.5;
    constexpr double kShrink = 0.5;

    NelderMeadResult result;
    auto g = [&](const RVector &x) {
        ++result.evaluations;
        return -f(x);
    };

    std::vector<RVector> pts(static_cast<std::size_t>(n + 1), start);
    std::vector<double> vals(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        pts[static_cast<std::size_t>(i + 1)](i) += step(i);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vals[i] = g(pts[i]);
    }

    std::vector<std::size_t> order(pts.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    };
    auto diameter = [&] {
        double d = 0.0;
        const RVector &best = pts[order.front()];
        for (const auto &p : pts) {
            d = std::max(d, (p - best).norm());
        }
        return d;
    };

    sort_simplex();
    while (true) {
        if (diameter() < options.tolerance) {
            result.converged = true;
            break;
        }
        if (result.evaluations >= options.max_evaluations) {
            break;
        }
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];
        const std::size_t best = order.front();

        RVector centroid = RVector::Zero(n);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            centroid += pts[order[i]];
        }
        centroid /= static_cast<double>(n);

        const RVector reflected = centroid + kReflect * (centroid - pts[worst]);
        const double fr = g(reflected);
        if (fr < vals[best]) {
            const RVector expanded = centroid + kExpand * (reflected - centroid);
            const double fe = g(expanded);
            if (fe < fr) {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = reflected;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const RVector contracted = outside
                                           ? RVector(centroid + kContract * (reflected - centroid))
                                           : RVector(centroid + kContract * (pts[worst] - centroid));
            const double fc = g(contracted);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = contracted;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    if (i == best) {
                        continue;
                    }
                    pts[i] = pts[best] + kShrink * (pts[i] - pts[best]);
                    vals[i] = g(pts[i]);
                }
            }
        }
        sort_simplex();
    }

    result.x = pts[order.front()];
    result.value = -vals[order.front()];
    return result;
}

} // namespace maisteer
