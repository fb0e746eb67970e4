#include "maisteer/gaussian_cv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace maisteer::cv {

namespace {

constexpr int kXA = 0, kPA = 1, kXB = 2, kPB = 3;

Vector4 unit(int i) { return Vector4::Unit(i); }

bool limit_of(const TmsConfig &cfg, Variant variant) {
    return variant == Variant::mai_limit || (variant == Variant::mai && std::isinf(cfg.r2));
}

// Minimizes a convex function of one gain over [-bound, bound]. Brent stops
// near sqrt(eps) in the abscissa; the variances are quadratic in the gain,
// so one parabolic step through three nearby points finishes the job.
double minimize_gain(const std::function<double(double)> &f, double bound) {
    const double x = boost::math::tools::brent_find_minima(f, -bound, bound,
                                                           std::numeric_limits<double>::digits)
                         .first;
    const double h = 1e-3 * std::max(1.0, std::abs(x));
    const double lo = f(x - h), mid = f(x), hi = f(x + h);
    const double curvature = lo - 2.0 * mid + hi;
    if (!(curvature > 0.0)) {
        return x;
    }
    const double polished = x - 0.5 * h * (hi - lo) / curvature;
    return f(polished) <= mid ? polished : x;
}

} // namespace

void validate(const TmsConfig &cfg) {
    if (!std::isfinite(cfg.r) || cfg.r < 0.0) {
        throw InputError("r must be finite and >= 0");
    }
    if (std::isnan(cfg.r2) || cfg.r2 < 0.0) {
        throw InputError("r2 must be >= 0");
    }
    if (!std::isfinite(cfg.sigma) || cfg.sigma < 0.0) {
        throw InputError("sigma must be finite and >= 0");
    }
}

Matrix4 symplectic_form() {
    Matrix4 omega = Matrix4::Zero();
    omega(kXA, kPA) = omega(kXB, kPB) = 1.0;
    omega(kPA, kXA) = omega(kPB, kXB) = -1.0;
    return omega;
}

double commutator_factor(const Vector4 &c1, const Vector4 &c2) {
    return c1.dot(symplectic_form() * c2);
}

double GaussianState::uncertainty_margin() const {
    const Eigen::Matrix4cd h = cov.cast<Complex>() + Complex(0.0, 0.5) * symplectic_form().cast<Complex>();
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>(h, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

bool GaussianState::is_physical(double tol) const { return uncertainty_margin() >= -tol; }

double GaussianState::variance(const Vector4 &c) const { return c.dot(cov * c); }

Matrix4 two_mode_squeezer(double r) {
    const double ch = std::cosh(r), sh = std::sinh(r);
    Matrix4 s = ch * Matrix4::Identity();
    s(kXA, kXB) = s(kXB, kXA) = -sh;
    s(kPA, kPB) = s(kPB, kPA) = sh;
    return s;
}

GaussianState two_mode_squeezed_vacuum(double r) {
    const Matrix4 s = two_mode_squeezer(r);
    GaussianState out;
    out.cov = 0.5 * s * s.transpose();
    return out;
}

double analytic_delta(const TmsConfig &cfg, Variant variant) {
    validate(cfg);
    const double c = std::cosh(2.0 * cfg.r);
    const double t = std::tanh(2.0 * cfg.r);
    const double s2 = cfg.sigma * cfg.sigma;
    const double d = 1.0 / (2.0 * c) + (1.0 + t * t) * s2;
    if (variant == Variant::linear) {
        return 1.0 / d - 4.0 * d;
    }
    if (limit_of(cfg, variant)) {
        const double sh = std::sinh(2.0 * cfg.r);
        return (1.0 + std::cosh(4.0 * cfg.r)) / (c + 2.0 * s2 * sh * sh) - 4.0 * d;
    }
    const double e = std::exp(2.0 * cfg.r2);
    return e / (e / (2.0 * c) + (1.0 + e * t * t) * s2) - 4.0 * d;
}

Gains optimal_gains(const TmsConfig &cfg, Variant variant) {
    validate(cfg);
    if (cfg.sigma > 0.0) {
        throw UnsupportedConfigurationError("optimal_gains: closed form only for sigma = 0");
    }
    if (limit_of(cfg, variant)) {
        throw UnsupportedConfigurationError("optimal_gains: g_y diverges as r2 -> infinity");
    }
    const double t = std::tanh(2.0 * cfg.r);
    Gains g{-t, t};
    if (variant == Variant::mai) {
        g.g_y *= std::exp(cfg.r2);
    }
    return g;
}

OracleResult symplectic_oracle(const TmsConfig &cfg, Variant variant, GainPolicy policy) {
    validate(cfg);
    GaussianState state = two_mode_squeezed_vacuum(cfg.r);
    if (!state.is_physical()) {
        throw NumericalInstabilityError("symplectic_oracle: covariance violates the uncertainty relation");
    }
    const double s2 = cfg.sigma * cfg.sigma;
    const bool limit = limit_of(cfg, variant);
    const bool noisy_fit = policy == GainPolicy::noise_optimal;

    // Readout M on the original quadratures. The squeezer maps x_B to
    // e^{r2} x_B; in the limit everything is divided by e^{r2}, which leaves
    // x_B, rescales the x_A gain and removes Bob's noise.
    Vector4 m = unit(kXB);
    double bob_noise = s2;
    double scale = 1.0;
    if (limit) {
        bob_noise = 0.0;
    } else if (variant == Variant::mai) {
        scale = std::exp(cfg.r2);
        m *= scale;
    }
    const Vector4 g = unit(kPB);
    const double numerator = std::pow(commutator_factor(g, m), 2);

    const auto var_m = [&](double gain, bool noisy) {
        const double v = state.variance(m + gain * unit(kXA));
        return noisy ? v + bob_noise + s2 * gain * gain : v;
    };
    const auto var_g = [&](double gain, bool noisy) {
        const double v = state.variance(g + gain * unit(kPA));
        return noisy ? v + s2 * (1.0 + gain * gain) : v;
    };
    const double bound = 4.0 * (1.0 + scale);
    const double gy = minimize_gain([&](double x) { return var_m(x, noisy_fit); }, bound);
    const double gx = minimize_gain([&](double x) { return var_g(x, noisy_fit); }, 4.0);

    OracleResult out;
    out.gains = {gx, limit ? std::numeric_limits<double>::infinity() : gy};
    out.first_term = numerator / var_m(gy, true);
    out.second_term = 4.0 * var_g(gx, true);
    out.delta = out.first_term - out.second_term;
    return out;
}

double symplectic_oracle_delta(const TmsConfig &cfg, Variant variant) {
    return symplectic_oracle(cfg, variant).delta;
}

} // namespace maisteer::cv
