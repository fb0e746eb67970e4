#pragma once

#include <Eigen/Dense>

#include "maisteer/types.hpp"

namespace maisteer::cv {

/// Two-mode squeezed vacuum with squeezing r, a single-mode squeezer r2 on
/// Bob's readout and additive Gaussian detection noise of deviation sigma.
/// r2 may be +infinity, which selects the large-squeezing limit.
struct TmsConfig {
    double r = 0.0;
    double r2 = 0.0;
    double sigma = 0.0;
};

void validate(const TmsConfig &cfg);

enum class Variant { linear, mai, mai_limit };

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

/// Quadratures ordered (x_A, p_A, x_B, p_B) with [x, p] = i; vacuum variance 1/2.
struct GaussianState {
    Vector4 mean = Vector4::Zero();
    Matrix4 cov = 0.5 * Matrix4::Identity();

    /// Smallest eigenvalue of cov + (i/2) Omega.
    [[nodiscard]] double uncertainty_margin() const;
    [[nodiscard]] bool is_physical(double tol = 1e-12) const;
    /// Var(c . R).
    [[nodiscard]] double variance(const Vector4 &c) const;
};

/// Symplectic form for the (x_A, p_A, x_B, p_B) ordering.
Matrix4 symplectic_form();

/// i c1^T Omega c2 = <[c1 . R, c2 . R]>, returned as the real factor.
double commutator_factor(const Vector4 &c1, const Vector4 &c2);

/// Symplectic matrix of the two-mode squeezer applied to vacuum.
Matrix4 two_mode_squeezer(double r);

GaussianState two_mode_squeezed_vacuum(double r);

/// Closed-form maximum violation. With sigma > 0 the quoted forms keep the
/// noiseless optimal gains.
double analytic_delta(const TmsConfig &cfg, Variant variant);

struct Gains {
    double g_x = 0.0; // pairs with (G, X) = (p_B, p_A)
    double g_y = 0.0; // pairs with (M, Y) = (x_B, x_A)
};

/// Noiseless optimal gains. Throws UnsupportedConfigurationError for
/// sigma > 0 and for the mai_limit variant, where g_y diverges.
Gains optimal_gains(const TmsConfig &cfg, Variant variant);

enum class GainPolicy {
    noiseless_optimal, // minimize the noiseless variances, then add noise
    noise_optimal,     // minimize the noisy variances
};

struct OracleResult {
    double delta = 0.0;
    Gains gains;
    double first_term = 0.0;
    double second_term = 0.0; // 4 Var[G + g_x X]
};

/// Builds the covariance matrix, squeezes Bob's readout symplectically, and
/// minimizes the estimator variances numerically. For mai_limit the gain on
/// x_A is rescaled by e^{-r2} before taking r2 to infinity.
OracleResult symplectic_oracle(const TmsConfig &cfg, Variant variant,
                               GainPolicy policy = GainPolicy::noiseless_optimal);

double symplectic_oracle_delta(const TmsConfig &cfg, Variant variant);

} // namespace maisteer::cv
