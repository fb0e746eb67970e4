#pragma once

#include <optional>

#include "maisteer/split_state.hpp"
#include "maisteer/types.hpp"

namespace maisteer {

struct SqueezingAngle {
    double theta = 0.0;
    bool limit = false; // mu = 0: the closed form is 0/0 and pi/4 is its limit
};

/// Angle of the squeezed quadrature of the twisted state, measured from S_y in the yz plane.
SqueezingAngle squeezing_angle(int atoms, double mu);

/// Var(O_B) + g^2 Var(O_A) + 2 g Cov(O_A, O_B).
double variance_with_gain(const SplitSpinState &state, const SectorOperator &on_bob,
                          const SectorOperator &on_alice, double g);

/// Directions are yz-plane angles a: cos(a) S_y + sin(a) S_z.
/// G, M act on Bob (M after the twist mu2), X, Y on Alice.
struct GiovannettiConfig {
    double g_x = 0.0;
    double g_y = 0.0;
    double angle_g = 0.0;
    double angle_x = 0.0;
    double angle_m = 0.0;
    double angle_y = 0.0;
    double mu2 = 0.0;
};

/// ||g_X g_Y| <[X,Y]> + <[G,M]>|^2 / Var[M + g_Y Y] - 4 Var[G + g_X X],
/// built from dense sector operators.
double giovannetti_value(const SplitSpinState &state, const GiovannettiConfig &config);

enum class GiovannettiMode { linear, mai };

struct EntanglementSettings {
    int gain_grid = 96;
    int angle_grid = 8;
    int mu2_grid = 64;
    int refine_starts = 3;
    double tolerance = 1e-7;
    int max_evaluations = 4000;
    /// Bound on |g_X| and |g_Y|. At the separable boundary the supremum is
    /// approached along gains growing without limit, where the criterion is
    /// a difference of two large numbers.
    double max_gain = 1e3;
    /// Fix mu2 instead of optimizing it (mai mode only).
    std::optional<double> pin_mu2;
};

struct EntanglementResult {
    double delta = 0.0;                 // gains free
    GiovannettiConfig config;
    double constrained_delta = 0.0;     // |g_X g_Y| = 1
    GiovannettiConfig constrained_config;
    double theta_s = 0.0;
    bool theta_s_limit = false;
    bool converged = true;
    bool warning = false;
};

/// Linear mode fixes G, X along the anti-squeezed direction theta_S and M, Y
/// along the squeezed direction theta_S + pi/2 and optimizes the gains.
/// MAI mode also optimizes mu2 and the four directions, seeded from the
/// linear optimum.
EntanglementResult delta_G(const SplitSpinState &state, GiovannettiMode mode,
                           const EntanglementSettings &settings = {});

/// Moments of (S_y^A, S_z^A, S_y^B, S_z^B, F_y, F_z), F = U^dagger S U with
/// U = exp(i (mu2/2) (S_z^B)^2). Every Giovannetti value at fixed mu2 is a
/// closed form in these numbers.
struct GiovannettiMoments {
    Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
    double alice_sx = 0.0;
    Eigen::Matrix2d bob_commutator = Eigen::Matrix2d::Zero(); // -i<[S_g^B, F_m]>, g, m in {y, z}
};

GiovannettiMoments giovannetti_moments(const SplitSpinState &state, double mu2);

/// Same quantity as giovannetti_value, from precomputed moments.
double giovannetti_from_moments(const GiovannettiMoments &moments, const GiovannettiConfig &config);

} // namespace maisteer
