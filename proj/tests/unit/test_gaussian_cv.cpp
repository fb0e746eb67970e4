#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "maisteer/gaussian_cv.hpp"

using namespace maisteer;
using namespace maisteer::cv;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(GaussianCv, NoiselessClosedForm) {
    const double expected = 2.0 * (std::cosh(1.0) - 1.0 / std::cosh(1.0));
    EXPECT_NEAR(expected, 1.790053, 1e-6);
    EXPECT_NEAR(analytic_delta({0.5, 0.0, 0.0}, Variant::linear), expected, 1e-12);
    for (double r2 : {0.0, 0.5, 1.0, 3.0}) {
        EXPECT_NEAR(analytic_delta({0.5, r2, 0.0}, Variant::mai), expected, 1e-12);
    }
    EXPECT_NEAR(analytic_delta({0.5, 0.0, 0.0}, Variant::mai_limit), expected, 1e-12);
}

TEST(GaussianCv, UntwistedMaiIsLinear) {
    for (double sigma : {0.05, 0.2, 0.5}) {
        EXPECT_EQ(analytic_delta({0.5, 0.0, sigma}, Variant::mai), analytic_delta({0.5, 0.0, sigma}, Variant::linear));
    }
}

TEST(GaussianCv, OracleMatchesClosedFormsOnGrid) {
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double r = 0.1 * i;
        for (double r2 : {0.0, 0.5, 1.0}) {
            for (double sigma : {0.0, 0.1, 0.3}) {
                const TmsConfig cfg{r, r2, sigma};
                for (Variant v : {Variant::linear, Variant::mai, Variant::mai_limit}) {
                    worst = std::max(worst, std::abs(symplectic_oracle_delta(cfg, v) - analytic_delta(cfg, v)));
                }
            }
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(GaussianCv, VacuumHasNoSteering) {
    for (Variant v : {Variant::linear, Variant::mai, Variant::mai_limit}) {
        EXPECT_NEAR(symplectic_oracle_delta({0.0, 0.7, 0.0}, v), 0.0, 1e-12);
    }
}

TEST(GaussianCv, NoiseDrivesViolationDown) {
    double previous = symplectic_oracle_delta({0.5, 1.0, 0.0}, Variant::mai);
    for (double sigma : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double v = symplectic_oracle_delta({0.5, 1.0, sigma}, Variant::mai);
        EXPECT_LT(v, previous);
        previous = v;
    }
    EXPECT_LT(previous, -100.0);
}

TEST(GaussianCv, TwistHelpsUnderNoise) {
    const double sigma = 0.2;
    const double limit = analytic_delta({0.5, kInf, sigma}, Variant::mai_limit);
    EXPECT_NEAR(analytic_delta({0.5, kInf, sigma}, Variant::mai), limit, 1e-12);
    double previous = analytic_delta({0.5, 0.0, sigma}, Variant::mai);
    for (double r2 : {0.5, 1.0, 2.0, 4.0}) {
        const double v = analytic_delta({0.5, r2, sigma}, Variant::mai);
        EXPECT_GT(v, previous);
        EXPECT_LE(v, limit + 1e-9);
        previous = v;
    }
    EXPECT_NEAR(analytic_delta({0.5, 30.0, sigma}, Variant::mai), limit, 1e-9);
}

TEST(GaussianCv, OptimalGains) {
    const Gains lin = optimal_gains({0.5, 0.0, 0.0}, Variant::linear);
    EXPECT_NEAR(lin.g_x, -std::tanh(1.0), 1e-15);
    EXPECT_NEAR(lin.g_y, std::tanh(1.0), 1e-15);
    EXPECT_NEAR(lin.g_y, 0.761594, 1e-6);
    const Gains mai = optimal_gains({0.5, 1.0, 0.0}, Variant::mai);
    EXPECT_NEAR(mai.g_y, std::exp(1.0) * std::tanh(1.0), 1e-14);
    EXPECT_NEAR(mai.g_x, -std::tanh(1.0), 1e-15);
    const Gains none = optimal_gains({0.0, 0.4, 0.0}, Variant::mai);
    EXPECT_EQ(none.g_x, 0.0);
    EXPECT_EQ(none.g_y, 0.0);
    EXPECT_THROW(optimal_gains({0.5, 0.0, 0.1}, Variant::linear), UnsupportedConfigurationError);
    EXPECT_THROW(optimal_gains({0.5, 0.0, 0.0}, Variant::mai_limit), UnsupportedConfigurationError);
}

TEST(GaussianCv, OracleFindsClosedFormGains) {
    const TmsConfig cfg{0.5, 1.0, 0.0};
    const OracleResult res = symplectic_oracle(cfg, Variant::mai);
    const Gains g = optimal_gains(cfg, Variant::mai);
    EXPECT_NEAR(res.gains.g_x, g.g_x, 1e-7);
    EXPECT_NEAR(res.gains.g_y, g.g_y, 1e-7);
    EXPECT_NEAR(res.first_term - res.second_term, res.delta, 1e-14);
}

TEST(GaussianCv, NoiseOptimalGainsNeverWorse) {
    for (double sigma : {0.1, 0.2, 0.4}) {
        for (double r2 : {0.0, 1.0}) {
            const TmsConfig cfg{0.5, r2, sigma};
            const double fixed = symplectic_oracle(cfg, Variant::mai).delta;
            const double tuned = symplectic_oracle(cfg, Variant::mai, GainPolicy::noise_optimal).delta;
            EXPECT_GE(tuned, fixed - 1e-12);
        }
    }
}

TEST(GaussianCv, StateIsPhysical) {
    const GaussianState s = two_mode_squeezed_vacuum(0.8);
    EXPECT_TRUE(s.is_physical());
    EXPECT_NEAR(s.uncertainty_margin(), 0.0, 1e-12);
    EXPECT_NEAR(s.cov.determinant(), 1.0 / 16.0, 1e-12);
    const Matrix4 sym = two_mode_squeezer(0.8);
    EXPECT_LT((sym * symplectic_form() * sym.transpose() - symplectic_form()).cwiseAbs().maxCoeff(), 1e-12);
    // [x_A, p_A] = i
    EXPECT_NEAR(commutator_factor(Vector4(1, 0, 0, 0), Vector4(0, 1, 0, 0)), 1.0, 1e-15);
    GaussianState bad;
    bad.cov = 0.1 * Matrix4::Identity();
    EXPECT_FALSE(bad.is_physical());
}

TEST(GaussianCv, RejectsBadConfig) {
    EXPECT_THROW(validate({-0.1, 0.0, 0.0}), InputError);
    EXPECT_THROW(validate({0.1, -1.0, 0.0}), InputError);
    EXPECT_THROW(validate({0.1, 0.0, -0.2}), InputError);
    EXPECT_THROW(validate({std::nan(""), 0.0, 0.0}), InputError);
}
