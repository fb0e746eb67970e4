#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "maisteer/criteria.hpp"
#include "maisteer/spin.hpp"
#include "maisteer/split_state.hpp"

using namespace maisteer;

namespace {

double quotient(const RMatrix3 &C, const RMatrix3 &gamma, const RVector3 &n, const RVector3 &m) {
    const double num = n.dot(C * m);
    return num * num / m.dot(gamma * m);
}

// Random directions, then a shrinking pattern search in spherical angles.
double brute_force_sensitivity(const RMatrix3 &C, const RMatrix3 &gamma, const RVector3 &n) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    RVector3 best = RVector3::UnitX();
    double best_value = -1.0;
    for (int i = 0; i < 10000; ++i) {
        const RVector3 m = RVector3(normal(rng), normal(rng), normal(rng)).normalized();
        const double v = quotient(C, gamma, n, m);
        if (v > best_value) {
            best_value = v;
            best = m;
        }
    }
    double polar = std::acos(std::clamp(best.z(), -1.0, 1.0));
    double azimuth = std::atan2(best.y(), best.x());
    for (double step = 0.05; step > 1e-12; step *= 0.5) {
        bool moved = true;
        while (moved) {
            moved = false;
            for (int d = 0; d < 4; ++d) {
                const double p = polar + (d == 0 ? step : d == 1 ? -step : 0.0);
                const double a = azimuth + (d == 2 ? step : d == 3 ? -step : 0.0);
                const double v = quotient(C, gamma, n, spin::unit_vector(p, a));
                if (v > best_value) {
                    best_value = v;
                    polar = p;
                    azimuth = a;
                    moved = true;
                }
            }
        }
    }
    return best_value;
}

RMatrix3 unconditioned_covariance(const BlockDensityOperator &rho) {
    RMatrix3 out;
    RVector3 mean;
    for (int a = 0; a < 3; ++a) {
        mean(a) = rho.expectation([a](const spin::SpinSector &s) {
                          return spin::spin_operator(static_cast<spin::Axis>(a), s);
                      }).real();
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            out(a, b) = rho.expectation([a, b](const spin::SpinSector &s) {
                               return spin::symmetric_product(a, b, s);
                           }).real() - mean(a) * mean(b);
        }
    }
    return out;
}

OptimizerSettings fast_settings() {
    OptimizerSettings s;
    s.theta_grid = 24;
    s.mu2_grid = 32;
    s.refine_starts = 2;
    return s;
}

} // namespace

TEST(Criteria, CoherentCommutatorStructure) {
    const auto st = build_split_state(20, 0.0);
    const auto lin = linear_family(20);
    const RMatrix3 C = commutator_matrix(reduced_bob_state(st), lin, lin);
    RMatrix3 expected = RMatrix3::Zero();
    expected(1, 2) = -5.0;
    expected(2, 1) = 5.0;
    EXPECT_LT((C - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Criteria, CommutatorAntisymmetricAndTwistFree) {
    const auto st = build_split_state(10, 0.7);
    const auto rho = reduced_bob_state(st);
    const auto lin = linear_family(10);
    const RMatrix3 C = commutator_matrix(rho, lin, lin);
    EXPECT_LT((C + C.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const RMatrix3 C0 = commutator_matrix(rho, lin, unitary_family(10, MaiSetting{0.0, RVector3::UnitZ()}));
    EXPECT_LT((C - C0).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Criteria, CoherentConditionalCovariance) {
    const auto st = build_split_state(20, 0.0);
    const RMatrix3 gamma = conditional_covariance_matrix(condition_on_alice(st, 0.4), linear_family(20));
    const RMatrix3 expected = RVector3(0.0, 2.5, 2.5).asDiagonal();
    EXPECT_LT((gamma - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Criteria, CovariancePsdAndSingleBranch) {
    const auto st = build_split_state(8, 1.1);
    const auto lin = linear_family(8);
    const Assemblage as = condition_on_alice(st, 0.9);
    const RMatrix3 gamma = conditional_covariance_matrix(as, lin);
    EXPECT_LT((gamma - gamma.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<RMatrix3>(gamma).eigenvalues().minCoeff(), -1e-10);

    Assemblage single;
    single.branches.push_back(as.branches.at(3));
    single.branches[0].probability = 1.0;
    BlockDensityOperator rho(8);
    for (int n = 0; n <= 8; ++n) {
        rho.block(n) = CMatrix::Zero(n + 1, n + 1);
    }
    const Branch &b = single.branches[0];
    rho.block(b.bob.particles()) = b.state * b.state.adjoint();
    EXPECT_LT((conditional_covariance_matrix(single, lin) - unconditioned_covariance(rho)).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(Criteria, CoherentMomentMatrix) {
    const auto st = build_split_state(20, 0.0);
    const auto lin = linear_family(20);
    const MomentMatrices mm = moment_matrix(condition_on_alice(st, 0.0), lin, lin);
    EXPECT_NEAR(RVector3::UnitZ().dot(mm.moment * RVector3::UnitZ()), 10.0, 1e-9);
    EXPECT_NEAR(RVector3::UnitY().dot(mm.moment * RVector3::UnitY()), 10.0, 1e-9);
}

TEST(Criteria, ZeroCommutatorGivesZeroMoment) {
    const RMatrix3 gamma = RVector3(1.0, 2.0, 3.0).asDiagonal();
    EXPECT_EQ(moment_from(RMatrix3::Zero(), gamma), RMatrix3::Zero());
}

TEST(Criteria, DegenerateCovarianceRejected) {
    EXPECT_THROW(covariance_pseudo_inverse(RMatrix3::Zero()), DegenerateInputError);
}

TEST(Criteria, MomentMatrixMatchesBruteForce) {
    const auto st = build_split_state(4, 0.9);
    const auto lin = linear_family(4);
    const auto mai = unitary_family(4, MaiSetting{0.8, RVector3::UnitZ()});
    const MomentMatrices mm = moment_matrix(condition_on_alice(st, 0.6), lin, mai);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 5; ++trial) {
        const RVector3 n = RVector3(normal(rng), normal(rng), normal(rng)).normalized();
        const double direct = n.dot(mm.moment * n);
        const double brute = brute_force_sensitivity(mm.C, mm.gamma_y, n);
        EXPECT_NEAR(direct, brute, 1e-6 * std::max(1.0, brute));
        const RVector3 m = optimal_m(mm.C, mm.gamma_y, n);
        EXPECT_NEAR(m.norm(), 1.0, 1e-12);
        EXPECT_NEAR(quotient(mm.C, mm.gamma_y, n, m), direct, 1e-9 * std::max(1.0, direct));
    }
}

TEST(Criteria, CoherentStateSaturatesReid) {
    const auto st = build_split_state(20, 0.0);
    for (double tx : {0.0, 0.7, 2.0}) {
        for (double ty : {0.3, 1.5}) {
            EXPECT_NEAR(reid_violation_at(st, tx, ty).lambda_max, 0.0, 1e-9);
        }
    }
}

TEST(Criteria, UntwistedMaiIsLinearExactly) {
    const auto st = build_split_state(12, 0.5);
    const ReidPoint a = reid_violation_at(st, 0.4, 1.2);
    const ReidPoint b = reid_violation_at(st, 0.4, 1.2, MaiSetting{0.0, RVector3::UnitZ()});
    EXPECT_EQ(a.lambda_max, b.lambda_max);
    EXPECT_EQ(a.first_term, b.first_term);
}

TEST(Criteria, LinearOptimumMatchesGridZoom) {
    const auto st = build_split_state(20, 0.1);
    const CriterionResult r = delta_R(st, ReidMode::linear);
    double cx = 0.5 * kPi, cy = 0.5 * kPi, half = 0.5 * kPi, best = -1e300;
    for (int level = 0; level < 12; ++level) {
        const int n = 12;
        double bx = cx, by = cy;
        for (int i = 0; i <= n; ++i) {
            for (int k = 0; k <= n; ++k) {
                const double tx = cx - half + 2.0 * half * i / n;
                const double ty = cy - half + 2.0 * half * k / n;
                const double v = reid_violation_at(st, tx, ty).lambda_max;
                if (v > best) {
                    best = v;
                    bx = tx;
                    by = ty;
                }
            }
        }
        cx = bx;
        cy = by;
        half *= 0.4;
    }
    EXPECT_GT(best, 0.0);
    EXPECT_NEAR(r.delta, best, 1e-6);
}

TEST(Criteria, ResultIsReproducible) {
    const auto st = build_split_state(10, 0.6);
    for (ReidMode mode : {ReidMode::linear, ReidMode::mai}) {
        const CriterionResult r = delta_R(st, mode, fast_settings());
        std::optional<MaiSetting> mai;
        if (mode == ReidMode::mai) {
            mai = MaiSetting{r.mu2, r.axis};
        }
        const ReidPoint p = reid_violation_at(st, r.theta_x, r.theta_y, mai);
        EXPECT_NEAR(p.lambda_max, r.delta, 1e-8);
        EXPECT_NEAR(r.n_opt.norm(), 1.0, 1e-10);
        EXPECT_NEAR(r.m_opt.norm(), 1.0, 1e-10);
    }
}

TEST(Criteria, PinnedTwistEqualsLinear) {
    const auto st = build_split_state(10, 0.45);
    OptimizerSettings s = fast_settings();
    const double linear = delta_R(st, ReidMode::linear, s).delta;
    s.pin_mu2 = 0.0;
    EXPECT_NEAR(delta_R(st, ReidMode::mai, s).delta, linear, 1e-9);
}

TEST(Criteria, UntwistedStateIsUnsteerable) {
    const auto st = build_split_state(20, 0.0);
    const OptimizerSettings s = fast_settings();
    EXPECT_NEAR(delta_R(st, ReidMode::linear, s).delta, 0.0, 1e-8);
    EXPECT_NEAR(delta_R(st, ReidMode::mai, s).delta, 0.0, 1e-8);
    EXPECT_NEAR(delta_F(st, s).delta, 0.0, 1e-9);
}

TEST(Criteria, Hierarchy) {
    const OptimizerSettings s = fast_settings();
    for (double mu : {0.15, 0.5, 0.9}) {
        const SteeringSummary h = steering_hierarchy(build_split_state(10, mu), s);
        EXPECT_LE(h.linear.delta, h.mai.delta + 1e-8) << mu;
        EXPECT_LE(h.mai.delta, h.fisher.delta + 1e-8) << mu;
        EXPECT_GE(h.mai.first_term, h.linear.first_term - 1e-8) << mu;
    }
}

TEST(Criteria, AxisOptimizationNotWorse) {
    const SteeringSummary h = steering_hierarchy(build_split_state(6, 0.6), fast_settings(), true);
    ASSERT_TRUE(h.axis.has_value());
    EXPECT_GE(h.axis->delta, h.mai.delta - 1e-8);
    EXPECT_NEAR(h.axis->axis.norm(), 1.0, 1e-10);
}

TEST(Criteria, FisherTwoCodePaths) {
    const auto st = build_split_state(12, 0.8);
    const Assemblage as = condition_on_alice(st, 1.3);
    const RMatrix3 gamma = conditional_covariance_matrix(as, linear_family(12));
    for (const RVector3 &n : std::vector<RVector3>{RVector3::UnitX(), RVector3(0.2, -0.5, 0.7).normalized()}) {
        EXPECT_NEAR(conditional_fisher_information(as, n), 4.0 * n.dot(gamma * n), 1e-10);
    }
}

TEST(Criteria, ConditioningBeatsUnconditionedSensitivity) {
    const auto st = build_split_state(10, 0.5);
    const auto lin = linear_family(10);
    const auto rho = reduced_bob_state(st);
    const RMatrix3 sigma = unconditioned_covariance(rho);
    for (double theta : {0.2, 1.0, 2.2}) {
        const MomentMatrices mm = moment_matrix(condition_on_alice(st, theta), lin, lin);
        const RMatrix3 plain = moment_from(mm.C, sigma);
        for (const RVector3 &n : std::vector<RVector3>{RVector3::UnitY(), RVector3::UnitZ(), RVector3(0, 1, -1).normalized()}) {
            EXPECT_GE(n.dot(mm.moment * n), n.dot(plain * n) - 1e-9);
        }
    }
}

TEST(Criteria, WrapFunctions) {
    EXPECT_NEAR(wrap_theta(kPi + 0.1), 0.1, 1e-14);
    EXPECT_NEAR(wrap_theta(-0.1), kPi - 0.1, 1e-14);
    EXPECT_NEAR(wrap_mu2(4.0 * kPi + 0.2), 0.2, 1e-13);
    EXPECT_NEAR(wrap_mu2(-0.2), 4.0 * kPi - 0.2, 1e-13);
    // twisting observables are 4 pi periodic for odd and even sectors
    const auto a = unitary_family(5, MaiSetting{0.9, RVector3::UnitZ()});
    const auto b = unitary_family(5, MaiSetting{0.9 + 4.0 * kPi, RVector3::UnitZ()});
    for (int n = 0; n <= 5; ++n) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_LT(spin::max_abs(a.first[n][k] - b.first[n][k]), 1e-11);
        }
    }
}

TEST(Criteria, HemisphereAxes) {
    const auto axes = hemisphere_axes(2);
    EXPECT_EQ(axes.size(), 81u);
    for (const RVector3 &v : axes) {
        EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    }
}
