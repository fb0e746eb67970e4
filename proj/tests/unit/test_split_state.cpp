#include <gtest/gtest.h>

#include <cmath>

#include "maisteer/spin.hpp"
#include "maisteer/split_state.hpp"

using namespace maisteer;

namespace {

// Sector x-coherent state: the top Dicke state rotated from z to x.
CVector x_coherent(int n) {
    const auto s = spin::SpinSector::for_particles(n);
    CVector top = CVector::Zero(n + 1);
    top(n) = 1.0;
    return spin::rotation_z_to(RVector3::UnitX(), s) * top;
}

// Brute-force Alice conditioning on the tensor product A (x) B of one sector:
// project with eigenprojectors of (X (x) 1) and partial-trace over A.
BlockDensityOperator dense_conditional_sum(const SplitSpinState &state, double theta, double weight_power) {
    const int atoms = state.atoms();
    BlockDensityOperator out(atoms);
    for (int n = 0; n <= atoms; ++n) {
        out.block(atoms - n) = CMatrix::Zero(atoms - n + 1, atoms - n + 1);
    }
    for (int na = 0; na <= atoms; ++na) {
        const int nb = atoms - na;
        const int da = na + 1, db = nb + 1;
        const CMatrix &c = state.amplitudes(na);
        CVector psi(da * db);
        for (int a = 0; a < da; ++a) {
            for (int b = 0; b < db; ++b) {
                psi(a * db + b) = c(a, b);
            }
        }
        const auto sa = spin::SpinSector::for_particles(na);
        const CMatrix small = spin::direction_operator(theta, sa);
        CMatrix big = CMatrix::Zero(da * db, da * db);
        for (int a = 0; a < da; ++a) {
            for (int a2 = 0; a2 < da; ++a2) {
                big.block(a * db, a2 * db, db, db) = small(a, a2) * CMatrix::Identity(db, db);
            }
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(big);
        // group eigenvalues (each has multiplicity db)
        for (int l = 0; l < da; ++l) {
            const double value = l - 0.5 * na;
            CMatrix proj = CMatrix::Zero(da * db, da * db);
            for (int k = 0; k < da * db; ++k) {
                if (std::abs(solver.eigenvalues()(k) - value) < 1e-8) {
                    proj += solver.eigenvectors().col(k) * solver.eigenvectors().col(k).adjoint();
                }
            }
            const CVector projected = proj * psi;
            const double p = projected.squaredNorm();
            if (p < 1e-14) {
                continue;
            }
            CMatrix rho_b = CMatrix::Zero(db, db);
            for (int a = 0; a < da; ++a) {
                const CVector part = projected.segment(a * db, db);
                rho_b += part * part.adjoint();
            }
            // weight_power 1: sum_b p_b rho_b; 2: sum_b p_b^2 rho_b (sensitive to branch split)
            out.block(nb) += std::pow(p, weight_power - 1.0) * rho_b;
        }
    }
    return out;
}

} // namespace

TEST(SplitState, Normalized) {
    for (double mu : {0.0, 0.1, 0.4, 1.7}) {
        EXPECT_NEAR(build_split_state(20, mu).norm_squared(), 1.0, 1e-12);
    }
}

TEST(SplitState, SectorProbabilities) {
    const auto st = build_split_state(20, 0.4);
    EXPECT_NEAR(sector_probability(st, 10), 184756.0 / 1048576.0, 1e-14);
    EXPECT_NEAR(sector_probability(st, 0), std::ldexp(1.0, -20), 1e-18);
    double total = 0.0;
    for (int n = 0; n <= 20; ++n) {
        total += sector_probability(st, n);
        EXPECT_NEAR(sector_probability(st, n), sector_probability(build_split_state(20, 1.3), n), 1e-14);
    }
    EXPECT_NEAR(total, 1.0, 1e-13);
    EXPECT_THROW(sector_probability(st, 21), std::exception);
}

TEST(SplitState, RejectsOutOfRange) {
    EXPECT_THROW(build_split_state(0, 0.1), InputError);
    EXPECT_THROW(build_split_state(41, 0.1), InputError);
    EXPECT_THROW(build_split_state(10, std::nan("")), InputError);
}

TEST(SplitState, UntwistedBranchesAreCoherent) {
    const auto st = build_split_state(20, 0.0);
    for (double theta : {0.0, 0.7, 2.5}) {
        const Assemblage as = condition_on_alice(st, theta);
        EXPECT_NEAR(as.total_probability(), 1.0, 1e-12);
        for (const Branch &b : as.branches) {
            const CVector coh = x_coherent(b.bob.particles());
            EXPECT_NEAR(std::abs(coh.dot(b.state)), 1.0, 1e-10);
        }
    }
}

TEST(SplitState, ConditioningMatchesTensorProductOracle) {
    for (int atoms : {2, 4, 6}) {
        const auto st = build_split_state(atoms, 0.9);
        for (double theta : {0.3, 1.9}) {
            const Assemblage as = condition_on_alice(st, theta);
            BlockDensityOperator mine(atoms), mine2(atoms);
            for (int n = 0; n <= atoms; ++n) {
                mine.block(n) = CMatrix::Zero(n + 1, n + 1);
                mine2.block(n) = CMatrix::Zero(n + 1, n + 1);
            }
            for (const Branch &b : as.branches) {
                const CMatrix proj = b.state * b.state.adjoint();
                mine.block(b.bob.particles()) += b.probability * proj;
                mine2.block(b.bob.particles()) += b.probability * b.probability * proj;
            }
            EXPECT_LT(trace_distance(mine, dense_conditional_sum(st, theta, 1.0)), 1e-12);
            EXPECT_LT(trace_distance(mine2, dense_conditional_sum(st, theta, 2.0)), 1e-12);
        }
    }
}

TEST(SplitState, NoSignaling) {
    const auto st = build_split_state(20, 0.4);
    const auto a = reduced_bob_state(condition_on_alice(st, 0.2));
    const auto b = reduced_bob_state(condition_on_alice(st, 1.9));
    EXPECT_LT(trace_distance(a, b), 1e-10);
    EXPECT_LT(trace_distance(a, reduced_bob_state(st)), 1e-10);
}

TEST(SplitState, UntwistedReducedBlocks) {
    const auto st = build_split_state(20, 0.0);
    const auto rho = reduced_bob_state(st);
    for (int nb = 0; nb <= 20; ++nb) {
        const CVector coh = x_coherent(nb);
        const CMatrix expected = sector_probability(st, 20 - nb) * coh * coh.adjoint();
        EXPECT_LT(spin::max_abs(rho.block(nb) - expected), 1e-12);
    }
}

TEST(SplitState, JointExpectations) {
    const auto st0 = build_split_state(20, 0.0);
    EXPECT_NEAR(std::abs(joint_expectation(st0, RVector3(RVector3::UnitZ()), RVector3(RVector3::UnitZ()))), 0.0, 1e-12);
    EXPECT_NEAR(joint_expectation(st0, RVector3(RVector3::UnitX()), RVector3(RVector3::UnitX())).real(), 23.75, 1e-10);

    const auto st = build_split_state(20, 0.4);
    const Complex lhs = joint_expectation(st, identity_operator(), spin_direction(RVector3::UnitX()));
    const Complex rhs = reduced_bob_state(st).expectation(spin_direction(RVector3::UnitX()));
    EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12);
}

TEST(SplitState, ConditionalVarianceBelowUnconditional) {
    const auto st = build_split_state(12, 0.6);
    const auto rho = reduced_bob_state(st);
    for (double theta : {0.0, 0.8, 1.6, 2.4}) {
        const Assemblage as = condition_on_alice(st, theta);
        for (const RVector3 &n : std::vector<RVector3>{RVector3::UnitX(), RVector3::UnitY(), RVector3(0, 1, 1).normalized()}) {
            const auto g = spin_direction(n);
            const double mean = rho.expectation(g).real();
            const double var = rho.expectation([&](const spin::SpinSector &s) {
                                   const CMatrix m = g(s);
                                   return CMatrix(m * m);
                               }).real() - mean * mean;
            double cond = 0.0;
            for (const Branch &b : as.branches) {
                const CMatrix m = g(b.bob);
                const double e1 = b.state.dot(m * b.state).real();
                const double e2 = b.state.dot(m * m * b.state).real();
                cond += b.probability * (e2 - e1 * e1);
            }
            EXPECT_LE(cond, var + 1e-10);
        }
    }
}

TEST(SplitState, GlobalPhaseInvariance) {
    const auto st = build_split_state(8, 0.5);
    std::vector<CMatrix> rotated;
    for (int n = 0; n <= 8; ++n) {
        rotated.push_back(std::polar(1.0, 0.77) * st.amplitudes(n));
    }
    const SplitSpinState phased(8, 0.5, rotated);
    const Assemblage a = condition_on_alice(st, 1.1), b = condition_on_alice(phased, 1.1);
    ASSERT_EQ(a.branches.size(), b.branches.size());
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
        EXPECT_NEAR(a.branches[i].probability, b.branches[i].probability, 1e-14);
        EXPECT_NEAR(std::abs(a.branches[i].state.dot(b.branches[i].state)), 1.0, 1e-12);
    }
}

TEST(SplitState, BlockOperatorBasics) {
    const auto rho = reduced_bob_state(build_split_state(10, 0.3));
    EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
    EXPECT_LT(rho.hermiticity_residue(), 1e-14);
    EXPECT_GT(rho.min_eigenvalue(), -1e-12);
}
