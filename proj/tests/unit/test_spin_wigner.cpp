#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "maisteer/spin.hpp"
#include "maisteer/spin_wigner.hpp"

using namespace maisteer;
using namespace maisteer::wigner;

namespace {

CVector random_state(int dim, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    CVector v(dim);
    for (int i = 0; i < dim; ++i) {
        v(i) = Complex(normal(rng), normal(rng));
    }
    return v.normalized();
}

CVector x_coherent(int twice_j) {
    const auto s = spin::SpinSector::for_particles(twice_j);
    CVector top = CVector::Zero(twice_j + 1);
    top(twice_j) = 1.0;
    return spin::rotation_z_to(RVector3::UnitX(), s) * top;
}

} // namespace

TEST(SpinWigner, ClebschGordanValues) {
    const double r2 = std::sqrt(0.5), r3 = std::sqrt(1.0 / 3.0);
    EXPECT_NEAR(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0), r2, 1e-15);
    EXPECT_NEAR(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0, 0), r2, 1e-15);
    EXPECT_NEAR(clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0, 0), -r2, 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 1, 1, -1, 0, 0), r3, 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 0, 1, 0, 0, 0), -r3, 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 0, 1, 0, 2, 0), std::sqrt(2.0 / 3.0), 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 1, 1, 0, 2, 1), r2, 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 1, 0.5, -0.5, 0.5, 0.5), std::sqrt(2.0 / 3.0), 1e-15);
    EXPECT_NEAR(clebsch_gordan(1, 0, 0.5, 0.5, 0.5, 0.5), -r3, 1e-15);
    EXPECT_EQ(clebsch_gordan(1, 1, 1, 1, 1, 1), 0.0);  // M mismatch
    EXPECT_EQ(clebsch_gordan(1, 0, 1, 0, 3, 0), 0.0);  // triangle
    EXPECT_EQ(clebsch_gordan(1, 0, 1, 0, 1, 0), 0.0);  // parity zero
}

TEST(SpinWigner, ClebschGordanOrthonormality) {
    for (int tj1 : {3, 8}) {
        for (int tj2 : {4, 7}) {
            for (int tJ = std::abs(tj1 - tj2); tJ <= tj1 + tj2; tJ += 2) {
                for (int tJp = std::abs(tj1 - tj2); tJp <= tj1 + tj2; tJp += 2) {
                    for (int tM = -std::min(tJ, tJp); tM <= std::min(tJ, tJp); tM += 2) {
                        double sum = 0.0;
                        for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
                            const int tm2 = tM - tm1;
                            if (std::abs(tm2) > tj2) {
                                continue;
                            }
                            sum += clebsch_gordan_twice(tj1, tm1, tj2, tm2, tJ, tM) *
                                   clebsch_gordan_twice(tj1, tm1, tj2, tm2, tJp, tM);
                        }
                        EXPECT_NEAR(sum, tJ == tJp ? 1.0 : 0.0, 1e-13);
                    }
                }
            }
        }
    }
}

TEST(SpinWigner, TensorOperatorsTransformIrreducibly) {
    for (int tj : {1, 4, 7}) {
        const auto s = spin::SpinSector::for_particles(tj);
        const CMatrix jz = spin::spin_operator(spin::Axis::z, s);
        const CMatrix jp = spin::spin_operator(spin::Axis::x, s) + Complex(0, 1) * spin::spin_operator(spin::Axis::y, s);
        for (int K = 0; K <= tj; ++K) {
            for (int Q = -K; Q <= K; ++Q) {
                const CMatrix t = tensor_operator(tj, K, Q);
                EXPECT_LT(spin::max_abs(jz * t - t * jz - double(Q) * t), 1e-12);
                const CMatrix raised = Q < K ? CMatrix(tensor_operator(tj, K, Q + 1))
                                             : CMatrix(CMatrix::Zero(tj + 1, tj + 1));
                const double c = std::sqrt(double(K * (K + 1) - Q * (Q + 1)));
                EXPECT_LT(spin::max_abs(jp * t - t * jp - c * raised), 1e-12);
                for (int K2 = 0; K2 <= tj; ++K2) {
                    for (int Q2 = -K2; Q2 <= K2; ++Q2) {
                        const Complex overlap = (t.adjoint() * tensor_operator(tj, K2, Q2)).trace();
                        EXPECT_NEAR(std::abs(overlap - Complex(K == K2 && Q == Q2 ? 1.0 : 0.0)), 0.0, 1e-12);
                    }
                }
            }
        }
    }
}

TEST(SpinWigner, SpinHalfKernel) {
    CMatrix up = CMatrix::Zero(2, 2);
    up(1, 1) = 1.0;
    for (double theta : {0.0, 0.4, 1.3, 2.9}) {
        EXPECT_NEAR(wigner_at(up, theta, 0.7), (1.0 + std::sqrt(3.0) * std::cos(theta)) / (4.0 * kPi), 1e-14);
    }
}

TEST(SpinWigner, CoherentStatePointsAlongX) {
    const SphereGrid g = spherical_wigner(x_coherent(10), 128, 256);
    Eigen::Index i = 0, j = 0;
    g.values.maxCoeff(&i, &j);
    EXPECT_NEAR(g.theta(static_cast<int>(i)), kPi / 2, 1e-12);
    EXPECT_NEAR(g.phi(static_cast<int>(j)), 0.0, 1e-12);
}

TEST(SpinWigner, MaximallyMixedIsConstant) {
    for (int tj : {1, 6, 11}) {
        const CMatrix rho = CMatrix::Identity(tj + 1, tj + 1) / double(tj + 1);
        const SphereGrid g = spherical_wigner(rho, 16, 32);
        EXPECT_LT((g.values.array() - 1.0 / (4.0 * kPi)).abs().maxCoeff(), 1e-13);
    }
}

TEST(SpinWigner, NormalizationOnGrid) {
    for (int tj : {2, 10, 20}) {
        const SphereGrid g = spherical_wigner(random_state(tj + 1, 100 + tj), 64, 128);
        EXPECT_NEAR(g.integrate(), 1.0, 1e-3);
    }
}

TEST(SpinWigner, RotationAboutZShiftsGrid) {
    const int tj = 9, n_phi = 64;
    const auto s = spin::SpinSector::for_particles(tj);
    const CVector psi = random_state(tj + 1, 17);
    const int shift = 5;
    const double angle = 2.0 * kPi * shift / n_phi;
    const CVector rotated = spin::rotation_unitary(RVector3::UnitZ(), angle, s) * psi;
    const SphereGrid a = spherical_wigner(psi, 32, n_phi);
    const SphereGrid b = spherical_wigner(rotated, 32, n_phi);
    double worst = 0.0;
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            worst = std::max(worst, std::abs(b.values(i, (j + shift) % n_phi) - a.values(i, j)));
        }
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(SpinWigner, GeneralRotationCovariance) {
    const int tj = 7;
    const auto s = spin::SpinSector::for_particles(tj);
    const CVector psi = random_state(tj + 1, 23);
    const RVector3 axis = RVector3(0.4, -0.3, 0.8).normalized();
    const double angle = 1.1;
    const CVector rotated = spin::rotation_unitary(axis, angle, s) * psi;
    const CMatrix rho = psi * psi.adjoint(), rho_r = rotated * rotated.adjoint();
    const Eigen::AngleAxisd inverse(-angle, axis);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const double theta = std::acos(2.0 * u(rng) - 1.0), phi = 2.0 * kPi * u(rng);
        const RVector3 back = inverse * spin::unit_vector(theta, phi);
        const double theta0 = std::acos(std::clamp(back.z(), -1.0, 1.0));
        const double phi0 = std::atan2(back.y(), back.x());
        EXPECT_NEAR(wigner_at(rho_r, theta, phi), wigner_at(rho, theta0, phi0), 1e-10);
    }
}

TEST(SpinWigner, Linearity) {
    const CVector a = random_state(6, 1), b = random_state(6, 2);
    const CMatrix ra = a * a.adjoint(), rb = b * b.adjoint();
    const SphereGrid ga = spherical_wigner(ra, 12, 24), gb = spherical_wigner(rb, 12, 24);
    const SphereGrid mix = spherical_wigner(CMatrix(0.3 * ra + 0.7 * rb), 12, 24);
    EXPECT_LT((mix.values - 0.3 * ga.values - 0.7 * gb.values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SpinWigner, SectorSelection) {
    BlockDensityOperator rho(3);
    for (int n = 0; n <= 3; ++n) {
        rho.block(n) = CMatrix::Zero(n + 1, n + 1);
    }
    rho.block(2) = CMatrix::Identity(3, 3) / 3.0;
    EXPECT_NEAR(spherical_wigner(rho, 8, 16).values(3, 4), 1.0 / (4.0 * kPi), 1e-13);
    rho.block(1)(0, 0) = 0.1;
    EXPECT_THROW(spherical_wigner(rho, 8, 16), InputError);
}

TEST(SpinWigner, NonHermitianInputRejected) {
    CMatrix coherence = CMatrix::Zero(3, 3);
    coherence(0, 1) = 1.0;
    EXPECT_THROW(spherical_wigner(coherence, 8, 16), NumericalInstabilityError);
}
