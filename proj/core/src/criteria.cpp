#include "maisteer/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace maisteer {

namespace {

constexpr double kImaginaryTolerance = 1e-12;
constexpr double kPinvRelative = 1e-10;
constexpr double kZeroCovariance = 1e-14;

void require_covers(const ObservableFamily &family, int particles, const char *what) {
    if (family.max_particles() < particles) {
        throw InputError(std::string(what) + " family covers " +
                         std::to_string(family.max_particles()) + " particles, state needs " +
                         std::to_string(particles));
    }
}

double real_checked(Complex z, double scale, const char *what) {
    if (std::abs(z.imag()) > kImaginaryTolerance * std::max(1.0, scale)) {
        throw NumericalInstabilityError(std::string(what) + " has an imaginary residue of " +
                                        std::to_string(z.imag()));
    }
    return z.real();
}

} // namespace

int spin_pair_index(int a, int b) {
    if (a > b) {
        std::swap(a, b);
    }
    for (int p = 0; p < 6; ++p) {
        if (kSpinPairs[static_cast<std::size_t>(p)] == std::pair{a, b}) {
            return p;
        }
    }
    throw InputError("spin pair index out of range");
}

ObservableFamily linear_family(int max_particles) {
    ObservableFamily f;
    for (int n = 0; n <= max_particles; ++n) {
        const auto s = spin::SpinSector::for_particles(n);
        f.first.push_back({spin::spin_operator(spin::Axis::x, s),
                           spin::spin_operator(spin::Axis::y, s),
                           spin::spin_operator(spin::Axis::z, s)});
        std::array<CMatrix, 6> second;
        for (std::size_t p = 0; p < 6; ++p) {
            second[p] = spin::symmetric_product(kSpinPairs[p].first, kSpinPairs[p].second, s);
        }
        f.second.push_back(std::move(second));
    }
    return f;
}

ObservableFamily unitary_family(int max_particles, const MaiSetting &mai) {
    ObservableFamily f = linear_family(max_particles);
    for (int n = 0; n <= max_particles; ++n) {
        const auto s = spin::SpinSector::for_particles(n);
        const CMatrix u = spin::oat_unitary(mai.mu2, s, mai.axis);
        const CMatrix ud = u.adjoint();
        for (auto &op : f.first[static_cast<std::size_t>(n)]) {
            op = ud * op * u;
        }
        for (auto &op : f.second[static_cast<std::size_t>(n)]) {
            op = ud * op * u;
        }
    }
    return f;
}

RMatrix3 commutator_matrix(const BlockDensityOperator &rho, const ObservableFamily &g_family,
                           const ObservableFamily &m_family) {
    require_covers(g_family, rho.max_particles(), "G");
    require_covers(m_family, rho.max_particles(), "M");
    Eigen::Matrix3cd c = Eigen::Matrix3cd::Zero();
    for (int n = 0; n <= rho.max_particles(); ++n) {
        const CMatrix &r = rho.block(n);
        const auto &g = g_family.first[static_cast<std::size_t>(n)];
        const auto &m = m_family.first[static_cast<std::size_t>(n)];
        for (int i = 0; i < 3; ++i) {
            // K_i = [G_i, rho]; -i <[M_j, G_i]> = -i Tr(M_j K_i)
            const CMatrix k = g[static_cast<std::size_t>(i)] * r - r * g[static_cast<std::size_t>(i)];
            for (int j = 0; j < 3; ++j) {
                c(i, j) += Complex{0.0, -1.0} *
                           (m[static_cast<std::size_t>(j)].transpose().cwiseProduct(k)).sum();
            }
        }
    }
    RMatrix3 out;
    const double scale = c.cwiseAbs().maxCoeff();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            out(i, j) = real_checked(c(i, j), scale, "commutator matrix");
        }
    }
    return out;
}

RMatrix3 conditional_covariance_matrix(const Assemblage &assemblage, const ObservableFamily &family) {
    require_covers(family, assemblage.max_bob_particles(), "measurement");
    RMatrix3 gamma = RMatrix3::Zero();
    for (const auto &b : assemblage.branches) {
        const auto n = static_cast<std::size_t>(b.bob.particles());
        RVector3 mean;
        for (int i = 0; i < 3; ++i) {
            mean(i) = b.state.dot(family.first[n][static_cast<std::size_t>(i)] * b.state).real();
        }
        for (std::size_t p = 0; p < 6; ++p) {
            const auto [i, j] = kSpinPairs[p];
            const double second = b.state.dot(family.second[n][p] * b.state).real();
            const double cov = second - mean(i) * mean(j);
            gamma(i, j) += b.probability * cov;
            if (i != j) {
                gamma(j, i) += b.probability * cov;
            }
        }
    }
    return gamma;
}

RMatrix3 covariance_pseudo_inverse(const RMatrix3 &gamma) {
    Eigen::SelfAdjointEigenSolver<RMatrix3> solver(0.5 * (gamma + gamma.transpose()));
    const RVector3 &w = solver.eigenvalues();
    const double top = w.maxCoeff();
    if (!(top > kZeroCovariance)) {
        throw DegenerateInputError("conditional covariance matrix is numerically zero");
    }
    RMatrix3 pinv = RMatrix3::Zero();
    for (int k = 0; k < 3; ++k) {
        if (w(k) > kPinvRelative * top) {
            const RVector3 v = solver.eigenvectors().col(k);
            pinv += (v * v.transpose()) / w(k);
        }
    }
    return pinv;
}

RMatrix3 moment_from(const RMatrix3 &C, const RMatrix3 &gamma) {
    const RMatrix3 m = C * covariance_pseudo_inverse(gamma) * C.transpose();
    return 0.5 * (m + m.transpose());
}

RVector3 optimal_m(const RMatrix3 &C, const RMatrix3 &gamma, const RVector3 &n) {
    RVector3 m = covariance_pseudo_inverse(gamma) * C.transpose() * n;
    const double norm = m.norm();
    if (norm > 1e-12 * std::max(1.0, C.norm())) {
        return m / norm;
    }
    Eigen::SelfAdjointEigenSolver<RMatrix3> solver(gamma);
    return solver.eigenvectors().col(2);
}

MomentMatrices moment_matrix(const Assemblage &assemblage_y, const ObservableFamily &g_family,
                             const ObservableFamily &m_family) {
    MomentMatrices out;
    out.C = commutator_matrix(reduced_bob_state(assemblage_y), g_family, m_family);
    out.gamma_y = conditional_covariance_matrix(assemblage_y, m_family);
    out.moment = moment_from(out.C, out.gamma_y);
    return out;
}

namespace {

// Sign chosen so the largest component is positive.
RVector3 canonical_sign(RVector3 v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    return v(k) < 0.0 ? RVector3(-v) : v;
}

} // namespace

ReidPoint reid_violation_at(const SplitSpinState &state, double theta_x, double theta_y,
                            const std::optional<MaiSetting> &mai) {
    const Assemblage ay = condition_on_alice(state, theta_y);
    const Assemblage ax = condition_on_alice(state, theta_x);
    const ObservableFamily g = linear_family(state.atoms());
    const ObservableFamily m = mai ? unitary_family(state.atoms(), *mai) : g;

    ReidPoint out;
    out.moments = moment_matrix(ay, g, m);
    out.moments.gamma_x = conditional_covariance_matrix(ax, g);

    const RMatrix3 d = out.moments.moment - 4.0 * out.moments.gamma_x;
    Eigen::SelfAdjointEigenSolver<RMatrix3> solver(0.5 * (d + d.transpose()));
    out.lambda_max = solver.eigenvalues()(2);
    out.n_opt = canonical_sign(solver.eigenvectors().col(2));
    out.m_opt = canonical_sign(optimal_m(out.moments.C, out.moments.gamma_y, out.n_opt));
    out.first_term = out.n_opt.dot(out.moments.moment * out.n_opt);
    const RMatrix3 gamma_g_y = mai ? conditional_covariance_matrix(ay, g) : out.moments.gamma_y;
    out.conditional_fisher = 4.0 * out.n_opt.dot(gamma_g_y * out.n_opt);
    return out;
}

double fisher_violation_at(const SplitSpinState &state, double theta_x, double theta_y,
                           RVector3 *n_opt) {
    const ObservableFamily g = linear_family(state.atoms());
    const RMatrix3 gy = conditional_covariance_matrix(condition_on_alice(state, theta_y), g);
    const RMatrix3 gx = conditional_covariance_matrix(condition_on_alice(state, theta_x), g);
    const RMatrix3 d = 4.0 * (gy - gx);
    Eigen::SelfAdjointEigenSolver<RMatrix3> solver(0.5 * (d + d.transpose()));
    if (n_opt != nullptr) {
        *n_opt = canonical_sign(solver.eigenvectors().col(2));
    }
    return solver.eigenvalues()(2);
}

double conditional_fisher_information(const Assemblage &assemblage, const RVector3 &n) {
    double total = 0.0;
    for (const auto &b : assemblage.branches) {
        const CMatrix g = spin::spin_along(n, b.bob);
        const CVector gphi = g * b.state;
        const double mean = b.state.dot(gphi).real();
        const double second = gphi.squaredNorm();
        total += b.probability * 4.0 * (second - mean * mean);
    }
    return total;
}

double wrap_theta(double theta) {
    double t = std::fmod(theta, kPi);
    if (t < 0.0) {
        t += kPi;
    }
    return t >= kPi ? 0.0 : t;
}

double wrap_mu2(double mu2) {
    double t = std::fmod(mu2, 4.0 * kPi);
    if (t < 0.0) {
        t += 4.0 * kPi;
    }
    return t >= 4.0 * kPi ? 0.0 : t;
}

} // namespace maisteer
