#include "maisteer/split_state.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace maisteer {

namespace {

double binomial(int n, int k) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i; // stays integral at every step
    }
    return c;
}

} // namespace

SplitSpinState::SplitSpinState(int atoms, double mu, std::vector<CMatrix> amplitudes)
    : atoms_{atoms}, mu_{mu}, amplitudes_{std::move(amplitudes)} {
    if (static_cast<int>(amplitudes_.size()) != atoms_ + 1) {
        throw InputError("split state needs one amplitude block per Alice sector");
    }
    for (int n = 0; n <= atoms_; ++n) {
        const auto &c = amplitudes_[static_cast<std::size_t>(n)];
        if (c.rows() != n + 1 || c.cols() != atoms_ - n + 1) {
            throw InputError("amplitude block " + std::to_string(n) + " has the wrong shape");
        }
    }
}

const CMatrix &SplitSpinState::amplitudes(int n_alice) const {
    if (n_alice < 0 || n_alice > atoms_) {
        throw InputError("Alice sector " + std::to_string(n_alice) + " outside [0, " +
                         std::to_string(atoms_) + "]");
    }
    return amplitudes_[static_cast<std::size_t>(n_alice)];
}

double SplitSpinState::norm_squared() const {
    double total = 0.0;
    for (const auto &c : amplitudes_) {
        total += c.squaredNorm();
    }
    return total;
}

SplitSpinState build_split_state(int atoms, double mu) {
    if (atoms < 1 || atoms > kMaxAtoms) {
        throw InputError("atom number must lie in [1, " + std::to_string(kMaxAtoms) + "], got " +
                         std::to_string(atoms));
    }
    if (!std::isfinite(mu)) {
        throw InputError("twisting strength mu must be finite");
    }
    const double scale = std::ldexp(1.0, -atoms);
    std::vector<CMatrix> amplitudes;
    amplitudes.reserve(static_cast<std::size_t>(atoms + 1));
    for (int na = 0; na <= atoms; ++na) {
        const int nb = atoms - na;
        CMatrix c(na + 1, nb + 1);
        const double sector_weight = binomial(atoms, na);
        for (int ka = 0; ka <= na; ++ka) {
            for (int kb = 0; kb <= nb; ++kb) {
                const double magnitude =
                    scale * std::sqrt(sector_weight * binomial(na, ka) * binomial(nb, kb));
                const double m = 0.5 * atoms - ka - kb;
                c(ka, kb) = std::polar(magnitude, -0.5 * mu * m * m);
            }
        }
        amplitudes.push_back(std::move(c));
    }
    return SplitSpinState{atoms, mu, std::move(amplitudes)};
}

double sector_probability(const SplitSpinState &state, int n_alice) {
    return state.amplitudes(n_alice).squaredNorm();
}

int Assemblage::max_bob_particles() const {
    int n = 0;
    for (const auto &b : branches) {
        n = std::max(n, b.bob.particles());
    }
    return n;
}

double Assemblage::total_probability() const {
    double p = 0.0;
    for (const auto &b : branches) {
        p += b.probability;
    }
    return p;
}

BlockDensityOperator::BlockDensityOperator(int max_particles) {
    if (max_particles < 0) {
        throw InputError("block density operator needs max_particles >= 0");
    }
    blocks_.reserve(static_cast<std::size_t>(max_particles + 1));
    for (int n = 0; n <= max_particles; ++n) {
        blocks_.push_back(CMatrix::Zero(n + 1, n + 1));
    }
}

double BlockDensityOperator::trace() const {
    double t = 0.0;
    for (const auto &b : blocks_) {
        t += b.trace().real();
    }
    return t;
}

double BlockDensityOperator::hermiticity_residue() const {
    double r = 0.0;
    for (const auto &b : blocks_) {
        r = std::max(r, spin::max_abs(b - b.adjoint()));
    }
    return r;
}

double BlockDensityOperator::min_eigenvalue() const {
    double lo = 0.0;
    bool first = true;
    for (const auto &b : blocks_) {
        const CMatrix h = 0.5 * (b + b.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::EigenvaluesOnly);
        const double v = solver.eigenvalues().minCoeff();
        lo = first ? v : std::min(lo, v);
        first = false;
    }
    return lo;
}

Complex BlockDensityOperator::expectation(
    const std::function<CMatrix(const spin::SpinSector &)> &op) const {
    Complex total{0.0, 0.0};
    for (int n = 0; n <= max_particles(); ++n) {
        const auto &b = block(n);
        if (b.isZero(0.0)) {
            continue;
        }
        total += (b * op(spin::SpinSector::for_particles(n))).trace();
    }
    return total;
}

double trace_distance(const BlockDensityOperator &a, const BlockDensityOperator &b) {
    const int n_max = std::max(a.max_particles(), b.max_particles());
    double d = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        CMatrix diff = CMatrix::Zero(n + 1, n + 1);
        if (n <= a.max_particles()) {
            diff += a.block(n);
        }
        if (n <= b.max_particles()) {
            diff -= b.block(n);
        }
        const CMatrix h = 0.5 * (diff + diff.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::EigenvaluesOnly);
        d += 0.5 * solver.eigenvalues().cwiseAbs().sum();
    }
    return d;
}

Assemblage condition_on_alice(const SplitSpinState &state, double theta_y) {
    if (!std::isfinite(theta_y)) {
        throw InputError("Alice's measurement angle must be finite");
    }
    constexpr double kBranchCutoff = 1e-14;
    Assemblage out;
    out.setting.theta = theta_y;
    const int atoms = state.atoms();
    for (int na = 0; na <= atoms; ++na) {
        const CMatrix &c = state.amplitudes(na);
        const auto alice = spin::SpinSector::for_particles(na);
        const auto bob = spin::SpinSector::for_particles(atoms - na);
        const auto eig = spin::hermitian_eigen(spin::direction_operator(theta_y, alice));
        // phi_kB = sum_kA conj(v_kA) c(kA, kB) for each eigenvector v.
        const CMatrix projected = eig.vectors.adjoint() * c;
        for (int l = 0; l < alice.dim(); ++l) {
            CVector phi = projected.row(l).transpose();
            const double p = phi.squaredNorm();
            if (p < kBranchCutoff) {
                continue;
            }
            phi /= std::sqrt(p);
            out.branches.push_back(Branch{p, na, eig.values(l), bob, std::move(phi)});
        }
    }
    return out;
}

BlockDensityOperator reduced_bob_state(const Assemblage &assemblage) {
    BlockDensityOperator rho(assemblage.max_bob_particles());
    for (const auto &b : assemblage.branches) {
        rho.block(b.bob.particles()).noalias() += b.probability * (b.state * b.state.adjoint());
    }
    return rho;
}

BlockDensityOperator reduced_bob_state(const SplitSpinState &state) {
    BlockDensityOperator rho(state.atoms());
    for (int na = 0; na <= state.atoms(); ++na) {
        const CMatrix &c = state.amplitudes(na);
        rho.block(state.atoms() - na) = c.transpose() * c.conjugate();
    }
    return rho;
}

SectorOperator identity_operator() {
    return [](const spin::SpinSector &s) -> CMatrix { return CMatrix::Identity(s.dim(), s.dim()); };
}

SectorOperator spin_direction(const RVector3 &n) {
    return [n](const spin::SpinSector &s) -> CMatrix { return spin::spin_along(n, s); };
}

Complex joint_expectation(const SplitSpinState &state, const SectorOperator &on_alice,
                          const SectorOperator &on_bob) {
    Complex total{0.0, 0.0};
    for (int na = 0; na <= state.atoms(); ++na) {
        const CMatrix &c = state.amplitudes(na);
        const CMatrix a = on_alice(spin::SpinSector::for_particles(na));
        const CMatrix b = on_bob(spin::SpinSector::for_particles(state.atoms() - na));
        // sum conj(c_ab) A_aa' B_bb' c_a'b' = Tr(c^dagger A c B^T)
        total += (c.adjoint() * a * c * b.transpose()).trace();
    }
    return total;
}

Complex joint_expectation(const SplitSpinState &state, const RVector3 &alice_direction,
                          const RVector3 &bob_direction) {
    return joint_expectation(state, spin_direction(alice_direction), spin_direction(bob_direction));
}

} // namespace maisteer
