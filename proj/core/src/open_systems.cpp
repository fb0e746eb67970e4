#include "maisteer/open_systems.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "maisteer/nelder_mead.hpp"
#include "maisteer/spin.hpp"

namespace maisteer {

namespace {

void validate(const LossConfig &cfg) {
    if (!std::isfinite(cfg.gamma) || cfg.gamma < 0.0) {
        throw InputError("gamma must be finite and >= 0");
    }
    if (!std::isfinite(cfg.chi)) {
        throw InputError("chi must be finite");
    }
    if (!std::isfinite(cfg.t2) || cfg.t2 < 0.0) {
        throw InputError("t2 must be finite and >= 0");
    }
    if (cfg.steps < 0) {
        throw InputError("steps must be >= 1, or 0 for automatic");
    }
}

// Lowering amplitude s_k = <k+1|S_+|k> in sector n.
double ladder(int n, int k) {
    const double j = 0.5 * n;
    const double m = k - j;
    return std::sqrt(std::max(0.0, j * (j + 1.0) - m * (m + 1.0)));
}

double energy(double chi, int n, int k) {
    const double m = k - 0.5 * n;
    return -chi * m * m;
}

// Fixed-step RK4 on x' = rate o x + source(x) with the diagonal part
// integrated exactly. T is an Eigen dense type, one entry per sector.
template <class T, class Source>
void lawson_rk4(std::vector<T> &x, const std::vector<T> &rate, const Source &source,
                double duration, int steps) {
    if (duration == 0.0 || x.empty()) {
        return;
    }
    const double h = duration / steps;
    const std::size_t count = x.size();
    std::vector<T> half(count), full(count);
    for (std::size_t n = 0; n < count; ++n) {
        half[n] = (0.5 * h * rate[n].array()).exp().matrix();
        full[n] = half[n].cwiseProduct(half[n]);
    }
    std::vector<T> tmp(count);
    for (int step = 0; step < steps; ++step) {
        const std::vector<T> k1 = source(x);
        for (std::size_t n = 0; n < count; ++n) {
            tmp[n] = half[n].cwiseProduct(x[n] + (0.5 * h) * k1[n]);
        }
        const std::vector<T> k2 = source(tmp);
        for (std::size_t n = 0; n < count; ++n) {
            tmp[n] = half[n].cwiseProduct(x[n]) + (0.5 * h) * k2[n];
        }
        const std::vector<T> k3 = source(tmp);
        for (std::size_t n = 0; n < count; ++n) {
            tmp[n] = full[n].cwiseProduct(x[n]) + h * half[n].cwiseProduct(k3[n]);
        }
        const std::vector<T> k4 = source(tmp);
        for (std::size_t n = 0; n < count; ++n) {
            x[n] = full[n].cwiseProduct(x[n]) +
                   (h / 6.0) * (full[n].cwiseProduct(k1[n]) +
                                2.0 * half[n].cwiseProduct(k2[n] + k3[n]) + k4[n]);
        }
    }
}

// sqrt((k+1)(l+1)) and sqrt((M-k)(M-l)) for k, l < M.
struct JumpWeights {
    std::vector<CMatrix> a, b; // indexed by M

    explicit JumpWeights(int max_particles)
        : a(static_cast<std::size_t>(max_particles + 1)), b(a.size()) {
        for (int M = 1; M <= max_particles; ++M) {
            CMatrix wa(M, M), wb(M, M);
            for (int k = 0; k < M; ++k) {
                for (int l = 0; l < M; ++l) {
                    wa(k, l) = std::sqrt(double(k + 1) * (l + 1));
                    wb(k, l) = std::sqrt(double(M - k) * (M - l));
                }
            }
            a[static_cast<std::size_t>(M)] = std::move(wa);
            b[static_cast<std::size_t>(M)] = std::move(wb);
        }
    }
};

std::vector<CMatrix> schroedinger_rates(int max_particles, double gamma, double chi) {
    std::vector<CMatrix> rate;
    for (int n = 0; n <= max_particles; ++n) {
        CMatrix r(n + 1, n + 1);
        for (int k = 0; k <= n; ++k) {
            for (int l = 0; l <= n; ++l) {
                r(k, l) = Complex(-gamma * n, -(energy(chi, n, k) - energy(chi, n, l)));
            }
        }
        rate.push_back(std::move(r));
    }
    return rate;
}

std::vector<CMatrix> propagate(std::vector<CMatrix> blocks, double gamma, double chi,
                               double duration, int steps) {
    const int max_n = static_cast<int>(blocks.size()) - 1;
    const JumpWeights w(max_n);
    const auto rate = schroedinger_rates(max_n, gamma, chi);
    const auto source = [&](const std::vector<CMatrix> &x) {
        std::vector<CMatrix> out(x.size());
        for (int n = 0; n <= max_n; ++n) {
            const auto un = static_cast<std::size_t>(n);
            if (n == max_n || gamma == 0.0) {
                out[un] = CMatrix::Zero(n + 1, n + 1);
                continue;
            }
            const int M = n + 1;
            const CMatrix &up = x[un + 1];
            out[un] = gamma * (w.a[static_cast<std::size_t>(M)].cwiseProduct(
                                   up.bottomRightCorner(M, M)) +
                               w.b[static_cast<std::size_t>(M)].cwiseProduct(
                                   up.topLeftCorner(M, M)));
        }
        return out;
    };
    lawson_rk4(blocks, rate, source, duration, steps);
    return blocks;
}

BlockDensityOperator to_operator(const std::vector<CMatrix> &blocks) {
    BlockDensityOperator out(static_cast<int>(blocks.size()) - 1);
    for (std::size_t n = 0; n < blocks.size(); ++n) {
        out.block(static_cast<int>(n)) = blocks[n];
    }
    return out;
}

RVector3 canonical_sign(RVector3 v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    return v(k) < 0.0 ? RVector3(-v) : v;
}

RMatrix3 second_from(Complex z2, Complex d, Complex p, Complex t) {
    RMatrix3 s;
    s(0, 0) = 0.25 * (2.0 * t.real() + d.real());
    s(1, 1) = 0.25 * (d.real() - 2.0 * t.real());
    s(2, 2) = z2.real();
    s(0, 1) = s(1, 0) = 0.5 * t.imag();
    s(0, 2) = s(2, 0) = p.real();
    s(1, 2) = s(2, 1) = p.imag();
    return s;
}

} // namespace

CVector jump_apply(Jump which, const CVector &state) {
    const int n = static_cast<int>(state.size()) - 1;
    if (n < 0) {
        throw InputError("jump_apply: empty state vector");
    }
    CVector out = CVector::Zero(n);
    for (int k = 0; k < n; ++k) {
        out(k) = which == Jump::a ? std::sqrt(double(k + 1)) * state(k + 1)
                                  : std::sqrt(double(n - k)) * state(k);
    }
    return out;
}

CMatrix jump_apply(Jump which, const CMatrix &rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw InputError("jump_apply: block must be square and non-empty");
    }
    const int M = static_cast<int>(rho.rows()) - 1;
    if (M == 0) {
        return CMatrix::Zero(0, 0);
    }
    const JumpWeights w(M);
    const CMatrix &weights = (which == Jump::a ? w.a : w.b)[static_cast<std::size_t>(M)];
    return which == Jump::a ? weights.cwiseProduct(rho.bottomRightCorner(M, M))
                            : weights.cwiseProduct(rho.topLeftCorner(M, M));
}

int default_loss_steps(double gamma, double chi, double duration, int max_particles,
                       bool heisenberg) {
    // Coherent frequencies left in the source term are chi |m_k - m_l|,
    // at most 2 chi on the bands and chi N' on full blocks.
    const double spread = heisenberg ? 2.0 : std::max(1, max_particles);
    const double omega = std::abs(chi) * spread + gamma * std::max(1, max_particles);
    return std::max(4, static_cast<int>(std::ceil(64.0 * omega * duration)));
}

BlockDensityOperator lindblad_evolve(const BlockDensityOperator &rho, const RVector3 &generator,
                                     double theta, const LossConfig &cfg) {
    validate(cfg);
    if (!std::isfinite(theta) || !generator.allFinite()) {
        throw InputError("lindblad_evolve: non-finite encoding");
    }
    const int max_n = rho.max_particles();
    std::vector<CMatrix> blocks;
    for (int n = 0; n <= max_n; ++n) {
        const auto sector = spin::SpinSector::for_particles(n);
        if (theta == 0.0) {
            blocks.push_back(rho.block(n));
        } else {
            const CMatrix u = spin::unitary_from_generator(spin::spin_along(generator, sector), theta);
            blocks.push_back(u * rho.block(n) * u.adjoint());
        }
    }
    const double duration = cfg.t2;
    const int steps =
        cfg.steps > 0 ? cfg.steps : default_loss_steps(cfg.gamma, cfg.chi, duration, max_n, false);
    if (cfg.gamma == 0.0) {
        // The source term vanishes and the integrating factor is exact.
        return to_operator(propagate(std::move(blocks), 0.0, cfg.chi, duration, 1));
    }
    const auto coarse = to_operator(propagate(blocks, cfg.gamma, cfg.chi, duration, steps));
    auto fine = to_operator(propagate(std::move(blocks), cfg.gamma, cfg.chi, duration, 2 * steps));
    const double change = trace_distance(coarse, fine);
    if (!(change < 1e-8)) {
        throw ToleranceError("lindblad_evolve: step halving changed the state by " +
                             std::to_string(change) + " in trace distance");
    }
    return fine;
}

HeisenbergBands::HeisenbergBands(int max_particles) : max_particles_{max_particles} {
    if (max_particles < 0) {
        throw InputError("HeisenbergBands: negative particle number");
    }
    for (int c = 0; c < kChannels; ++c) {
        const int d = kOffset[static_cast<std::size_t>(c)];
        auto &sectors = bands_[static_cast<std::size_t>(c)];
        sectors.resize(static_cast<std::size_t>(max_particles + 1));
        for (int n = 0; n <= max_particles; ++n) {
            const int len = std::max(0, n + 1 - d);
            CVector v(len);
            for (int k = 0; k < len; ++k) {
                const double m = k - 0.5 * n;
                switch (c) {
                case 0: v(k) = m; break;
                case 1: v(k) = m * m; break;
                case 2: {
                    const double below = k > 0 ? ladder(n, k - 1) : 0.0;
                    const double above = ladder(n, k);
                    v(k) = below * below + above * above;
                    break;
                }
                case 3: v(k) = ladder(n, k); break;
                case 4: v(k) = ladder(n, k) * (m + 0.5); break;
                default: v(k) = ladder(n, k + 1) * ladder(n, k); break;
                }
            }
            sectors[static_cast<std::size_t>(n)] = std::move(v);
        }
    }
}

double HeisenbergBands::distance(const HeisenbergBands &other) const {
    if (other.max_particles_ != max_particles_) {
        throw InputError("HeisenbergBands: size mismatch");
    }
    double out = 0.0;
    for (int c = 0; c < kChannels; ++c) {
        for (int n = 0; n <= max_particles_; ++n) {
            const CVector diff = band(c, n) - other.band(c, n);
            if (diff.size() > 0) {
                out = std::max(out, diff.cwiseAbs().maxCoeff());
            }
        }
    }
    return out;
}

namespace {

// <phi| O |phi> for the band (k + d, k).
Complex band_mean(const CVector &v, int d, const CVector &phi) {
    Complex s = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        s += std::conj(phi(k + d)) * v(k) * phi(k);
    }
    return s;
}

// Tr(rho O) for the band (k + d, k).
Complex band_trace(const CVector &v, int d, const CMatrix &rho) {
    Complex s = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        s += rho(k, k + d) * v(k);
    }
    return s;
}

void check_sector(const HeisenbergBands &bands, const CVector &phi, int n) {
    if (n < 0 || n > bands.max_particles() || phi.size() != n + 1) {
        throw InputError("HeisenbergBands: state does not match sector " + std::to_string(n));
    }
}

} // namespace

RVector3 HeisenbergBands::means(const CVector &phi, int n) const {
    check_sector(*this, phi, n);
    const Complex plus = band_mean(band(3, n), 1, phi);
    return {plus.real(), plus.imag(), band_mean(band(0, n), 0, phi).real()};
}

RMatrix3 HeisenbergBands::second_moments(const CVector &phi, int n) const {
    check_sector(*this, phi, n);
    return second_from(band_mean(band(1, n), 0, phi), band_mean(band(2, n), 0, phi),
                       band_mean(band(4, n), 1, phi), band_mean(band(5, n), 2, phi));
}

RVector3 HeisenbergBands::means(const BlockDensityOperator &rho) const {
    RVector3 out = RVector3::Zero();
    const int top = std::min(rho.max_particles(), max_particles_);
    if (rho.max_particles() > max_particles_) {
        throw InputError("HeisenbergBands: state exceeds the band size");
    }
    for (int n = 0; n <= top; ++n) {
        const CMatrix &b = rho.block(n);
        const Complex plus = band_trace(band(3, n), 1, b);
        out += RVector3(plus.real(), plus.imag(), band_trace(band(0, n), 0, b).real());
    }
    return out;
}

RMatrix3 HeisenbergBands::second_moments(const BlockDensityOperator &rho) const {
    if (rho.max_particles() > max_particles_) {
        throw InputError("HeisenbergBands: state exceeds the band size");
    }
    RMatrix3 out = RMatrix3::Zero();
    for (int n = 0; n <= rho.max_particles(); ++n) {
        const CMatrix &b = rho.block(n);
        out += second_from(band_trace(band(1, n), 0, b), band_trace(band(2, n), 0, b),
                           band_trace(band(4, n), 1, b), band_trace(band(5, n), 2, b));
    }
    return out;
}

ObservableFamily HeisenbergBands::to_family() const {
    ObservableFamily out;
    const Complex i(0.0, 1.0);
    for (int n = 0; n <= max_particles_; ++n) {
        const int dim = n + 1;
        const auto dense = [&](int c) {
            const int d = kOffset[static_cast<std::size_t>(c)];
            CMatrix m = CMatrix::Zero(dim, dim);
            const CVector &v = band(c, n);
            for (Eigen::Index k = 0; k < v.size(); ++k) {
                m(k + d, k) = v(k);
            }
            return m;
        };
        const CMatrix z = dense(0), z2 = dense(1), d = dense(2), plus = dense(3), p = dense(4),
                      t = dense(5);
        out.first.push_back({0.5 * (plus + plus.adjoint()), (plus - plus.adjoint()) / (2.0 * i), z});
        out.second.push_back({0.25 * (t + t.adjoint() + d), (t - t.adjoint()) / (4.0 * i),
                              0.5 * (p + p.adjoint()), 0.25 * (d - t - t.adjoint()),
                              (p - p.adjoint()) / (2.0 * i), z2});
    }
    return out;
}

void evolve_heisenberg(HeisenbergBands &bands, double gamma, double chi, double duration, int steps) {
    if (steps < 1) {
        throw InputError("evolve_heisenberg: steps must be >= 1");
    }
    const int max_n = bands.max_particles();
    for (int c = 0; c < HeisenbergBands::kChannels; ++c) {
        const int d = HeisenbergBands::kOffset[static_cast<std::size_t>(c)];
        std::vector<CVector> x, rate;
        std::vector<RVector> alpha, beta;
        for (int n = 0; n <= max_n; ++n) {
            x.push_back(bands.band(c, n));
            const auto len = x.back().size();
            CVector r(len);
            RVector a = RVector::Zero(len), b = RVector::Zero(len);
            for (Eigen::Index k = 0; k < len; ++k) {
                const int ki = static_cast<int>(k);
                r(k) = Complex(-gamma * n, energy(chi, n, ki + d) - energy(chi, n, ki));
                a(k) = std::sqrt(double(ki + d) * ki);
                b(k) = std::sqrt(double(std::max(0, n - ki - d)) * (n - ki));
            }
            rate.push_back(std::move(r));
            alpha.push_back(std::move(a));
            beta.push_back(std::move(b));
        }
        const auto source = [&](const std::vector<CVector> &v) {
            std::vector<CVector> out(v.size());
            for (int n = 0; n <= max_n; ++n) {
                const auto un = static_cast<std::size_t>(n);
                const auto len = v[un].size();
                out[un] = CVector::Zero(len);
                if (n == 0 || len < 2 || gamma == 0.0) {
                    continue;
                }
                const CVector &low = v[un - 1]; // length len - 1
                out[un].tail(len - 1) += gamma * alpha[un].tail(len - 1).cwiseProduct(low);
                out[un].head(len - 1) += gamma * beta[un].head(len - 1).cwiseProduct(low);
            }
            return out;
        };
        lawson_rk4(x, rate, source, duration, gamma == 0.0 ? 1 : steps);
        for (int n = 0; n <= max_n; ++n) {
            bands.band(c, n) = std::move(x[static_cast<std::size_t>(n)]);
        }
    }
}

HeisenbergBands heisenberg_family(int max_particles, const LossConfig &cfg) {
    validate(cfg);
    HeisenbergBands coarse(max_particles);
    if (cfg.t2 == 0.0) {
        return coarse;
    }
    const int steps = cfg.steps > 0
                          ? cfg.steps
                          : default_loss_steps(cfg.gamma, cfg.chi, cfg.t2, max_particles, true);
    HeisenbergBands fine = coarse;
    evolve_heisenberg(coarse, cfg.gamma, cfg.chi, cfg.t2, steps);
    if (cfg.gamma == 0.0) {
        return coarse;
    }
    evolve_heisenberg(fine, cfg.gamma, cfg.chi, cfg.t2, 2 * steps);
    const double scale = std::max(1.0, 0.25 * max_particles * (max_particles + 2.0));
    const double change = fine.distance(coarse);
    if (!(change < 1e-8 * scale)) {
        throw ToleranceError("heisenberg_family: step halving changed the observables by " +
                             std::to_string(change));
    }
    return fine;
}

double channel_squeezing_parameter(const Assemblage &assemblage, const RVector3 &n,
                                   const RVector3 &m, const LossConfig &cfg) {
    validate(cfg);
    if (!n.allFinite() || !m.allFinite() || n.norm() == 0.0 || m.norm() == 0.0) {
        throw InputError("channel_squeezing_parameter: directions must be finite and non-zero");
    }
    const int max_n = assemblage.max_bob_particles();
    const BlockDensityOperator rho = reduced_bob_state(assemblage);
    const auto readout = spin_direction(m);

    const auto mean_at = [&](double theta) {
        return lindblad_evolve(rho, n, theta, cfg).expectation(readout).real();
    };
    const double h = 1e-4;
    const auto central = [&](double step) { return (mean_at(step) - mean_at(-step)) / (2.0 * step); };
    const double derivative = (4.0 * central(0.5 * h) - central(h)) / 3.0;

    const HeisenbergBands bands = heisenberg_family(max_n, cfg);
    const ObservableFamily family = bands.to_family();
    Complex adjoint = 0.0;
    for (int s = 0; s <= max_n; ++s) {
        const auto sector = spin::SpinSector::for_particles(s);
        const auto &f = family.first[static_cast<std::size_t>(s)];
        const CMatrix evolved = m(0) * f[0] + m(1) * f[1] + m(2) * f[2];
        const CMatrix g = spin::spin_along(n, sector);
        adjoint += Complex(0.0, 1.0) * (rho.block(s) * (g * evolved - evolved * g)).trace();
    }
    if (std::abs(derivative - adjoint.real()) > 1e-6 * std::max(1.0, std::abs(adjoint.real()))) {
        throw NumericalInstabilityError("channel_squeezing_parameter: finite difference " +
                                        std::to_string(derivative) + " disagrees with adjoint form " +
                                        std::to_string(adjoint.real()));
    }

    double variance = 0.0;
    for (const Branch &b : assemblage.branches) {
        const int s = b.bob.particles();
        const double mean = m.dot(bands.means(b.state, s));
        variance += b.probability * (m.dot(bands.second_moments(b.state, s) * m) - mean * mean);
    }
    if (!(variance > 1e-14)) {
        throw DegenerateInputError("channel_squeezing_parameter: vanishing readout variance");
    }
    return derivative * derivative / variance;
}

namespace {

// Lossy Reid landscape. C comes from the unconditional reduced state and
// the evolved bands; Gamma_Y from the lossless branches read out through the
// bands; Gamma_X from the lossless branches and the plain spin.
class LossyLandscape {
  public:
    LossyLandscape(const SplitSpinState &state, double gamma, double chi, double steps_per_time)
        : state_{state}, gamma_{gamma}, chi_{chi}, max_n_{state.atoms()},
          rho_{reduced_bob_state(state)}, linear_{linear_family(state.atoms())} {
        for (int n = 0; n <= max_n_; ++n) {
            const auto sector = spin::SpinSector::for_particles(n);
            std::array<CMatrix, 3> k;
            for (int a = 0; a < 3; ++a) {
                const CMatrix s = spin::spin_operator(static_cast<spin::Axis>(a), sector);
                k[static_cast<std::size_t>(a)] = s * rho_.block(n) - rho_.block(n) * s;
            }
            kernels_.push_back(std::move(k));
        }
        steps_per_time_ = steps_per_time > 0.0
                              ? steps_per_time
                              : default_loss_steps(gamma, chi, 1.0, max_n_, true);
    }

    [[nodiscard]] int steps_for(double duration) const {
        return std::max(1, static_cast<int>(std::ceil(steps_per_time_ * duration)));
    }

    [[nodiscard]] HeisenbergBands evolve(HeisenbergBands bands, double duration) const {
        if (duration > 0.0) {
            evolve_heisenberg(bands, gamma_, chi_, duration, steps_for(duration));
        }
        return bands;
    }

    // C_ij = -i Tr([S_i, rho] M_j).
    [[nodiscard]] RMatrix3 commutator(const HeisenbergBands &bands) const {
        RMatrix3 c = RMatrix3::Zero();
        const Complex i(0.0, 1.0);
        for (int n = 0; n <= max_n_; ++n) {
            for (int a = 0; a < 3; ++a) {
                const CMatrix &k = kernels_[static_cast<std::size_t>(n)][static_cast<std::size_t>(a)];
                const CVector &plus = bands.band(3, n);
                Complex up = 0.0, down = 0.0;
                for (Eigen::Index q = 0; q < plus.size(); ++q) {
                    up += plus(q) * k(q, q + 1);
                    down += std::conj(plus(q)) * k(q + 1, q);
                }
                const Complex z = band_trace(bands.band(0, n), 0, k);
                c(a, 0) += (-i * 0.5 * (up + down)).real();
                c(a, 1) += (-i * (up - down) / (2.0 * i)).real();
                c(a, 2) += (-i * z).real();
            }
        }
        return c;
    }

    [[nodiscard]] static RMatrix3 gamma_y(const Assemblage &ay, const HeisenbergBands &bands) {
        RMatrix3 out = RMatrix3::Zero();
        for (const Branch &b : ay.branches) {
            const int n = b.bob.particles();
            const RVector3 mean = bands.means(b.state, n);
            out += b.probability * (bands.second_moments(b.state, n) - mean * mean.transpose());
        }
        return 0.5 * (out + out.transpose());
    }

    [[nodiscard]] RMatrix3 gamma_x(const Assemblage &ax) const {
        return conditional_covariance_matrix(ax, linear_);
    }

    [[nodiscard]] static double value(const RMatrix3 &C, const RMatrix3 &gy, const RMatrix3 &gx) {
        const RMatrix3 d = moment_from(C, gy) - 4.0 * gx;
        return Eigen::SelfAdjointEigenSolver<RMatrix3>(0.5 * (d + d.transpose()),
                                                       Eigen::EigenvaluesOnly)
            .eigenvalues()(2);
    }

    [[nodiscard]] const SplitSpinState &state() const { return state_; }
    [[nodiscard]] const ObservableFamily &linear() const { return linear_; }

  private:
    const SplitSpinState &state_;
    double gamma_, chi_;
    int max_n_;
    BlockDensityOperator rho_;
    ObservableFamily linear_;
    std::vector<std::array<CMatrix, 3>> kernels_;
    double steps_per_time_ = 0.0;
};

std::vector<double> uniform(int count, double period) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(period * i / count);
    }
    return out;
}

} // namespace

CriterionResult delta_R_mai_lossy(const SplitSpinState &state, double gamma,
                                  const LossOptimizerSettings &settings) {
    if (!std::isfinite(gamma) || gamma < 0.0) {
        throw InputError("delta_R_mai_lossy: gamma must be finite and >= 0");
    }
    if (settings.theta_grid < 1 || settings.t2_grid < 1 || settings.refine_starts < 0) {
        throw InputError("delta_R_mai_lossy: grid sizes must be positive");
    }
    const double chi = 1.0;
    const LossyLandscape land(state, gamma, chi, settings.steps_per_unit_time);

    const auto thetas = uniform(settings.theta_grid, kPi);
    const auto times = uniform(settings.t2_grid, kPi / chi);
    std::vector<Assemblage> assemblages;
    std::vector<RMatrix3> gx;
    for (double t : thetas) {
        assemblages.push_back(condition_on_alice(state, t));
        gx.push_back(land.gamma_x(assemblages.back()));
    }

    struct Point {
        double value, theta_x, theta_y, t2;
    };
    std::vector<Point> grid;
    std::vector<HeisenbergBands> snapshots;
    HeisenbergBands bands(state.atoms());
    for (std::size_t s = 0; s < times.size(); ++s) {
        if (s > 0) {
            bands = land.evolve(std::move(bands), times[s] - times[s - 1]);
        }
        snapshots.push_back(bands);
        const RMatrix3 C = land.commutator(bands);
        for (std::size_t y = 0; y < thetas.size(); ++y) {
            const RMatrix3 gy = LossyLandscape::gamma_y(assemblages[y], bands);
            for (std::size_t x = 0; x < thetas.size(); ++x) {
                grid.push_back({LossyLandscape::value(C, gy, gx[x]), thetas[x], thetas[y], times[s]});
            }
        }
    }

    const auto bands_at = [&](double t2) {
        const double step = times.size() > 1 ? times[1] : kPi / chi;
        const auto idx = std::min(snapshots.size() - 1,
                                  static_cast<std::size_t>(std::max(0.0, std::floor(t2 / step))));
        return land.evolve(snapshots[idx], t2 - times[idx]);
    };
    int evaluations = 0;
    const auto objective = [&](const RVector &p) {
        ++evaluations;
        const double t2 = std::abs(p(2));
        const HeisenbergBands b = bands_at(t2);
        const RMatrix3 gy = LossyLandscape::gamma_y(condition_on_alice(state, p(1)), b);
        return LossyLandscape::value(land.commutator(b), gy,
                                     land.gamma_x(condition_on_alice(state, p(0))));
    };

    std::sort(grid.begin(), grid.end(), [](const Point &a, const Point &b) { return a.value > b.value; });
    std::vector<RVector> starts;
    for (int i = 0; i < settings.refine_starts && i < static_cast<int>(grid.size()); ++i) {
        starts.push_back(RVector::Zero(3));
        starts.back() << grid[static_cast<std::size_t>(i)].theta_x,
            grid[static_cast<std::size_t>(i)].theta_y, grid[static_cast<std::size_t>(i)].t2;
    }
    if (settings.seed != nullptr) {
        RVector s(3);
        s << settings.seed->theta_x, settings.seed->theta_y, settings.seed->mu2 / (2.0 * chi);
        starts.push_back(s);
    }

    RVector best(3);
    best << grid.front().theta_x, grid.front().theta_y, grid.front().t2;
    double best_value = grid.front().value;
    bool converged = true;
    bool warning = false;
    const NelderMeadOptions nm{settings.tolerance, settings.max_evaluations};
    RVector step(3);
    step << kPi / settings.theta_grid, kPi / settings.theta_grid, 0.5 * kPi / (chi * settings.t2_grid);
    for (const RVector &s : starts) {
        const NelderMeadResult r = nelder_mead_maximize(objective, s, step, nm);
        if (!r.converged) {
            warning = true;
        }
        if (r.value > best_value) {
            best_value = r.value;
            best = r.x;
            converged = r.converged;
        }
    }

    CriterionResult out;
    out.theta_x = wrap_theta(best(0));
    out.theta_y = wrap_theta(best(1));
    const double t2 = std::abs(best(2));
    out.mu2 = 2.0 * chi * t2;
    out.converged = converged;
    out.warning = warning;
    out.evaluations = evaluations;

    // Final point through the dense family path.
    const HeisenbergBands b = bands_at(t2);
    const Assemblage ay = condition_on_alice(state, out.theta_y);
    const Assemblage ax = condition_on_alice(state, out.theta_x);
    MomentMatrices mm = moment_matrix(ay, land.linear(), b.to_family());
    mm.gamma_x = conditional_covariance_matrix(ax, land.linear());
    const RMatrix3 d = mm.moment - 4.0 * mm.gamma_x;
    Eigen::SelfAdjointEigenSolver<RMatrix3> solver(0.5 * (d + d.transpose()));
    out.delta = solver.eigenvalues()(2);
    out.n_opt = canonical_sign(solver.eigenvectors().col(2));
    out.m_opt = canonical_sign(optimal_m(mm.C, mm.gamma_y, out.n_opt));
    out.first_term = out.n_opt.dot(mm.moment * out.n_opt);
    out.conditional_fisher =
        4.0 * out.n_opt.dot(conditional_covariance_matrix(ay, land.linear()) * out.n_opt);
    return out;
}

} // namespace maisteer
