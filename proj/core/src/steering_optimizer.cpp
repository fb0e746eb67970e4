#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "maisteer/criteria.hpp"
#include "maisteer/nelder_mead.hpp"

namespace maisteer {

namespace {

// Grid and refinement work on a fast evaluator specialized to the spin
// triple: branch means come from the ladder form of S_+, a z-axis twist is
// a phase on the Dicke amplitudes, and a general axis is handled in the
// frame where it points along z.

struct Conditioned {
    std::vector<double> p;
    std::vector<int> n;
    std::vector<CVector> phi;
    RMatrix3 gamma_g = RMatrix3::Zero(); // covariance of (S_x, S_y, S_z)
};

struct TwistFrame {
    RVector3 axis = RVector3::UnitZ();
    RMatrix3 O = RMatrix3::Identity();
    bool identity = true;
    std::vector<CMatrix> r_adj; // R^dagger per sector
    std::vector<CMatrix> rho;   // R^dagger rho R
    std::vector<std::array<CMatrix, 3>> k; // [S_i, rho] in the rotated frame
};

struct TwistMoments {
    RMatrix3 Q = RMatrix3::Zero(); // Tr(rho U^dagger sym(S_a S_b) U)
    RMatrix3 C = RMatrix3::Zero();
    std::vector<CVector> phase;    // diagonal of U_z per sector
};

class Landscape {
  public:
    explicit Landscape(const SplitSpinState &state) : state_{state}, atoms_{state.atoms()} {
        const BlockDensityOperator rho = reduced_bob_state(state);
        for (int n = 0; n <= atoms_; ++n) {
            const auto s = spin::SpinSector::for_particles(n);
            std::vector<double> ladder(static_cast<std::size_t>(n), 0.0);
            std::vector<double> m(static_cast<std::size_t>(n + 1), 0.0);
            for (int k = 0; k <= n; ++k) {
                m[static_cast<std::size_t>(k)] = s.m(k);
                if (k < n) {
                    ladder[static_cast<std::size_t>(k)] =
                        std::sqrt(s.j() * (s.j() + 1.0) - s.m(k) * (s.m(k) + 1.0));
                }
            }
            ladder_.push_back(std::move(ladder));
            m_.push_back(std::move(m));
            spins_.push_back({spin::spin_operator(spin::Axis::x, s),
                              spin::spin_operator(spin::Axis::y, s),
                              spin::spin_operator(spin::Axis::z, s)});
            std::array<CMatrix, 6> sym;
            for (std::size_t p = 0; p < 6; ++p) {
                sym[p] = spin::symmetric_product(kSpinPairs[p].first, kSpinPairs[p].second, s);
            }
            sym_.push_back(std::move(sym));
            rho_.push_back(rho.block(n));
        }
        q0_ = second_moments(rho_);
    }

    [[nodiscard]] RVector3 means(const CVector &psi, int n) const {
        const auto &s = ladder_[static_cast<std::size_t>(n)];
        const auto &m = m_[static_cast<std::size_t>(n)];
        Complex plus{0.0, 0.0};
        double z = 0.0;
        for (int k = 0; k < n; ++k) {
            plus += s[static_cast<std::size_t>(k)] * std::conj(psi(k + 1)) * psi(k);
        }
        for (int k = 0; k <= n; ++k) {
            z += m[static_cast<std::size_t>(k)] * std::norm(psi(k));
        }
        return {plus.real(), plus.imag(), z};
    }

    [[nodiscard]] Conditioned condition(double theta) const {
        const Assemblage a = condition_on_alice(state_, theta);
        Conditioned c;
        c.gamma_g = q0_;
        for (const auto &b : a.branches) {
            const int n = b.bob.particles();
            const RVector3 f = means(b.state, n);
            c.gamma_g -= b.probability * f * f.transpose();
            c.p.push_back(b.probability);
            c.n.push_back(n);
            c.phi.push_back(b.state);
        }
        return c;
    }

    [[nodiscard]] TwistFrame frame(const RVector3 &axis) const {
        TwistFrame f;
        f.axis = axis.normalized();
        f.identity = (f.axis - RVector3::UnitZ()).norm() < 1e-15;
        if (!f.identity) {
            f.O = spin::rotation_frame_matrix(f.axis);
        }
        for (int n = 0; n <= atoms_; ++n) {
            const auto idx = static_cast<std::size_t>(n);
            CMatrix r = rho_[idx];
            if (!f.identity) {
                const CMatrix rot = spin::rotation_z_to(f.axis, spin::SpinSector::for_particles(n));
                f.r_adj.push_back(rot.adjoint());
                r = f.r_adj.back() * r * rot;
            }
            std::array<CMatrix, 3> k;
            for (std::size_t i = 0; i < 3; ++i) {
                k[i] = spins_[idx][i] * r - r * spins_[idx][i];
            }
            f.rho.push_back(std::move(r));
            f.k.push_back(std::move(k));
        }
        return f;
    }

    [[nodiscard]] TwistMoments moments(const TwistFrame &f, double mu2) const {
        TwistMoments t;
        Eigen::Matrix3cd c = Eigen::Matrix3cd::Zero();
        std::vector<CMatrix> twisted;
        twisted.reserve(static_cast<std::size_t>(atoms_ + 1));
        for (int n = 0; n <= atoms_; ++n) {
            const auto idx = static_cast<std::size_t>(n);
            CVector u(n + 1);
            for (int k = 0; k <= n; ++k) {
                const double m = m_[idx][static_cast<std::size_t>(k)];
                u(k) = std::polar(1.0, 0.5 * mu2 * m * m);
            }
            const CMatrix phases = u * u.adjoint(); // u_k conj(u_l)
            twisted.push_back(phases.cwiseProduct(f.rho[idx]));
            for (int i = 0; i < 3; ++i) {
                const CMatrix kt = phases.cwiseProduct(f.k[idx][static_cast<std::size_t>(i)]);
                for (int j = 0; j < 3; ++j) {
                    c(i, j) += Complex{0.0, -1.0} *
                               (spins_[idx][static_cast<std::size_t>(j)].transpose().cwiseProduct(kt)).sum();
                }
            }
            t.phase.push_back(std::move(u));
        }
        t.C = c.real();
        t.Q = second_moments(twisted);
        return t;
    }

    [[nodiscard]] std::vector<CVector> rotate(const Conditioned &y, const TwistFrame &f) const {
        if (f.identity) {
            return y.phi;
        }
        std::vector<CVector> out;
        out.reserve(y.phi.size());
        for (std::size_t b = 0; b < y.phi.size(); ++b) {
            out.push_back(f.r_adj[static_cast<std::size_t>(y.n[b])] * y.phi[b]);
        }
        return out;
    }

    /// Conditional covariance of the twisted family, in the rotated frame.
    [[nodiscard]] RMatrix3 twisted_gamma(const Conditioned &y, const std::vector<CVector> &phi,
                                         const TwistMoments &t) const {
        RMatrix3 gamma = t.Q;
        CVector psi;
        for (std::size_t b = 0; b < phi.size(); ++b) {
            psi = t.phase[static_cast<std::size_t>(y.n[b])].cwiseProduct(phi[b]);
            const RVector3 f = means(psi, y.n[b]);
            gamma -= y.p[b] * f * f.transpose();
        }
        return gamma;
    }

    /// Moment matrix in the rotated frame.
    [[nodiscard]] RMatrix3 moment(const Conditioned &y, const std::vector<CVector> &phi,
                                  const TwistMoments &t) const {
        return moment_from(t.C, twisted_gamma(y, phi, t));
    }

    [[nodiscard]] static double value(const RMatrix3 &moment_rot, const TwistFrame &f,
                                      const RMatrix3 &gamma_x) {
        const RMatrix3 gx = f.identity ? gamma_x : RMatrix3(f.O.transpose() * gamma_x * f.O);
        const RMatrix3 d = moment_rot - 4.0 * gx;
        return Eigen::SelfAdjointEigenSolver<RMatrix3>(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly)
            .eigenvalues()(2);
    }

    [[nodiscard]] double evaluate(double theta_x, double theta_y, double mu2,
                                  const TwistFrame &f) const {
        const Conditioned y = condition(theta_y);
        const Conditioned x = condition(theta_x);
        const TwistMoments t = moments(f, mu2);
        return value(moment(y, rotate(y, f), t), f, x.gamma_g);
    }

  private:
    [[nodiscard]] RMatrix3 second_moments(const std::vector<CMatrix> &rho) const {
        RMatrix3 q = RMatrix3::Zero();
        for (int n = 0; n <= atoms_; ++n) {
            const auto idx = static_cast<std::size_t>(n);
            for (std::size_t p = 0; p < 6; ++p) {
                const auto [a, b] = kSpinPairs[p];
                const double v = (sym_[idx][p].transpose().cwiseProduct(rho[idx])).sum().real();
                q(a, b) += v;
                if (a != b) {
                    q(b, a) += v;
                }
            }
        }
        return q;
    }

    const SplitSpinState &state_;
    int atoms_;
    std::vector<std::vector<double>> ladder_;
    std::vector<std::vector<double>> m_;
    std::vector<std::array<CMatrix, 3>> spins_;
    std::vector<std::array<CMatrix, 6>> sym_;
    std::vector<CMatrix> rho_;
    RMatrix3 q0_ = RMatrix3::Zero();
};

struct Candidate {
    double value;
    RVector x;
};

std::vector<Candidate> top_candidates(std::vector<Candidate> all, int count) {
    const auto k = std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(count, 0)));
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Candidate &a, const Candidate &b) { return a.value > b.value; });
    all.resize(k);
    return all;
}

std::vector<double> uniform_grid(int count, double period) {
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        g[static_cast<std::size_t>(i)] = period * i / count;
    }
    return g;
}

struct Refined {
    NelderMeadResult best;
    int evaluations = 0;
    bool all_converged = true;
};

Refined refine(const std::function<double(const RVector &)> &f, const std::vector<Candidate> &starts,
               const RVector &step, double tolerance, int max_evaluations) {
    Refined r;
    bool have = false;
    for (const auto &s : starts) {
        NelderMeadOptions opts;
        opts.tolerance = tolerance;
        opts.max_evaluations = max_evaluations;
        NelderMeadResult nm = nelder_mead_maximize(f, s.x, step, opts);
        r.evaluations += nm.evaluations;
        r.all_converged = r.all_converged && nm.converged;
        if (!have || nm.value > r.best.value) {
            r.best = std::move(nm);
            have = true;
        }
    }
    return r;
}

void validate(const OptimizerSettings &s) {
    if (s.theta_grid < 1 || s.mu2_grid < 1 || s.axis_theta_grid < 1 || s.axis_mu2_grid < 1) {
        throw InputError("optimizer grids need at least one point");
    }
    if (s.refine_starts < 1 || s.axis_refine_starts < 0) {
        throw InputError("optimizer needs at least one refinement start");
    }
    if (!(s.tolerance > 0.0) || s.max_evaluations < 1 || s.axis_max_evaluations < 1) {
        throw InputError("optimizer tolerance and evaluation limits must be positive");
    }
}

CriterionResult finish(const SplitSpinState &state, double value, double theta_x, double theta_y,
                       double mu2, const RVector3 &axis, bool mai, const Refined &r) {
    CriterionResult out;
    out.delta = value;
    out.theta_x = wrap_theta(theta_x);
    out.theta_y = wrap_theta(theta_y);
    out.mu2 = mai ? wrap_mu2(mu2) : 0.0;
    out.axis = axis;
    const ReidPoint p = mai ? reid_violation_at(state, out.theta_x, out.theta_y, MaiSetting{out.mu2, axis})
                            : reid_violation_at(state, out.theta_x, out.theta_y);
    out.n_opt = p.n_opt;
    out.m_opt = p.m_opt;
    out.first_term = p.first_term;
    out.conditional_fisher = p.conditional_fisher;
    out.converged = r.best.converged;
    out.warning = !r.all_converged;
    out.evaluations = r.evaluations;
    return out;
}

// Optimizes (theta_x, theta_y) at fixed mu2 on the z axis.
CriterionResult fixed_mu2(const Landscape &land, const SplitSpinState &state, double mu2, bool mai,
                          const OptimizerSettings &s) {
    const TwistFrame zf = land.frame(RVector3::UnitZ());
    const auto thetas = uniform_grid(s.theta_grid, kPi);
    std::vector<Conditioned> cond;
    cond.reserve(thetas.size());
    for (double t : thetas) {
        cond.push_back(land.condition(t));
    }
    const TwistMoments tm = land.moments(zf, mu2);
    std::vector<Candidate> all;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const RMatrix3 m = land.moment(cond[j], cond[j].phi, tm);
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            RVector x(2);
            x << thetas[i], thetas[j];
            all.push_back({Landscape::value(m, zf, cond[i].gamma_g), x});
        }
    }
    auto f = [&](const RVector &x) { return land.evaluate(x(0), x(1), mu2, zf); };
    const double cell = kPi / s.theta_grid;
    const Refined r = refine(f, top_candidates(std::move(all), s.refine_starts),
                             RVector::Constant(2, cell), s.tolerance, s.max_evaluations);
    return finish(state, r.best.value, r.best.x(0), r.best.x(1), mu2, RVector3::UnitZ(), mai, r);
}

CriterionResult free_mu2(const Landscape &land, const SplitSpinState &state,
                         const CriterionResult &linear, const OptimizerSettings &s) {
    const TwistFrame zf = land.frame(RVector3::UnitZ());
    const auto thetas = uniform_grid(s.theta_grid, kPi);
    const auto mus = uniform_grid(s.mu2_grid, 2.0 * kPi);
    std::vector<Conditioned> cond;
    for (double t : thetas) {
        cond.push_back(land.condition(t));
    }
    std::vector<TwistMoments> tms;
    for (double mu : mus) {
        tms.push_back(land.moments(zf, mu));
    }
    std::vector<Candidate> all;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        for (std::size_t k = 0; k < mus.size(); ++k) {
            const RMatrix3 m = land.moment(cond[j], cond[j].phi, tms[k]);
            for (std::size_t i = 0; i < thetas.size(); ++i) {
                RVector x(3);
                x << thetas[i], thetas[j], mus[k];
                all.push_back({Landscape::value(m, zf, cond[i].gamma_g), x});
            }
        }
    }
    auto starts = top_candidates(std::move(all), s.refine_starts);
    RVector seed(3);
    seed << linear.theta_x, linear.theta_y, 0.0;
    starts.push_back({linear.delta, seed});

    auto f = [&](const RVector &x) { return land.evaluate(x(0), x(1), x(2), zf); };
    RVector step(3);
    step << kPi / s.theta_grid, kPi / s.theta_grid, 2.0 * kPi / s.mu2_grid;
    const Refined r = refine(f, starts, step, s.tolerance, s.max_evaluations);
    return finish(state, r.best.value, r.best.x(0), r.best.x(1), r.best.x(2), RVector3::UnitZ(), true, r);
}

CriterionResult axis_opt(const Landscape &land, const SplitSpinState &state,
                         const CriterionResult &mai, const OptimizerSettings &s) {
    const auto thetas = uniform_grid(s.axis_theta_grid, kPi);
    const auto mus = uniform_grid(s.axis_mu2_grid, 2.0 * kPi);
    std::vector<Conditioned> cond;
    for (double t : thetas) {
        cond.push_back(land.condition(t));
    }
    std::vector<Candidate> all;
    for (const RVector3 &axis : hemisphere_axes(2)) {
        const TwistFrame fr = land.frame(axis);
        std::vector<TwistMoments> tms;
        for (double mu : mus) {
            tms.push_back(land.moments(fr, mu));
        }
        const double polar = std::acos(std::clamp(axis.z(), -1.0, 1.0));
        const double azimuth = std::atan2(axis.y(), axis.x());
        for (std::size_t j = 0; j < thetas.size(); ++j) {
            const auto rotated = land.rotate(cond[j], fr);
            for (std::size_t k = 0; k < mus.size(); ++k) {
                const RMatrix3 m = land.moment(cond[j], rotated, tms[k]);
                for (std::size_t i = 0; i < thetas.size(); ++i) {
                    RVector x(5);
                    x << thetas[i], thetas[j], mus[k], polar, azimuth;
                    all.push_back({Landscape::value(m, fr, cond[i].gamma_g), x});
                }
            }
        }
    }
    auto starts = top_candidates(std::move(all), s.axis_refine_starts);
    RVector seed(5);
    seed << mai.theta_x, mai.theta_y, mai.mu2, 0.0, 0.0;
    starts.push_back({mai.delta, seed});

    auto f = [&](const RVector &x) {
        return land.evaluate(x(0), x(1), x(2), land.frame(spin::unit_vector(x(3), x(4))));
    };
    RVector step(5);
    step << kPi / s.axis_theta_grid, kPi / s.axis_theta_grid, 2.0 * kPi / s.axis_mu2_grid, 0.2, 0.2;
    const Refined r = refine(f, starts, step, s.tolerance, s.axis_max_evaluations);
    if (r.best.value < mai.delta) {
        CriterionResult keep = mai;
        keep.evaluations += r.evaluations;
        return keep;
    }
    const RVector3 axis = spin::unit_vector(r.best.x(3), r.best.x(4));
    return finish(state, r.best.value, r.best.x(0), r.best.x(1), r.best.x(2), axis, true, r);
}

} // namespace

std::vector<RVector3> hemisphere_axes(int levels) {
    if (levels < 0) {
        throw InputError("sphere subdivision level must be non-negative");
    }
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<RVector3> v{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                            {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                            {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto &p : v) {
        p.normalize();
    }
    std::vector<std::array<int, 3>> faces{
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int level = 0; level < levels; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) {
                return it->second;
            }
            v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
            const int idx = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto &f : faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    constexpr double eps = 1e-12;
    std::vector<RVector3> out;
    for (const auto &p : v) {
        const bool upper = p.z() > eps || (std::abs(p.z()) <= eps &&
                                           (p.y() > eps || (std::abs(p.y()) <= eps && p.x() > 0.0)));
        if (upper) {
            out.push_back(p);
        }
    }
    return out;
}

CriterionResult delta_R(const SplitSpinState &state, ReidMode mode, const OptimizerSettings &settings) {
    validate(settings);
    const Landscape land(state);
    if (mode == ReidMode::linear) {
        return fixed_mu2(land, state, 0.0, false, settings);
    }
    if (mode == ReidMode::mai && settings.pin_mu2) {
        return fixed_mu2(land, state, *settings.pin_mu2, true, settings);
    }
    const CriterionResult linear = fixed_mu2(land, state, 0.0, false, settings);
    CriterionResult mai = free_mu2(land, state, linear, settings);
    if (mode == ReidMode::mai) {
        return mai;
    }
    return axis_opt(land, state, mai, settings);
}

CriterionResult delta_F(const SplitSpinState &state, const OptimizerSettings &settings,
                        const CriterionResult *seed) {
    validate(settings);
    const Landscape land(state);
    const auto thetas = uniform_grid(settings.theta_grid, kPi);
    std::vector<RMatrix3> gammas;
    for (double t : thetas) {
        gammas.push_back(land.condition(t).gamma_g);
    }
    auto fisher = [](const RMatrix3 &gy, const RMatrix3 &gx) {
        const RMatrix3 d = 4.0 * (gy - gx);
        return Eigen::SelfAdjointEigenSolver<RMatrix3>(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly)
            .eigenvalues()(2);
    };
    std::vector<Candidate> all;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            RVector x(2);
            x << thetas[i], thetas[j];
            all.push_back({fisher(gammas[j], gammas[i]), x});
        }
    }
    auto starts = top_candidates(std::move(all), settings.refine_starts);
    if (seed != nullptr) {
        RVector x(2);
        x << seed->theta_x, seed->theta_y;
        starts.push_back({seed->delta, x});
    }
    auto f = [&](const RVector &x) {
        return fisher(land.condition(x(1)).gamma_g, land.condition(x(0)).gamma_g);
    };
    const Refined r = refine(f, starts, RVector::Constant(2, kPi / settings.theta_grid),
                             settings.tolerance, settings.max_evaluations);
    CriterionResult out;
    out.delta = r.best.value;
    out.theta_x = wrap_theta(r.best.x(0));
    out.theta_y = wrap_theta(r.best.x(1));
    fisher_violation_at(state, out.theta_x, out.theta_y, &out.n_opt);
    out.m_opt = out.n_opt;
    out.conditional_fisher =
        conditional_fisher_information(condition_on_alice(state, out.theta_y), out.n_opt);
    out.first_term = out.conditional_fisher;
    out.converged = r.best.converged;
    out.warning = !r.all_converged;
    out.evaluations = r.evaluations;
    return out;
}

SteeringSummary steering_hierarchy(const SplitSpinState &state, const OptimizerSettings &settings,
                                   bool with_axis) {
    validate(settings);
    const Landscape land(state);
    SteeringSummary out;
    out.linear = fixed_mu2(land, state, 0.0, false, settings);
    out.mai = free_mu2(land, state, out.linear, settings);
    out.fisher = delta_F(state, settings, &out.mai);
    if (with_axis) {
        out.axis = axis_opt(land, state, out.mai, settings);
    }
    return out;
}

double max_mai_sensitivity(const SplitSpinState &state, double theta_y, const RVector3 &n,
                           const OptimizerSettings &settings) {
    validate(settings);
    const Landscape land(state);
    const TwistFrame zf = land.frame(RVector3::UnitZ());
    const Conditioned y = land.condition(theta_y);
    auto f = [&](const RVector &x) {
        const RMatrix3 m = land.moment(y, y.phi, land.moments(zf, x(0)));
        return n.dot(m * n);
    };
    std::vector<Candidate> all;
    for (double mu : uniform_grid(settings.mu2_grid, 2.0 * kPi)) {
        RVector x(1);
        x << mu;
        all.push_back({f(x), x});
    }
    const Refined r = refine(f, top_candidates(std::move(all), settings.refine_starts),
                             RVector::Constant(1, 2.0 * kPi / settings.mu2_grid), settings.tolerance,
                             settings.max_evaluations);
    return r.best.value;
}

} // namespace maisteer
