#include "maisteer/entanglement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "maisteer/nelder_mead.hpp"

namespace maisteer {

SqueezingAngle squeezing_angle(int atoms, double mu) {
    if (atoms < 2) {
        throw InputError("squeezing angle needs at least two atoms");
    }
    if (!std::isfinite(mu) || mu < 0.0) {
        throw InputError("squeezing angle needs a finite mu >= 0");
    }
    if (mu == 0.0) {
        return {0.25 * kPi, true};
    }
    const double num = 4.0 * std::sin(0.5 * mu) * std::pow(std::cos(0.5 * mu), atoms - 2);
    const double den = 1.0 - std::pow(std::cos(mu), atoms - 2);
    if (den <= 0.0) {
        // cos^{N-2}(mu) = 1 only at multiples of pi. Near odd multiples the
        // numerator vanishes faster (ratio -> 0); near even ones the ratio
        // diverges as at mu -> 0.
        return {std::abs(std::cos(0.5 * mu)) < 0.5 ? 0.0 : 0.25 * kPi, true};
    }
    // den > 0 keeps atan2 on the principal arctan branch.
    return {0.5 * std::atan2(num, den), false};
}

double variance_with_gain(const SplitSpinState &state, const SectorOperator &on_bob,
                          const SectorOperator &on_alice, double g) {
    const auto id = identity_operator();
    auto squared = [](const SectorOperator &op) {
        return [op](const spin::SpinSector &s) -> CMatrix {
            const CMatrix m = op(s);
            return m * m;
        };
    };
    const double mb = joint_expectation(state, id, on_bob).real();
    const double ma = joint_expectation(state, on_alice, id).real();
    const double vb = joint_expectation(state, id, squared(on_bob)).real() - mb * mb;
    const double va = joint_expectation(state, squared(on_alice), id).real() - ma * ma;
    const double cov = joint_expectation(state, on_alice, on_bob).real() - ma * mb;
    return vb + g * g * va + 2.0 * g * cov;
}

namespace {

SectorOperator plane_direction(double angle) {
    return [angle](const spin::SpinSector &s) -> CMatrix { return spin::direction_operator(angle, s); };
}

SectorOperator twisted_direction(double angle, double mu2) {
    return [angle, mu2](const spin::SpinSector &s) -> CMatrix {
        const CMatrix u = spin::oat_unitary(mu2, s);
        return u.adjoint() * spin::direction_operator(angle, s) * u;
    };
}

SectorOperator commutator_of(const SectorOperator &a, const SectorOperator &b) {
    return [a, b](const spin::SpinSector &s) -> CMatrix {
        const CMatrix x = a(s);
        const CMatrix y = b(s);
        return x * y - y * x;
    };
}

} // namespace

double giovannetti_value(const SplitSpinState &state, const GiovannettiConfig &cfg) {
    const auto id = identity_operator();
    const auto x = plane_direction(cfg.angle_x);
    const auto y = plane_direction(cfg.angle_y);
    const auto g = plane_direction(cfg.angle_g);
    const auto m = twisted_direction(cfg.angle_m, cfg.mu2);
    const Complex xy = joint_expectation(state, commutator_of(x, y), id);
    const Complex gm = joint_expectation(state, id, commutator_of(g, m));
    const double num = std::norm(std::abs(cfg.g_x * cfg.g_y) * xy + gm);
    return num / variance_with_gain(state, m, y, cfg.g_y) -
           4.0 * variance_with_gain(state, g, x, cfg.g_x);
}

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

// Indices into the moment vector.
constexpr int kAy = 0, kAz = 1, kBy = 2, kBz = 3, kFy = 4, kFz = 5;

class GiovannettiLandscape {
  public:
    explicit GiovannettiLandscape(const SplitSpinState &state) {
        const int atoms = state.atoms();
        for (int na = 0; na <= atoms; ++na) {
            const CMatrix &c = state.amplitudes(na);
            const auto sa = spin::SpinSector::for_particles(na);
            const auto sb = spin::SpinSector::for_particles(atoms - na);
            Sector sec;
            const std::array<CMatrix, 2> a_ops{spin::spin_operator(spin::Axis::y, sa),
                                               spin::spin_operator(spin::Axis::z, sa)};
            const CMatrix a_sx = spin::spin_operator(spin::Axis::x, sa);
            sec.b_ops = {spin::spin_operator(spin::Axis::y, sb), spin::spin_operator(spin::Axis::z, sb)};
            sec.b_sym = {spin::symmetric_product(1, 1, sb), spin::symmetric_product(1, 2, sb),
                         spin::symmetric_product(2, 2, sb)};
            const CMatrix rho_a = c * c.adjoint();
            sec.rho = c.transpose() * c.conjugate();
            for (int k = 0; k <= atoms - na; ++k) {
                sec.m2.push_back(sb.m(k) * sb.m(k));
            }
            alice_sx_ += trace_product(rho_a, a_sx).real();
            for (int i = 0; i < 2; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                mean_(i) += trace_product(rho_a, a_ops[ui]).real();
                mean_(2 + i) += trace_product(sec.rho, sec.b_ops[ui]).real();
                sec.w[ui] = c.adjoint() * a_ops[ui] * c;
                sec.rho_s[ui] = sec.rho * sec.b_ops[ui];
                sec.k[ui] = sec.rho_s[ui] - sec.b_ops[ui] * sec.rho;
                for (int j = 0; j < 2; ++j) {
                    const auto uj = static_cast<std::size_t>(j);
                    const CMatrix sym = 0.5 * (a_ops[ui] * a_ops[uj] + a_ops[uj] * a_ops[ui]);
                    second_(i, j) += trace_product(rho_a, sym).real();
                    second_(2 + i, 2 + j) += trace_product(sec.rho, sec.b_sym[sym_index(i, j)]).real();
                    // <O_A O_B> = Tr(c^dagger O_A c O_B^T)
                    const double ab = elementwise(sec.w[ui], sec.b_ops[uj]).real();
                    second_(i, 2 + j) += ab;
                    second_(2 + j, i) += ab;
                }
            }
            sectors_.push_back(std::move(sec));
        }
    }

    [[nodiscard]] GiovannettiMoments moments(double mu2) const {
        Eigen::Matrix<double, 6, 1> mean = mean_;
        Mat6 second = second_;
        Eigen::Matrix2d comm = Eigen::Matrix2d::Zero();
        for (const auto &sec : sectors_) {
            const auto d = static_cast<Eigen::Index>(sec.m2.size());
            CVector u(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                u(k) = std::polar(1.0, 0.5 * mu2 * sec.m2[static_cast<std::size_t>(k)]);
            }
            const CMatrix p = u.conjugate() * u.transpose(); // conj(u_k) u_l
            std::array<CMatrix, 2> f{p.cwiseProduct(sec.b_ops[0]), p.cwiseProduct(sec.b_ops[1])};
            for (int m = 0; m < 2; ++m) {
                const auto um = static_cast<std::size_t>(m);
                mean(kFy + m) += elementwise(sec.rho.transpose(), f[um]).real();
                for (int n = m; n < 2; ++n) {
                    const double ff =
                        elementwise(sec.rho.transpose(), p.cwiseProduct(sec.b_sym[sym_index(m, n)])).real();
                    second(kFy + m, kFy + n) += ff;
                    if (n != m) {
                        second(kFy + n, kFy + m) += ff;
                    }
                }
                for (int a = 0; a < 2; ++a) {
                    const auto ua = static_cast<std::size_t>(a);
                    const double ab = elementwise(sec.w[ua], f[um]).real();
                    second(kAy + a, kFy + m) += ab;
                    second(kFy + m, kAy + a) += ab;
                    // sym(S_a F_m) = Re Tr(rho S_a F_m)
                    const double bf = elementwise(sec.rho_s[ua].transpose(), f[um]).real();
                    second(kBy + a, kFy + m) += bf;
                    second(kFy + m, kBy + a) += bf;
                    comm(a, m) += (Complex{0.0, -1.0} * elementwise(sec.k[ua].transpose(), f[um])).real();
                }
            }
        }
        GiovannettiMoments out;
        out.covariance = second - mean * mean.transpose();
        out.alice_sx = alice_sx_;
        out.bob_commutator = comm;
        return out;
    }

  private:
    struct Sector {
        CMatrix rho;
        std::array<CMatrix, 2> b_ops;
        std::array<CMatrix, 3> b_sym;
        std::array<CMatrix, 2> w;     // c^dagger O_A c
        std::array<CMatrix, 2> rho_s; // rho S_a
        std::array<CMatrix, 2> k;     // [rho, S_a]... rho S_a - S_a rho
        std::vector<double> m2;
    };

    static std::size_t sym_index(int a, int b) { return static_cast<std::size_t>(a + b); }
    static Complex trace_product(const CMatrix &a, const CMatrix &b) {
        return a.transpose().cwiseProduct(b).sum();
    }
    static Complex elementwise(const CMatrix &a, const CMatrix &b) { return a.cwiseProduct(b).sum(); }

    std::vector<Sector> sectors_;
    Eigen::Matrix<double, 6, 1> mean_ = Eigen::Matrix<double, 6, 1>::Zero();
    Mat6 second_ = Mat6::Zero();
    double alice_sx_ = 0.0;
};

Eigen::Matrix<double, 6, 1> direction(int first, double angle) {
    Eigen::Matrix<double, 6, 1> e = Eigen::Matrix<double, 6, 1>::Zero();
    e(first) = std::cos(angle);
    e(first + 1) = std::sin(angle);
    return e;
}

// Quadratic forms entering the criterion at fixed directions.
struct GainProblem {
    double vm, vy, cmy, vg, vx, cgx, s, c;

    static GainProblem from(const GiovannettiMoments &mo, double ag, double ax, double am, double ay) {
        const auto eg = direction(kBy, ag);
        const auto ex = direction(kAy, ax);
        const auto em = direction(kFy, am);
        const auto ey = direction(kAy, ay);
        const auto &cv = mo.covariance;
        GainProblem p{};
        p.vm = em.dot(cv * em);
        p.vy = ey.dot(cv * ey);
        p.cmy = em.dot(cv * ey);
        p.vg = eg.dot(cv * eg);
        p.vx = ex.dot(cv * ex);
        p.cgx = eg.dot(cv * ex);
        // -i<[X, Y]> = sin(a_Y - a_X) <S_x^A>
        p.s = std::sin(ay - ax) * mo.alice_sx;
        const Eigen::Vector2d g2{std::cos(ag), std::sin(ag)};
        const Eigen::Vector2d m2{std::cos(am), std::sin(am)};
        p.c = g2.dot(mo.bob_commutator * m2);
        return p;
    }

    // u = |g_X|, v = |g_Y|; signs are chosen to shrink both variances.
    [[nodiscard]] double value(double u, double v) const {
        const double num = u * v * s + c;
        return num * num / denominator(v) - 4.0 * (vg - 2.0 * u * std::abs(cgx) + u * u * vx);
    }
    // Rounding floor of value(u, v): a few ulps of its largest term.
    [[nodiscard]] double noise(double u, double v) const {
        const double num = u * v * s + c;
        const double terms = num * num / denominator(v) + 4.0 * (vg + 2.0 * u * std::abs(cgx) + u * u * vx);
        return 16.0 * std::numeric_limits<double>::epsilon() * terms;
    }
    [[nodiscard]] double denominator(double v) const {
        return vm - 2.0 * v * std::abs(cmy) + v * v * vy;
    }
    // Exact maximizer in u >= 0; the u^2 coefficient is <= 0 by the uncertainty
    // relation between M + v Y and X.
    [[nodiscard]] double best_u(double v) const {
        const double d = denominator(v);
        const double a = v * v * s * s / d - 4.0 * vx;
        const double b = 2.0 * v * s * c / d + 8.0 * std::abs(cgx);
        if (!(a < 0.0) || b <= 0.0) {
            return 0.0;
        }
        return -b / (2.0 * a);
    }
    [[nodiscard]] double g_x(double u) const { return cgx >= 0.0 ? -u : u; }
    [[nodiscard]] double g_y(double v) const { return cmy >= 0.0 ? -v : v; }
};

struct GainChoice {
    double value;
    double u;
    double v;
};

// Maximizes over v = tan(tau), tau in [lo, hi), from a grid plus Brent
// refinement. A point only replaces the incumbent if it is better by more
// than the rounding floor, so flat ridges resolve to the smallest gain.
GainChoice maximize_over_v(const std::function<double(double)> &h, const std::function<double(double)> &floor,
                           double lo, double hi, int grid) {
    const double width = (hi - lo) / grid;
    double best_tau = lo + 0.5 * width;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double tau = lo + (i + 0.5) * width;
        const double v = h(tau);
        if (v > best + floor(tau)) {
            best = v;
            best_tau = tau;
        }
    }
    const double a = std::max(lo, best_tau - width);
    const double b = std::min(hi, best_tau + width);
    const auto r = boost::math::tools::brent_find_minima([&](double t) { return -h(t); }, a, b,
                                                         std::numeric_limits<double>::digits / 2);
    if (-r.second > best + floor(r.first)) {
        best = -r.second;
        best_tau = r.first;
    }
    return {best, 0.0, std::tan(best_tau)};
}

GainChoice free_gains(const GainProblem &p, int grid, double max_gain) {
    auto u_of = [&](double v) { return std::min(p.best_u(v), max_gain); };
    auto h = [&](double tau) {
        const double v = std::tan(tau);
        return p.value(u_of(v), v);
    };
    auto floor = [&](double tau) {
        const double v = std::tan(tau);
        return p.noise(u_of(v), v);
    };
    GainChoice g = maximize_over_v(h, floor, 0.0, std::atan(max_gain), grid);
    g.u = u_of(g.v);
    g.value = p.value(g.u, g.v);
    return g;
}

GainChoice unit_product_gains(const GainProblem &p, int grid, double max_gain) {
    auto h = [&](double tau) {
        const double v = std::tan(tau);
        return p.value(1.0 / v, v);
    };
    auto floor = [&](double tau) {
        const double v = std::tan(tau);
        return p.noise(1.0 / v, v);
    };
    GainChoice g = maximize_over_v(h, floor, std::atan(1.0 / max_gain), std::atan(max_gain), grid);
    g.u = 1.0 / g.v;
    g.value = p.value(g.u, g.v);
    return g;
}

double wrap(double a, double period);

// Flipping (G, M) or (X, Y) together with both gains leaves the criterion
// unchanged; use that to bring a_G and a_X into [0, pi).
GiovannettiConfig canonical(GiovannettiConfig cfg) {
    auto fold = [&](double &lead, double &partner) {
        const double k = std::floor(lead / kPi);
        lead -= k * kPi;
        if (lead >= kPi) {
            lead = 0.0;
        }
        if (std::fmod(std::abs(k), 2.0) == 1.0) {
            partner += kPi;
            cfg.g_x = -cfg.g_x;
            cfg.g_y = -cfg.g_y;
        }
        partner = wrap(partner, 2.0 * kPi);
    };
    fold(cfg.angle_g, cfg.angle_m);
    fold(cfg.angle_x, cfg.angle_y);
    return cfg;
}

GiovannettiConfig make_config(const GainProblem &p, const GainChoice &g, double ag, double ax,
                              double am, double ay, double mu2) {
    GiovannettiConfig cfg;
    cfg.g_x = p.g_x(g.u);
    cfg.g_y = p.g_y(g.v);
    cfg.angle_g = ag;
    cfg.angle_x = ax;
    cfg.angle_m = am;
    cfg.angle_y = ay;
    cfg.mu2 = mu2;
    return canonical(cfg);
}

double wrap(double a, double period) {
    double t = std::fmod(a, period);
    if (t < 0.0) {
        t += period;
    }
    return t >= period ? 0.0 : t;
}

} // namespace

GiovannettiMoments giovannetti_moments(const SplitSpinState &state, double mu2) {
    return GiovannettiLandscape(state).moments(mu2);
}

double giovannetti_from_moments(const GiovannettiMoments &moments, const GiovannettiConfig &cfg) {
    const auto eg = direction(kBy, cfg.angle_g);
    const auto ex = direction(kAy, cfg.angle_x);
    const auto em = direction(kFy, cfg.angle_m);
    const auto ey = direction(kAy, cfg.angle_y);
    const auto &cv = moments.covariance;
    const Eigen::Matrix<double, 6, 1> top = em + cfg.g_y * ey;
    const Eigen::Matrix<double, 6, 1> bottom = eg + cfg.g_x * ex;
    const double s = std::sin(cfg.angle_y - cfg.angle_x) * moments.alice_sx;
    const Eigen::Vector2d g2{std::cos(cfg.angle_g), std::sin(cfg.angle_g)};
    const Eigen::Vector2d m2{std::cos(cfg.angle_m), std::sin(cfg.angle_m)};
    const double num = std::abs(cfg.g_x * cfg.g_y) * s + g2.dot(moments.bob_commutator * m2);
    return num * num / top.dot(cv * top) - 4.0 * bottom.dot(cv * bottom);
}

EntanglementResult delta_G(const SplitSpinState &state, GiovannettiMode mode,
                           const EntanglementSettings &settings) {
    if (settings.gain_grid < 2 || settings.angle_grid < 1 || settings.mu2_grid < 1 ||
        settings.refine_starts < 1 || !(settings.max_gain >= 1.0) || !(settings.tolerance > 0.0) || settings.max_evaluations < 1) {
        throw InputError("entanglement optimizer settings out of range");
    }
    const GiovannettiLandscape land(state);
    const SqueezingAngle sq = squeezing_angle(std::max(state.atoms(), 2), state.mu());

    EntanglementResult out;
    out.theta_s = sq.theta;
    out.theta_s_limit = sq.limit;

    const double anti = sq.theta;
    const double squeezed = sq.theta + 0.5 * kPi;
    const double mu2_linear = (mode == GiovannettiMode::mai && settings.pin_mu2) ? *settings.pin_mu2 : 0.0;
    {
        const GiovannettiMoments mo = land.moments(mu2_linear);
        const GainProblem p = GainProblem::from(mo, anti, anti, squeezed, squeezed);
        const GainChoice free = free_gains(p, settings.gain_grid, settings.max_gain);
        const GainChoice unit = unit_product_gains(p, settings.gain_grid, settings.max_gain);
        out.delta = free.value;
        out.config = make_config(p, free, anti, anti, squeezed, squeezed, mu2_linear);
        out.constrained_delta = unit.value;
        out.constrained_config = make_config(p, unit, anti, anti, squeezed, squeezed, mu2_linear);
    }
    if (mode == GiovannettiMode::linear || settings.pin_mu2) {
        return out;
    }

    // Search over (a_G, a_X, a_M, a_Y, mu2). Flipping (G, M) or (X, Y) together
    // leaves the criterion unchanged, so a_G, a_X live in [0, pi).
    const int coarse_gain = std::max(8, settings.gain_grid / 4);
    auto objective = [&](const RVector &x, bool unit) {
        const GiovannettiMoments mo = land.moments(x(4));
        const GainProblem p = GainProblem::from(mo, x(0), x(1), x(2), x(3));
        return unit ? unit_product_gains(p, settings.gain_grid, settings.max_gain).value
                    : free_gains(p, settings.gain_grid, settings.max_gain).value;
    };

    struct Candidate {
        double value;
        RVector x;
    };
    const int na = settings.angle_grid;
    std::vector<Candidate> grid_free;
    std::vector<Candidate> grid_unit;
    for (int k = 0; k < settings.mu2_grid; ++k) {
        const double mu2 = 2.0 * kPi * k / settings.mu2_grid;
        const GiovannettiMoments mo = land.moments(mu2);
        for (int ig = 0; ig < 2 * na; ++ig) {
            const double ag = kPi * ig / (2 * na);
            for (int im = 0; im < 4 * na; ++im) {
                const double am = 2.0 * kPi * im / (4 * na);
                // Alice mirrors Bob's directions on the grid; refinement frees them.
                const GainProblem p = GainProblem::from(mo, ag, ag, am, am);
                RVector x(5);
                x << ag, ag, am, am, mu2;
                grid_free.push_back({free_gains(p, coarse_gain, settings.max_gain).value, x});
                grid_unit.push_back({unit_product_gains(p, coarse_gain, settings.max_gain).value, x});
            }
        }
    }
    auto top = [&](std::vector<Candidate> all) {
        const auto k = std::min<std::size_t>(all.size(), static_cast<std::size_t>(settings.refine_starts));
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                          [](const Candidate &a, const Candidate &b) { return a.value > b.value; });
        all.resize(k);
        return all;
    };

    RVector seed(5);
    seed << anti, anti, squeezed, squeezed, 0.0;
    RVector step(5);
    step << kPi / (2 * na), kPi / (2 * na), kPi / (2 * na), kPi / (2 * na), 2.0 * kPi / settings.mu2_grid;
    NelderMeadOptions opts;
    opts.tolerance = settings.tolerance;
    opts.max_evaluations = settings.max_evaluations;

    auto run = [&](std::vector<Candidate> starts, bool unit, double seed_value) {
        starts.push_back({seed_value, seed});
        NelderMeadResult best;
        bool have = false;
        bool all_converged = true;
        for (const auto &s : starts) {
            auto f = [&](const RVector &x) { return objective(x, unit); };
            NelderMeadResult r = nelder_mead_maximize(f, s.x, step, opts);
            all_converged = all_converged && r.converged;
            if (!have || r.value > best.value) {
                best = std::move(r);
                have = true;
            }
        }
        return std::pair{best, all_converged};
    };

    const auto [free_best, free_ok] = run(top(std::move(grid_free)), false, out.delta);
    const auto [unit_best, unit_ok] = run(top(std::move(grid_unit)), true, out.constrained_delta);

    auto finish = [&](const NelderMeadResult &r, bool unit, double &delta, GiovannettiConfig &cfg) {
        if (r.value <= delta) {
            return; // seed (linear directions) already optimal
        }
        const double mu2 = wrap(r.x(4), 4.0 * kPi);
        const GiovannettiMoments mo = land.moments(r.x(4));
        const GainProblem p = GainProblem::from(mo, r.x(0), r.x(1), r.x(2), r.x(3));
        const GainChoice g = unit ? unit_product_gains(p, settings.gain_grid, settings.max_gain) : free_gains(p, settings.gain_grid, settings.max_gain);
        delta = r.value;
        cfg = make_config(p, g, r.x(0), r.x(1), r.x(2), r.x(3), mu2);
    };
    finish(free_best, false, out.delta, out.config);
    finish(unit_best, true, out.constrained_delta, out.constrained_config);
    out.converged = free_best.converged && unit_best.converged;
    out.warning = !(free_ok && unit_ok);
    return out;
}

} // namespace maisteer
