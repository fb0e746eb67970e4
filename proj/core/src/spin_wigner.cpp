#include "maisteer/spin_wigner.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace maisteer::wigner {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

cpp_int factorial(int n) {
    static std::mutex guard;
    static std::vector<cpp_int> table{1};
    std::lock_guard lock(guard);
    while (static_cast<int>(table.size()) <= n) {
        table.push_back(table.back() * static_cast<int>(table.size()));
    }
    return table[static_cast<std::size_t>(n)];
}

bool half_integer_pair(int twice_j, int twice_m) {
    return twice_j >= 0 && std::abs(twice_m) <= twice_j && (twice_j + twice_m) % 2 == 0;
}

int twice(double x, const char *what) {
    const double t = 2.0 * x;
    if (std::abs(t - std::round(t)) > 1e-9) {
        throw InputError(std::string("clebsch_gordan: ") + what + " is not a multiple of 1/2");
    }
    return static_cast<int>(std::lround(t));
}

void check_block(const CMatrix &rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw InputError("spherical Wigner: density block must be square and non-empty");
    }
}

} // namespace

double clebsch_gordan_twice(int j1, int m1, int j2, int m2, int J, int M) {
    if (!half_integer_pair(j1, m1) || !half_integer_pair(j2, m2) || !half_integer_pair(J, M) ||
        m1 + m2 != M || J > j1 + j2 || J < std::abs(j1 - j2) || (j1 + j2 + J) % 2 != 0) {
        return 0.0;
    }
    // Every combination below is an integer once the parity checks pass.
    const int a = (j1 + j2 - J) / 2;
    const int b = (j1 - j2 + J) / 2;
    const int c = (-j1 + j2 + J) / 2;
    const int s = (j1 + j2 + J) / 2 + 1;
    const cpp_rational prefactor =
        cpp_rational(cpp_int((J + 1) * 1) * factorial(a) * factorial(b) * factorial(c), factorial(s)) *
        cpp_rational(factorial((J + M) / 2) * factorial((J - M) / 2) * factorial((j1 - m1) / 2) *
                     factorial((j1 + m1) / 2) * factorial((j2 - m2) / 2) * factorial((j2 + m2) / 2));

    cpp_rational sum = 0;
    for (int k = 0;; ++k) {
        const int d1 = a - k;
        const int d2 = (j1 - m1) / 2 - k;
        const int d3 = (j2 + m2) / 2 - k;
        const int d4 = (J - j2 + m1) / 2 + k;
        const int d5 = (J - j1 - m2) / 2 + k;
        if (d1 < 0 || d2 < 0 || d3 < 0) {
            break;
        }
        if (d4 < 0 || d5 < 0) {
            continue;
        }
        const cpp_rational term(cpp_int(1), factorial(k) * factorial(d1) * factorial(d2) *
                                                factorial(d3) * factorial(d4) * factorial(d5));
        sum += (k % 2 == 0) ? term : cpp_rational(-term);
    }
    if (sum == 0) {
        return 0.0;
    }
    const double magnitude = std::sqrt(static_cast<double>(prefactor * sum * sum));
    return sum > 0 ? magnitude : -magnitude;
}

double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M) {
    return clebsch_gordan_twice(twice(j1, "j1"), twice(m1, "m1"), twice(j2, "j2"), twice(m2, "m2"),
                                twice(J, "J"), twice(M, "M"));
}

CMatrix tensor_operator(int twice_j, int K, int Q) {
    if (twice_j < 0 || K < 0 || K > twice_j || std::abs(Q) > K) {
        throw InputError("tensor_operator: need 0 <= K <= 2j and |Q| <= K");
    }
    // Cached per (2j, K, Q); the Racah sums dominate the cost.
    static std::mutex guard;
    static std::map<std::tuple<int, int, int>, CMatrix> cache;
    {
        std::lock_guard lock(guard);
        if (auto it = cache.find({twice_j, K, Q}); it != cache.end()) {
            return it->second;
        }
    }
    const int d = twice_j + 1;
    CMatrix t = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        const int l = k - Q; // m - m' = Q
        if (l < 0 || l >= d) {
            continue;
        }
        const int tm = 2 * k - twice_j;
        const int tmp = 2 * l - twice_j;
        const double sign = ((twice_j - tmp) / 2) % 2 == 0 ? 1.0 : -1.0;
        t(k, l) = sign * clebsch_gordan_twice(twice_j, tm, twice_j, -tmp, 2 * K, 2 * Q);
    }
    std::lock_guard lock(guard);
    cache.emplace(std::make_tuple(twice_j, K, Q), t);
    return t;
}

CMatrix multipoles(const CMatrix &rho) {
    check_block(rho);
    const int twice_j = static_cast<int>(rho.rows()) - 1;
    CMatrix out = CMatrix::Zero(twice_j + 1, 2 * twice_j + 1);
    for (int K = 0; K <= twice_j; ++K) {
        for (int Q = -K; Q <= K; ++Q) {
            // Tr(rho T^dagger) = sum_ab rho_ab conj(T_ab)
            out(K, Q + twice_j) = rho.cwiseProduct(tensor_operator(twice_j, K, Q).conjugate()).sum();
        }
    }
    return out;
}

Complex spherical_harmonic(int K, int Q, double theta, double phi) {
    if (K < 0 || std::abs(Q) > K) {
        throw InputError("spherical_harmonic: need |Q| <= K");
    }
    const unsigned q = static_cast<unsigned>(std::abs(Q));
    const Complex y = std::sph_legendre(static_cast<unsigned>(K), q, theta) * std::polar(1.0, q * phi);
    if (Q >= 0) {
        return y;
    }
    return (q % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

namespace {

double normalization(int twice_j) { return std::sqrt((twice_j + 1.0) / (4.0 * kPi)); }

Complex wigner_complex(const CMatrix &mp, int twice_j, double theta, double phi) {
    Complex w = 0.0;
    for (int K = 0; K <= twice_j; ++K) {
        for (int Q = -K; Q <= K; ++Q) {
            w += mp(K, Q + twice_j) * spherical_harmonic(K, Q, theta, phi);
        }
    }
    return normalization(twice_j) * w;
}

} // namespace

double wigner_at(const CMatrix &rho, double theta, double phi) {
    return wigner_complex(multipoles(rho), static_cast<int>(rho.rows()) - 1, theta, phi).real();
}

double SphereGrid::theta(int i) const { return kPi * i / n_theta; }
double SphereGrid::phi(int j) const { return 2.0 * kPi * j / n_phi; }

double SphereGrid::integrate() const {
    // sin(theta) vanishes at both poles, so the missing theta = pi row adds nothing.
    double total = 0.0;
    for (int i = 0; i < n_theta; ++i) {
        total += std::sin(theta(i)) * values.row(i).sum();
    }
    return total * (kPi / n_theta) * (2.0 * kPi / n_phi);
}

SphereGrid spherical_wigner(const CMatrix &rho, int n_theta, int n_phi) {
    check_block(rho);
    if (n_theta < 2 || n_phi < 1) {
        throw InputError("spherical_wigner: need n_theta >= 2 and n_phi >= 1");
    }
    const int twice_j = static_cast<int>(rho.rows()) - 1;
    const CMatrix mp = multipoles(rho);
    SphereGrid grid{n_theta, n_phi, RMatrix(n_theta, n_phi)};

    // Legendre factors per theta row, azimuthal phases per column.
    const int width = 2 * twice_j + 1;
    double residue = 0.0, scale = 0.0;
    for (int i = 0; i < n_theta; ++i) {
        CMatrix coeff = CMatrix::Zero(1, width); // sum over K for each Q
        for (int K = 0; K <= twice_j; ++K) {
            for (int Q = -K; Q <= K; ++Q) {
                coeff(0, Q + twice_j) += mp(K, Q + twice_j) * spherical_harmonic(K, Q, grid.theta(i), 0.0);
            }
        }
        for (int j = 0; j < n_phi; ++j) {
            Complex w = 0.0;
            for (int Q = -twice_j; Q <= twice_j; ++Q) {
                w += coeff(0, Q + twice_j) * std::polar(1.0, Q * grid.phi(j));
            }
            w *= normalization(twice_j);
            grid.values(i, j) = w.real();
            residue = std::max(residue, std::abs(w.imag()));
            scale = std::max(scale, std::abs(w.real()));
        }
    }
    if (residue > 1e-10 * std::max(1.0, scale)) {
        throw NumericalInstabilityError("spherical_wigner: imaginary residue " + std::to_string(residue));
    }
    return grid;
}

SphereGrid spherical_wigner(const CVector &state, int n_theta, int n_phi) {
    return spherical_wigner(CMatrix(state * state.adjoint()), n_theta, n_phi);
}

SphereGrid spherical_wigner(const BlockDensityOperator &rho, int n_theta, int n_phi) {
    int chosen = -1;
    for (int n = 0; n <= rho.max_particles(); ++n) {
        const CMatrix &b = rho.block(n);
        if (b.size() > 0 && b.cwiseAbs().maxCoeff() > 1e-14) {
            if (chosen >= 0) {
                throw InputError("spherical_wigner: operator spans sectors " + std::to_string(chosen) +
                                 " and " + std::to_string(n) + "; select one block");
            }
            chosen = n;
        }
    }
    if (chosen < 0) {
        throw InputError("spherical_wigner: operator is zero");
    }
    return spherical_wigner(rho.block(chosen), n_theta, n_phi);
}

} // namespace maisteer::wigner
