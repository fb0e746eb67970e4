#include "maisteer/spin.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <string>

#include <Eigen/Eigenvalues>

namespace maisteer::spin {

SpinSector SpinSector::for_particles(int particles) {
    if (particles < 0) {
        throw InputError("spin sector needs a non-negative particle count, got " +
                         std::to_string(particles));
    }
    return SpinSector{particles};
}

namespace {

CMatrix raising(const SpinSector &sector) {
    const int d = sector.dim();
    const double j = sector.j();
    CMatrix sp = CMatrix::Zero(d, d);
    for (int k = 0; k + 1 < d; ++k) {
        const double m = sector.m(k);
        sp(k + 1, k) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    }
    return sp;
}

} // namespace

CMatrix spin_operator(Axis axis, const SpinSector &sector) {
    switch (axis) {
    case Axis::x: {
        const CMatrix sp = raising(sector);
        return 0.5 * (sp + sp.adjoint());
    }
    case Axis::y: {
        const CMatrix sp = raising(sector);
        return Complex{0.0, -0.5} * (sp - sp.adjoint());
    }
    case Axis::z: {
        CMatrix sz = CMatrix::Zero(sector.dim(), sector.dim());
        for (int k = 0; k < sector.dim(); ++k) {
            sz(k, k) = sector.m(k);
        }
        return sz;
    }
    }
    throw InputError("unknown spin axis");
}

CMatrix spin_along(const RVector3 &n, const SpinSector &sector) {
    const CMatrix sp = raising(sector);
    const CMatrix sx = 0.5 * (sp + sp.adjoint());
    const CMatrix sy = Complex{0.0, -0.5} * (sp - sp.adjoint());
    return n.x() * sx + n.y() * sy + n.z() * spin_operator(Axis::z, sector);
}

CMatrix direction_operator(double theta, const SpinSector &sector) {
    return spin_along(RVector3{0.0, std::cos(theta), std::sin(theta)}, sector);
}

CMatrix symmetric_product(int a, int b, const SpinSector &sector) {
    static constexpr Axis axes[3] = {Axis::x, Axis::y, Axis::z};
    const CMatrix sa = spin_operator(axes[a], sector);
    const CMatrix sb = spin_operator(axes[b], sector);
    return 0.5 * (sa * sb + sb * sa);
}

HermitianEigen hermitian_eigen(const CMatrix &h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
    if (solver.info() != Eigen::Success) {
        throw NumericalInstabilityError("Hermitian eigendecomposition did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix unitary_from_generator(const CMatrix &h, double t) {
    const auto eig = hermitian_eigen(h);
    CVector phases(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        phases(i) = std::polar(1.0, -t * eig.values(i));
    }
    return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

CMatrix rotation_unitary(const RVector3 &axis, double angle, const SpinSector &sector) {
    return unitary_from_generator(spin_along(axis, sector), angle);
}

namespace {

// Rotation axis and angle carrying z onto n.
std::pair<RVector3, double> axis_angle_from_z(const RVector3 &n) {
    const RVector3 z = RVector3::UnitZ();
    const RVector3 cross = z.cross(n);
    const double s = cross.norm();
    const double c = std::clamp(n.z(), -1.0, 1.0);
    if (s < 1e-14) {
        // n = +z needs no rotation; n = -z turns about x by pi.
        return {RVector3::UnitX(), c > 0 ? 0.0 : kPi};
    }
    return {cross / s, std::atan2(s, c)};
}

void require_unit(const RVector3 &n, const char *what) {
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-10) {
        throw InputError(std::string(what) + " must be a unit vector (|n| = " +
                         std::to_string(n.norm()) + ")");
    }
}

} // namespace

CMatrix rotation_z_to(const RVector3 &n, const SpinSector &sector) {
    require_unit(n, "rotation target");
    const auto [axis, angle] = axis_angle_from_z(n);
    if (angle == 0.0) {
        return CMatrix::Identity(sector.dim(), sector.dim());
    }
    return rotation_unitary(axis, angle, sector);
}

RMatrix3 rotation_frame_matrix(const RVector3 &n) {
    const auto half = SpinSector::for_particles(1);
    const CMatrix r = rotation_z_to(n, half);
    const CMatrix s[3] = {spin_operator(Axis::x, half), spin_operator(Axis::y, half),
                          spin_operator(Axis::z, half)};
    RMatrix3 o;
    for (int a = 0; a < 3; ++a) {
        const CMatrix rotated = r.adjoint() * s[a] * r;
        for (int b = 0; b < 3; ++b) {
            // Tr(S_a S_b) = delta_ab / 2 on spin-1/2.
            o(a, b) = 2.0 * (rotated * s[b]).trace().real();
        }
    }
    return o;
}

CMatrix oat_unitary(double mu2, const SpinSector &sector, const RVector3 &axis) {
    require_unit(axis, "twisting axis");
    const int d = sector.dim();
    CMatrix uz = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        const double m = sector.m(k);
        uz(k, k) = std::polar(1.0, 0.5 * mu2 * m * m);
    }
    if ((axis - RVector3::UnitZ()).norm() < 1e-14) {
        return uz;
    }
    const CMatrix r = rotation_z_to(axis, sector);
    return r * uz * r.adjoint();
}

double max_abs(const CMatrix &a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

RVector3 unit_vector(double polar, double azimuth) {
    return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
            std::cos(polar)};
}

} // namespace maisteer::spin
