#pragma once

#include "maisteer/split_state.hpp"
#include "maisteer/types.hpp"

namespace maisteer::wigner {

/// <j1 m1; j2 m2 | J M> from doubled quantum numbers. The Racah sum is
/// accumulated in exact rational arithmetic and only the final square root
/// is taken in double precision. Invalid combinations give 0.
double clebsch_gordan_twice(int j1, int m1, int j2, int m2, int J, int M);

/// Same with ordinary (possibly half-integer) quantum numbers.
double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M);

/// T_KQ = sum (-1)^{j-m'} <j m; j -m' | K Q> |m><m'| in the Dicke basis.
CMatrix tensor_operator(int twice_j, int K, int Q);

/// rho_KQ = Tr(rho T_KQ^dagger), stored at (K, Q + 2j).
CMatrix multipoles(const CMatrix &rho);

/// Y_KQ(theta, phi) with the Condon-Shortley phase.
Complex spherical_harmonic(int K, int Q, double theta, double phi);

/// W(theta, phi) = sqrt((2j+1)/4pi) sum_KQ rho_KQ Y_KQ, so the integral over
/// the sphere is Tr(rho).
double wigner_at(const CMatrix &rho, double theta, double phi);

/// theta_i = i pi / n_theta (i < n_theta), phi_j = 2 pi j / n_phi.
struct SphereGrid {
    int n_theta = 0;
    int n_phi = 0;
    RMatrix values; // n_theta x n_phi

    [[nodiscard]] double theta(int i) const;
    [[nodiscard]] double phi(int j) const;
    /// Trapezoid rule in theta (sin weight) and phi.
    [[nodiscard]] double integrate() const;
};

/// Throws NumericalInstabilityError if the imaginary residue exceeds 1e-10.
SphereGrid spherical_wigner(const CMatrix &rho, int n_theta, int n_phi);
SphereGrid spherical_wigner(const CVector &state, int n_theta, int n_phi);
/// The operator must be supported on a single sector; otherwise InputError.
SphereGrid spherical_wigner(const BlockDensityOperator &rho, int n_theta, int n_phi);

} // namespace maisteer::wigner
