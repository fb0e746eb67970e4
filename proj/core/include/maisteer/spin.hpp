#pragma once

#include "maisteer/types.hpp"

/// Collective spin operators in the Dicke basis.
///
/// Every sector uses the same basis ordering: index k = 0..2j counts
/// excitations, and the S_z eigenvalue of basis vector k is m = k - j.
namespace maisteer::spin {

enum class Axis { x, y, z };

/// Spin-j representation carried by a fixed number of spin-1/2 particles.
class SpinSector {
  public:
    /// Sector for `particles` spin-1/2 particles, j = particles / 2.
    static SpinSector for_particles(int particles);

    [[nodiscard]] int particles() const noexcept { return twice_j_; }
    [[nodiscard]] int twice_j() const noexcept { return twice_j_; }
    [[nodiscard]] double j() const noexcept { return 0.5 * twice_j_; }
    [[nodiscard]] int dim() const noexcept { return twice_j_ + 1; }
    /// S_z eigenvalue of basis vector k.
    [[nodiscard]] double m(int k) const noexcept { return k - j(); }

    friend bool operator==(const SpinSector &, const SpinSector &) = default;

  private:
    explicit SpinSector(int twice_j) : twice_j_{twice_j} {}
    int twice_j_;
};

CMatrix spin_operator(Axis axis, const SpinSector &sector);

/// n_x S_x + n_y S_y + n_z S_z. `n` is not required to be normalized.
CMatrix spin_along(const RVector3 &n, const SpinSector &sector);

/// cos(theta) S_y + sin(theta) S_z, the yz-plane measurement family.
CMatrix direction_operator(double theta, const SpinSector &sector);

/// Symmetrized product (S_a S_b + S_b S_a) / 2 for a, b in {0,1,2}.
CMatrix symmetric_product(int a, int b, const SpinSector &sector);

struct HermitianEigen {
    RVector values;  // ascending
    CMatrix vectors; // columns
};

HermitianEigen hermitian_eigen(const CMatrix &h);

/// exp(-i t H) for Hermitian H, built from its eigendecomposition.
CMatrix unitary_from_generator(const CMatrix &h, double t);

/// exp(-i angle (axis . S)) for a unit rotation axis.
CMatrix rotation_unitary(const RVector3 &axis, double angle, const SpinSector &sector);

/// Rotation R with R S_z R^dagger = S_n, generated about z x n.
CMatrix rotation_z_to(const RVector3 &n, const SpinSector &sector);

/// Real orthogonal O with R^dagger S_j R = sum_k O_jk S_k for R = rotation_z_to(n).
RMatrix3 rotation_frame_matrix(const RVector3 &n);

/// exp(i (mu2/2) S_n^2). The z-axis variant is diagonal.
CMatrix oat_unitary(double mu2, const SpinSector &sector, const RVector3 &axis = RVector3::UnitZ());

/// Largest |entry|.
double max_abs(const CMatrix &a);

/// Unit vector from polar angle and azimuth.
RVector3 unit_vector(double polar, double azimuth);

} // namespace maisteer::spin
