#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "maisteer/split_state.hpp"
#include "maisteer/types.hpp"

namespace maisteer {

/// Index pairs (a, b), a <= b, in the order xx, xy, xz, yy, yz, zz.
inline constexpr std::array<std::pair<int, int>, 6> kSpinPairs{
    {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

/// Index into kSpinPairs for an unordered pair (a, b).
int spin_pair_index(int a, int b);

/// A triple of Bob observables F_j, given per particle-number sector, with
/// second[n][p] holding the operator whose mean is <F_a F_b> symmetrized for
/// the pair kSpinPairs[p]. For a unitary family this is the symmetrized
/// product; for a channel family it is the evolved product of spin operators.
struct ObservableFamily {
    std::vector<std::array<CMatrix, 3>> first;
    std::vector<std::array<CMatrix, 6>> second;

    [[nodiscard]] int max_particles() const noexcept {
        return static_cast<int>(first.size()) - 1;
    }
};

/// Twisting applied to Bob's readout: U = exp(i (mu2/2) S_axis^2).
struct MaiSetting {
    double mu2 = 0.0;
    RVector3 axis = RVector3::UnitZ();
};

/// (S_x, S_y, S_z) on every sector up to max_particles.
ObservableFamily linear_family(int max_particles);

/// (U^dagger S_x U, U^dagger S_y U, U^dagger S_z U).
ObservableFamily unitary_family(int max_particles, const MaiSetting &mai);

/// C_ij = -i <[M_j, G_i]> on rho.
RMatrix3 commutator_matrix(const BlockDensityOperator &rho, const ObservableFamily &g_family,
                           const ObservableFamily &m_family);

/// Gamma_ij = sum_b p_b Cov(F_i, F_j) over the branches of the assemblage.
RMatrix3 conditional_covariance_matrix(const Assemblage &assemblage, const ObservableFamily &family);

struct MomentMatrices {
    RMatrix3 C = RMatrix3::Zero();
    RMatrix3 gamma_y = RMatrix3::Zero(); // M family under Alice's setting Y
    RMatrix3 gamma_x = RMatrix3::Zero(); // G family under Alice's setting X
    RMatrix3 moment = RMatrix3::Zero();
};

/// Pseudo-inverse of a symmetric PSD 3x3 matrix. Eigenvalues below
/// 1e-10 * lambda_max are dropped. Throws DegenerateInputError if the
/// matrix is numerically zero.
RMatrix3 covariance_pseudo_inverse(const RMatrix3 &gamma);

/// C Gamma^+ C^T. Its quadratic form n^T M n equals max_m (n^T C m)^2 / (m^T Gamma m).
RMatrix3 moment_from(const RMatrix3 &C, const RMatrix3 &gamma);

/// Unit m maximizing (n^T C m)^2 / (m^T Gamma m). Falls back to the
/// dominant direction of Gamma when C^T n vanishes.
RVector3 optimal_m(const RMatrix3 &C, const RMatrix3 &gamma, const RVector3 &n);

/// C on Bob's reduced state, Gamma_Y on the assemblage, M from both.
/// gamma_x is left zero.
MomentMatrices moment_matrix(const Assemblage &assemblage_y, const ObservableFamily &g_family,
                             const ObservableFamily &m_family);

struct ReidPoint {
    double lambda_max = 0.0;
    RVector3 n_opt = RVector3::UnitX();
    RVector3 m_opt = RVector3::UnitX();
    double first_term = 0.0;         // n^T M n
    double conditional_fisher = 0.0; // 4 n^T Gamma^G_Y n
    MomentMatrices moments;
};

/// lambda_max(M - 4 Gamma_X) with G = (S_x, S_y, S_z) and M either linear
/// or conjugated by the twisting unitary.
ReidPoint reid_violation_at(const SplitSpinState &state, double theta_x, double theta_y,
                            const std::optional<MaiSetting> &mai = std::nullopt);

enum class ReidMode { linear, mai, mai_axis_opt };

struct OptimizerSettings {
    int theta_grid = 48;
    int mu2_grid = 64;
    int refine_starts = 3;
    double tolerance = 1e-7;
    int max_evaluations = 4000;
    /// Fix mu2 instead of optimizing it (mai mode only).
    std::optional<double> pin_mu2;
    int axis_theta_grid = 16;
    int axis_mu2_grid = 32;
    int axis_refine_starts = 2;
    int axis_max_evaluations = 3000;
};

struct CriterionResult {
    double delta = 0.0;
    double theta_x = 0.0;
    double theta_y = 0.0;
    double mu2 = 0.0;
    RVector3 axis = RVector3::UnitZ();
    RVector3 n_opt = RVector3::UnitX();
    RVector3 m_opt = RVector3::UnitX();
    double first_term = 0.0;
    double conditional_fisher = 0.0;
    bool converged = true;
    bool warning = false; // set when a refinement hit its evaluation limit
    int evaluations = 0;
};

CriterionResult delta_R(const SplitSpinState &state, ReidMode mode,
                        const OptimizerSettings &settings = {});

/// 4 lambda_max(Gamma^G_Y - Gamma^G_X) at fixed settings, with its eigenvector.
double fisher_violation_at(const SplitSpinState &state, double theta_x, double theta_y,
                           RVector3 *n_opt = nullptr);

/// Maximum of 4 lambda_max(Gamma^G_Y - Gamma^G_X) over Alice's settings.
/// All branches are pure, so 4 Var equals the quantum Fisher information.
/// A seed (typically the MAI optimum) is refined alongside the grid candidates.
CriterionResult delta_F(const SplitSpinState &state, const OptimizerSettings &settings = {},
                        const CriterionResult *seed = nullptr);

struct SteeringSummary {
    CriterionResult linear;
    CriterionResult mai;
    CriterionResult fisher;
    std::optional<CriterionResult> axis;
};

/// delta_R (linear, mai), delta_F and optionally the axis-optimized delta_R,
/// each seeded from the previous optimum.
SteeringSummary steering_hierarchy(const SplitSpinState &state, const OptimizerSettings &settings = {},
                                   bool with_axis = false);

/// sum_b p_b F_Q[phi_b, n.S] evaluated branch by branch as 4(<G^2> - <G>^2).
double conditional_fisher_information(const Assemblage &assemblage, const RVector3 &n);

/// max over mu2 of n^T M n for the z-axis twisting family at Alice setting theta_y.
double max_mai_sensitivity(const SplitSpinState &state, double theta_y, const RVector3 &n,
                           const OptimizerSettings &settings = {});

/// Reduces theta to [0, pi) and mu2 to [0, 4 pi). A 2 pi shift of mu2 acts as
/// a pi rotation about the twisting axis on even-N sectors only, so the
/// twist is 4 pi periodic.
double wrap_theta(double theta);
double wrap_mu2(double mu2);

/// Vertices of an icosahedron subdivided `levels` times, one per antipodal pair.
std::vector<RVector3> hemisphere_axes(int levels);

} // namespace maisteer
