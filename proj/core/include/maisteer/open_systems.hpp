#pragma once

#include <array>
#include <vector>

#include "maisteer/criteria.hpp"
#include "maisteer/split_state.hpp"
#include "maisteer/types.hpp"

namespace maisteer {

/// One-body loss on both of Bob's internal states during the twisting
/// H = -chi S_z^2, so that the closed evolution over t2 equals
/// oat_unitary(2 chi t2).
struct LossConfig {
    double gamma = 0.0;
    double chi = 1.0;
    double t2 = 0.0;
    int steps = 0; // 0 picks a step count from the fastest rate
};

enum class Jump { a, b };

/// a|k>_{N'} = sqrt(k)|k-1>_{N'-1}, b|k>_{N'} = sqrt(N'-k)|k>_{N'-1}.
/// `state` lives in sector N' = state.size() - 1; N' = 0 gives an empty vector.
CVector jump_apply(Jump which, const CVector &state);

/// L rho L^dagger for a block of sector N' = rho.rows() - 1.
CMatrix jump_apply(Jump which, const CMatrix &rho);

/// Encodes exp(-i theta n.S) on every block, then integrates the master
/// equation for cfg.t2 with fixed-step RK4 in integrating-factor form.
/// Throws ToleranceError if halving the step moves the result by more
/// than 1e-8 in trace distance.
BlockDensityOperator lindblad_evolve(const BlockDensityOperator &rho, const RVector3 &generator,
                                     double theta, const LossConfig &cfg);

/// Heisenberg-evolved observables Lambda^dagger(O) for the six operators
/// S_z, S_z^2, S_+S_- + S_-S_+, S_+, (S_+S_z + S_zS_+)/2 and S_+^2. Each keeps
/// the single diagonal offset it starts on (0, 0, 0, 1, 1, 2); band(c, n)[k]
/// is the entry (k + d, k) of channel c in sector n.
class HeisenbergBands {
  public:
    static constexpr int kChannels = 6;
    static constexpr std::array<int, kChannels> kOffset{0, 0, 0, 1, 1, 2};

    explicit HeisenbergBands(int max_particles);

    [[nodiscard]] int max_particles() const noexcept { return max_particles_; }
    [[nodiscard]] const CVector &band(int channel, int n) const {
        return bands_[static_cast<std::size_t>(channel)][static_cast<std::size_t>(n)];
    }
    [[nodiscard]] CVector &band(int channel, int n) {
        return bands_[static_cast<std::size_t>(channel)][static_cast<std::size_t>(n)];
    }

    /// Largest entry-wise difference to another set of bands.
    [[nodiscard]] double distance(const HeisenbergBands &other) const;

    /// <F_x>, <F_y>, <F_z> on a pure state of sector n.
    [[nodiscard]] RVector3 means(const CVector &phi, int n) const;
    /// Symmetrized <F_a F_b> on a pure state of sector n.
    [[nodiscard]] RMatrix3 second_moments(const CVector &phi, int n) const;
    /// <F_x>, <F_y>, <F_z> over all blocks of rho.
    [[nodiscard]] RVector3 means(const BlockDensityOperator &rho) const;
    /// Tr(rho F_a F_b) symmetrized, over all blocks of rho.
    [[nodiscard]] RMatrix3 second_moments(const BlockDensityOperator &rho) const;
    /// Dense family (F_x, F_y, F_z) with the evolved second moments.
    [[nodiscard]] ObservableFamily to_family() const;

  private:
    int max_particles_;
    std::array<std::vector<CVector>, kChannels> bands_;
};

/// Integrates the adjoint master equation for `duration` in `steps` steps.
void evolve_heisenberg(HeisenbergBands &bands, double gamma, double chi, double duration, int steps);

/// Step count used when LossConfig::steps is 0.
int default_loss_steps(double gamma, double chi, double duration, int max_particles, bool heisenberg);

/// Heisenberg family at cfg.t2, with the step-halving check.
HeisenbergBands heisenberg_family(int max_particles, const LossConfig &cfg);

/// |d<M>/dtheta|^2 / sum_b p_b Var[Lambda(rho_b), M], with G = n.S encoded
/// before the channel and M = m.S read out after it. The numerator is a
/// Richardson-extrapolated central difference (h = 1e-4) on Bob's evolved
/// reduced state, checked against <i[G, Lambda^dagger(M)]> to 1e-6 relative.
double channel_squeezing_parameter(const Assemblage &assemblage, const RVector3 &n,
                                   const RVector3 &m, const LossConfig &cfg);

struct LossOptimizerSettings {
    int theta_grid = 24;
    int t2_grid = 32;          // snapshots over t2 in [0, pi / chi)
    int refine_starts = 2;
    double tolerance = 1e-7;
    int max_evaluations = 3000;
    double steps_per_unit_time = 0.0; // 0 picks it from the rates
    /// Lossless MAI optimum to seed the refinement (theta_x, theta_y, mu2).
    const CriterionResult *seed = nullptr;
};

/// max over (theta_X, theta_Y, t2) of lambda_max(M_Lambda - 4 Gamma_X), with
/// M from the Heisenberg-evolved triple and Gamma_X from the lossless
/// assemblage. Reported mu2 is 2 chi t2.
CriterionResult delta_R_mai_lossy(const SplitSpinState &state, double gamma,
                                  const LossOptimizerSettings &settings = {});

} // namespace maisteer
