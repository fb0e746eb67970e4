#pragma once

#include <functional>
#include <vector>

#include "maisteer/spin.hpp"
#include "maisteer/types.hpp"

namespace maisteer {

inline constexpr int kMaxAtoms = 40;

/// Spin-squeezed ensemble of N atoms, twisted for mu = 2 chi t and split
/// into two spatial modes A (Alice) and B (Bob).
///
/// amplitudes(n) holds c[k_A][k_B] for the sector with n atoms on Alice's
/// side: an (n + 1) x (N - n + 1) matrix.
class SplitSpinState {
  public:
    SplitSpinState(int atoms, double mu, std::vector<CMatrix> amplitudes);

    [[nodiscard]] int atoms() const noexcept { return atoms_; }
    [[nodiscard]] double mu() const noexcept { return mu_; }
    [[nodiscard]] const CMatrix &amplitudes(int n_alice) const;
    [[nodiscard]] double norm_squared() const;

  private:
    int atoms_;
    double mu_;
    std::vector<CMatrix> amplitudes_;
};

SplitSpinState build_split_state(int atoms, double mu);

/// Probability that Alice holds exactly `n_alice` atoms. Equals C(N, n) / 2^N.
double sector_probability(const SplitSpinState &state, int n_alice);

/// One outcome (N_A, l_A) of Alice's number-resolved measurement.
struct Branch {
    double probability = 0.0;
    int n_alice = 0;
    double alice_value = 0.0; // eigenvalue l_A of Alice's observable
    spin::SpinSector bob = spin::SpinSector::for_particles(0);
    CVector state;            // normalized, length bob.dim()
};

struct AliceSetting {
    double theta = 0.0;          // direction cos(theta) S_y + sin(theta) S_z
    bool number_resolved = true; // outcomes carry N_A
};

struct Assemblage {
    std::vector<Branch> branches;
    AliceSetting setting;

    [[nodiscard]] int max_bob_particles() const;
    [[nodiscard]] double total_probability() const;
};

/// Block-diagonal density operator over particle-number sectors.
/// block(n) is (n + 1) x (n + 1) in the Dicke basis of n particles.
class BlockDensityOperator {
  public:
    BlockDensityOperator() = default;
    explicit BlockDensityOperator(int max_particles);

    [[nodiscard]] int max_particles() const noexcept {
        return static_cast<int>(blocks_.size()) - 1;
    }
    [[nodiscard]] CMatrix &block(int n) { return blocks_.at(static_cast<std::size_t>(n)); }
    [[nodiscard]] const CMatrix &block(int n) const {
        return blocks_.at(static_cast<std::size_t>(n));
    }
    [[nodiscard]] double trace() const;
    /// Largest deviation from Hermiticity over all blocks.
    [[nodiscard]] double hermiticity_residue() const;
    /// Smallest eigenvalue over all blocks.
    [[nodiscard]] double min_eigenvalue() const;
    /// Tr(rho O) with O given per sector.
    [[nodiscard]] Complex expectation(const std::function<CMatrix(const spin::SpinSector &)> &op) const;

  private:
    std::vector<CMatrix> blocks_;
};

/// Trace norm distance (1/2)||a - b||_1, summed over sectors.
double trace_distance(const BlockDensityOperator &a, const BlockDensityOperator &b);

/// Alice measures cos(theta_y) S_y + sin(theta_y) S_z on her atoms and
/// reports (N_A, l_A). Branches below 1e-14 probability are dropped.
Assemblage condition_on_alice(const SplitSpinState &state, double theta_y);

BlockDensityOperator reduced_bob_state(const Assemblage &assemblage);

/// Bob's reduced state straight from the amplitudes (no conditioning).
BlockDensityOperator reduced_bob_state(const SplitSpinState &state);

using SectorOperator = std::function<CMatrix(const spin::SpinSector &)>;

SectorOperator identity_operator();
SectorOperator spin_direction(const RVector3 &n);

/// <O_A (x) O_B> summed over atom-number sectors.
Complex joint_expectation(const SplitSpinState &state, const SectorOperator &on_alice,
                          const SectorOperator &on_bob);
Complex joint_expectation(const SplitSpinState &state, const RVector3 &alice_direction,
                          const RVector3 &bob_direction);

} // namespace maisteer
