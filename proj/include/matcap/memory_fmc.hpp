#pragma once

#include <vector>

#include "matcap/fmc.hpp"
#include "matcap/rng.hpp"

namespace matcap {

/// Queue-memory augmented dynamics X(n) = U^T X(n-1) V + W s(n) + Q_read(n) + Z(n)
/// with Q_read(n) = sum_t alpha_t X(n-1-t). The FMC analysis holds for p = 1; the
/// nested operator series over memory hops is truncated at m_max (the full series
/// diverges, the truncation depth is part of the quantity being computed).
struct MemoryAugmentedDynamics {
    LinearMatrixDynamics base;
    int p = 1;
    std::vector<double> alpha = {1.0};
    int m_max = 3;
    int k_max = 32;

    void validate_fmc() const;
};

struct MemCovariances {
    Mat psi_state, psi_mem, sigma_state, sigma_mem;
    int m_max_used = 0;
};

struct MemCapacityComparison {
    double j_tot = 0.0;
    double j_tot_mem = 0.0;
    double ratio = 0.0;
    double worst_case_bound = 0.0;  // 4 * j_tot
    bool bound_exceeded = false;    // ratio > 4
};

struct MemSimResult {
    std::vector<Mat> states;
    bool overflow = false;
    int overflow_step = -1;
};

/// psi_state = eps1 F_U(I); psi_mem = eps1 sum_{m=1..m_max} F_U^{m+1}(I) with
/// F_U(A) = sum_k U^kT A U^k; sigma parts analogously with V.
MemCovariances mem_covariances(const MemoryAugmentedDynamics& dyn);

/// d M / d s_k = sum_{m=0..m_max} G^m(U^kT W V^k), G(A) = sum_j U^jT A V^j.
Mat mem_mean_derivative(const MemoryAugmentedDynamics& dyn, int k);

/// J'(k) = Tr(Sigma_tot^-1 (dM)^T Psi_tot^-1 dM) with the total covariances
/// Psi_tot = psi_state + psi_mem, Sigma_tot = sigma_state + sigma_mem.
FmcSeries mem_fmc(const MemoryAugmentedDynamics& dyn);

/// Same J'(k) evaluated through the Woodbury decomposition into memory-fraction
/// matrices; requires m_max >= 1 (the memory covariances must be invertible).
double mem_fmc_decomposed(const MemoryAugmentedDynamics& dyn, int k);

MemCapacityComparison mem_capacity_comparison(const LinearMatrixDynamics& base, int m_max, int k_max);

/// Explicit forward simulation of the queue dynamics (general p, strengths alpha).
MemSimResult simulate_mem_dynamics(const LinearMatrixDynamics& base, int p,
                                   const std::vector<double>& alpha, const std::vector<double>& signal,
                                   int steps, SeededRng& rng, bool noise_on);

}  // namespace matcap
