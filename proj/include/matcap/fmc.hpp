#pragma once

#include <vector>

#include "matcap/linalg.hpp"
#include "matcap/mat.hpp"

namespace matcap {

/// The linear matrix recurrent system X(n) = U^T X(n-1) V + W s(n) + Z(n),
/// Z ~ MN(0, eps1 I, eps2 I).
struct LinearMatrixDynamics {
    Mat u, v, w;
    double eps1 = 1.0;
    double eps2 = 1.0;

    int n() const { return u.rows(); }
    void validate() const;
};

/// A truncated Fisher memory curve: J(0..k_max), running sums, and the capacity
/// estimate (truncated sum plus certified geometric tail bound).
struct FmcSeries {
    std::vector<double> values;
    std::vector<double> cumulative;
    double capacity = 0.0;
    double truncation_error_bound = 0.0;
};

/// Vector-representation baseline x(n) = W_rec x(n-1) + v s(n) + z(n).
struct VectorDynamics {
    Mat w_rec;
    std::vector<double> v;
    double eps = 1.0;
};

struct CapacityBoundsReport {
    double j_tot = 0.0;
    double input_fisher = 0.0;
    double j_tot_rel = 0.0;
    bool normal = false;
    bool convergent = false;
    bool normal_bound_satisfied = false;  // j_tot_rel < 1, meaningful for normal convergent systems
    bool general_bound_satisfied = false;    // j_tot_rel <= N^2
    bool degenerate_edge = false;       // zero/nilpotent spectrum, j_tot_rel sits at the boundary
};

struct DynamicRangeReport {
    double j_tot = 0.0;
    double bound = 0.0;  // Tr(Sigma^-1) Tr(Psi^-1) E[Tr(X^T X)]
    bool holds = false;
};

/// Noise covariances of the stationary state: Psi = eps1 sum U^kT U^k, Sigma = eps2 sum V^kT V^k.
void state_covariances(const LinearMatrixDynamics& dyn, Mat& psi, Mat& sigma);

/// J(i) = Tr(Sigma^-1 V^iT W^T U^i Psi^-1 U^iT W V^i) for i = 0..k_max.
FmcSeries fmc(const LinearMatrixDynamics& dyn, int k_max);

/// Memory capacity J_tot = sum_i J(i), truncated when the certified tail bound drops below tol.
double capacity(const LinearMatrixDynamics& dyn, double tol = 1e-12);

/// Closed form for normal U, V: (1/eps1 eps2) sum_jk g(|lam_V_k|, |lam_U_j|) |b_jk|^2
/// with B = E_U^H W E_V.
double capacity_normal_closed_form(const LinearMatrixDynamics& dyn);

CapacityBoundsReport capacity_bounds_report(const LinearMatrixDynamics& dyn);

/// E[Tr(X^T X)] = sum_k ||U^kT W V^k||_F^2 + eps1 eps2 sum_k Tr(V^kT V^k) Tr(U^kT U^k).
double expected_state_norm(const LinearMatrixDynamics& dyn, double tol = 1e-10);

DynamicRangeReport dynamic_range_bound_check(const LinearMatrixDynamics& dyn);

/// Spatio-temporal Fisher memory matrices Jst_V(i,j) = V^j Sigma^-1 V^iT and
/// Jst_U(i,j) = U^i Psi^-1 U^jT.
void spatiotemporal_fmm(const LinearMatrixDynamics& dyn, int i, int j, Mat& jst_v, Mat& jst_u);

/// Vector baseline FMC: J(i) = v^T W^iT C_n^-1 W^i v with C_n = eps sum_k W^k W^kT.
FmcSeries vector_fmc(const VectorDynamics& dyn, int k_max);

/// Certified bound C with sum_{k>i} (||U^k||_F ||V^k||_F)^2 <= C * (||U^i||_F ||V^i||_F)^2;
/// used to cap truncation tails of all the series above. Throws NonConvergent when no
/// contracting power is found.
double geometric_tail_factor(const Mat& u, const Mat& v);

}  // namespace matcap
