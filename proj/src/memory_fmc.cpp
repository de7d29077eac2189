#include "matcap/memory_fmc.hpp"

#include <cmath>

namespace matcap {

void MemoryAugmentedDynamics::validate_fmc() const {
    base.validate();
    if (p != 1 || alpha.size() != 1 || std::abs(alpha[0] - 1.0) > 1e-12)
        throw_error(ErrorCode::ConfigError, "MemoryAugmentedDynamics: FMC analysis requires p = 1, alpha = {1}");
    if (m_max < 0) throw_error(ErrorCode::ConfigError, "MemoryAugmentedDynamics: m_max must be >= 0");
    if (k_max < 0) throw_error(ErrorCode::ConfigError, "MemoryAugmentedDynamics: k_max must be >= 0");
}

MemCovariances mem_covariances(const MemoryAugmentedDynamics& dyn) {
    dyn.validate_fmc();
    const Mat id = Mat::identity(dyn.base.n());
    MemCovariances out;
    out.m_max_used = dyn.m_max;

    Mat acc_u = solve_discrete_lyapunov(dyn.base.u, id);  // F_U(I)
    out.psi_state = acc_u * dyn.base.eps1;
    Mat mem_u(id.rows(), id.cols());
    for (int m = 1; m <= dyn.m_max; ++m) {
        acc_u = solve_discrete_lyapunov(dyn.base.u, acc_u);  // F_U^{m+1}(I)
        mem_u += acc_u;
    }
    out.psi_mem = mem_u * dyn.base.eps1;

    Mat acc_v = solve_discrete_lyapunov(dyn.base.v, id);
    out.sigma_state = acc_v * dyn.base.eps2;
    Mat mem_v(id.rows(), id.cols());
    for (int m = 1; m <= dyn.m_max; ++m) {
        acc_v = solve_discrete_lyapunov(dyn.base.v, acc_v);
        mem_v += acc_v;
    }
    out.sigma_mem = mem_v * dyn.base.eps2;
    return out;
}

namespace {

// sum_{m=0..m_max} G^m(A); the memory-hop series applied to a seed matrix.
Mat hop_series(const MemoryAugmentedDynamics& dyn, const Mat& seed) {
    Mat sum = seed;
    Mat cur = seed;
    for (int m = 1; m <= dyn.m_max; ++m) {
        cur = solve_discrete_sylvester_sum(dyn.base.u, dyn.base.v, cur);
        sum += cur;
    }
    return sum;
}

}  // namespace

Mat mem_mean_derivative(const MemoryAugmentedDynamics& dyn, int k) {
    dyn.validate_fmc();
    Mat seed = dyn.base.w;
    for (int i = 0; i < k; ++i) seed = bilinear_form(dyn.base.u, seed, dyn.base.v);
    return hop_series(dyn, seed);
}

FmcSeries mem_fmc(const MemoryAugmentedDynamics& dyn) {
    MemCovariances cov = mem_covariances(dyn);
    Mat psi_tot = cov.psi_state + cov.psi_mem;
    Mat sigma_tot = cov.sigma_state + cov.sigma_mem;
    Mat chol_psi = cholesky(psi_tot);
    Mat chol_sigma = cholesky(sigma_tot);
    double tr_psi_inv = trace(cholesky_solve(chol_psi, Mat::identity(psi_tot.rows())));
    double tr_sigma_inv = trace(cholesky_solve(chol_sigma, Mat::identity(sigma_tot.rows())));
    double tail_factor = geometric_tail_factor(dyn.base.u, dyn.base.v);

    // G commutes with A -> U^T A V, so dM(k) = U^kT (sum_m G^m(W)) V^k.
    Mat m = hop_series(dyn, dyn.base.w);

    FmcSeries out;
    double running = 0.0;
    for (int k = 0; k <= dyn.k_max; ++k) {
        Mat z = cholesky_solve(chol_psi, m);
        Mat t = matmul_tn(m, z);
        double j = trace(cholesky_solve(chol_sigma, t));
        running += j;
        out.values.push_back(j);
        out.cumulative.push_back(running);
        if (k < dyn.k_max) m = bilinear_form(dyn.base.u, m, dyn.base.v);
    }
    out.capacity = running;
    out.truncation_error_bound = tr_sigma_inv * tr_psi_inv * frobenius_inner(m, m) * tail_factor;
    // Extend past k_max until the tail bound is negligible against the total.
    while (out.truncation_error_bound > 1e-12 * (1.0 + out.capacity)) {
        m = bilinear_form(dyn.base.u, m, dyn.base.v);
        Mat z = cholesky_solve(chol_psi, m);
        Mat t = matmul_tn(m, z);
        out.capacity += trace(cholesky_solve(chol_sigma, t));
        out.truncation_error_bound = tr_sigma_inv * tr_psi_inv * frobenius_inner(m, m) * tail_factor;
    }
    return out;
}

double mem_fmc_decomposed(const MemoryAugmentedDynamics& dyn, int k) {
    if (dyn.m_max < 1)
        throw_error(ErrorCode::SingularCovariance, "mem_fmc_decomposed: memory covariances need m_max >= 1");
    MemCovariances cov = mem_covariances(dyn);

    Mat psi_state_inv = inverse_spd(cov.psi_state);
    Mat sigma_state_inv = inverse_spd(cov.sigma_state);
    Mat psi_mem_inv = inverse_spd(cov.psi_mem);
    Mat sigma_mem_inv = inverse_spd(cov.sigma_mem);

    const Mat id = Mat::identity(dyn.base.n());
    Mat psi_mf = id - matmul(psi_state_inv, inverse_spd(psi_mem_inv + psi_state_inv));
    Mat sigma_mf = id - matmul(sigma_state_inv, inverse_spd(sigma_mem_inv + sigma_state_inv));

    Mat dm_state = dyn.base.w;
    for (int i = 0; i < k; ++i) dm_state = bilinear_form(dyn.base.u, dm_state, dyn.base.v);
    Mat dm = hop_series(dyn, dm_state);
    Mat dm_mem = dm - dm_state;

    Mat psi_eff = matmul(psi_mf, psi_state_inv);      // = Psi_tot^-1
    Mat sigma_eff = matmul(sigma_mf, sigma_state_inv);

    Mat term1 = matmul(sigma_eff, matmul_tn(dm_mem, matmul(psi_eff, dm)));
    Mat term2 = matmul(sigma_eff, matmul_tn(dm, matmul(psi_eff, dm_state)));
    return trace(term1) + trace(term2);
}

MemCapacityComparison mem_capacity_comparison(const LinearMatrixDynamics& base, int m_max, int k_max) {
    MemCapacityComparison rep;
    rep.j_tot = capacity(base, 1e-12);
    MemoryAugmentedDynamics dyn;
    dyn.base = base;
    dyn.m_max = m_max;
    dyn.k_max = k_max;
    rep.j_tot_mem = mem_fmc(dyn).capacity;
    rep.ratio = rep.j_tot > 0.0 ? rep.j_tot_mem / rep.j_tot : 0.0;
    rep.worst_case_bound = 4.0 * rep.j_tot;
    rep.bound_exceeded = rep.ratio > 4.0;
    return rep;
}

MemSimResult simulate_mem_dynamics(const LinearMatrixDynamics& base, int p,
                                   const std::vector<double>& alpha, const std::vector<double>& signal,
                                   int steps, SeededRng& rng, bool noise_on) {
    if (p < 1 || static_cast<int>(alpha.size()) != p)
        throw_error(ErrorCode::ConfigError, "simulate_mem_dynamics: need len(alpha) == p >= 1");
    double alpha_sum = 0.0;
    for (double a : alpha) alpha_sum += a;
    if (std::abs(alpha_sum - 1.0) > 1e-9)
        throw_error(ErrorCode::ConfigError, "simulate_mem_dynamics: alpha must sum to 1");
    if (steps < 1) throw_error(ErrorCode::ConfigError, "simulate_mem_dynamics: steps must be >= 1");

    const int n = base.n();
    const double eps1_sd = std::sqrt(base.eps1);
    const double eps2_sd = std::sqrt(base.eps2);

    MemSimResult out;
    Mat prev(n, n);                          // X(n-1)
    std::vector<Mat> queue(p, Mat(n, n));    // [X(n-2), ..., X(n-1-p)]
    for (int step = 1; step <= steps; ++step) {
        Mat x = bilinear_form(base.u, prev, base.v);
        double s = step - 1 < static_cast<int>(signal.size()) ? signal[step - 1] : 0.0;
        if (s != 0.0) x += base.w * s;
        for (int t = 0; t < p; ++t)
            if (alpha[t] != 0.0) x += queue[t] * alpha[t];
        if (noise_on) {
            // Z = sqrt(eps1) G sqrt(eps2) with unit normal G: MN(0, eps1 I, eps2 I).
            Mat g = rng.normal_mat(n, n);
            x += g * (eps1_sd * eps2_sd);
        }
        if (max_abs(x) > 1e12) {
            out.overflow = true;
            out.overflow_step = step;
            return out;
        }
        for (int t = p - 1; t > 0; --t) queue[t] = queue[t - 1];
        queue[0] = prev;
        prev = x;
        out.states.push_back(std::move(x));
    }
    return out;
}

}  // namespace matcap
