#include "matcap/fmc.hpp"

#include <cmath>

namespace matcap {

void LinearMatrixDynamics::validate() const {
    if (u.rows() != u.cols() || v.rows() != v.cols() || w.rows() != w.cols())
        throw_error(ErrorCode::ShapeMismatch, "LinearMatrixDynamics: U, V, W must be square");
    if (u.rows() != v.rows() || u.rows() != w.rows())
        throw_error(ErrorCode::ShapeMismatch, "LinearMatrixDynamics: U, V, W must share N");
    if (eps1 <= 0.0 || eps2 <= 0.0)
        throw_error(ErrorCode::ConfigError, "LinearMatrixDynamics: noise scales must be positive");
    if (spectral_radius_estimate(u) >= 1.0 || spectral_radius_estimate(v) >= 1.0)
        throw_error(ErrorCode::NonConvergent, "LinearMatrixDynamics: connectivity not convergent");
}

double geometric_tail_factor(const Mat& u, const Mat& v) {
    Mat pu = u;
    Mat pv = v;
    double sum_g2 = 0.0;
    double best_q = -1.0, best_sum = 0.0;
    for (int m = 1; m <= 256; ++m) {
        if (m > 1) {
            pu = matmul(pu, u);
            pv = matmul(pv, v);
        }
        double g = frobenius_norm(pu) * frobenius_norm(pv);
        sum_g2 += g * g;
        if (g < 1.0 && (best_q < 0.0 || g < best_q)) {
            best_q = g;
            best_sum = sum_g2;
            if (g < 0.5) break;
        }
    }
    if (best_q < 0.0)
        throw_error(ErrorCode::NonConvergent, "geometric_tail_factor: no contracting power within 256 steps");
    return best_sum / (1.0 - best_q * best_q);
}

void state_covariances(const LinearMatrixDynamics& dyn, Mat& psi, Mat& sigma) {
    dyn.validate();
    const Mat id = Mat::identity(dyn.n());
    psi = solve_discrete_lyapunov(dyn.u, id) * dyn.eps1;
    sigma = solve_discrete_lyapunov(dyn.v, id) * dyn.eps2;
}

namespace {

struct FmcContext {
    Mat chol_psi, chol_sigma;
    double tr_psi_inv = 0.0, tr_sigma_inv = 0.0;
    double tail_factor = 0.0;

    explicit FmcContext(const LinearMatrixDynamics& dyn) {
        Mat psi, sigma;
        state_covariances(dyn, psi, sigma);
        chol_psi = cholesky(psi);
        chol_sigma = cholesky(sigma);
        tr_psi_inv = trace(cholesky_solve(chol_psi, Mat::identity(psi.rows())));
        tr_sigma_inv = trace(cholesky_solve(chol_sigma, Mat::identity(sigma.rows())));
        tail_factor = geometric_tail_factor(dyn.u, dyn.v);
    }

    double j_of(const Mat& m) const {
        Mat z = cholesky_solve(chol_psi, m);       // Psi^-1 M
        Mat t = matmul_tn(m, z);                   // M^T Psi^-1 M
        return trace(cholesky_solve(chol_sigma, t));
    }

    double tail_bound(const Mat& m) const {
        return tr_sigma_inv * tr_psi_inv * frobenius_inner(m, m) * tail_factor;
    }
};

}  // namespace

FmcSeries fmc(const LinearMatrixDynamics& dyn, int k_max) {
    FmcContext ctx(dyn);
    FmcSeries out;
    out.values.reserve(k_max + 1);
    out.cumulative.reserve(k_max + 1);
    Mat m = dyn.w;  // U^iT W V^i, accumulated incrementally
    double running = 0.0;
    for (int i = 0; i <= k_max; ++i) {
        double j = ctx.j_of(m);
        running += j;
        out.values.push_back(j);
        out.cumulative.push_back(running);
        if (i < k_max) m = bilinear_form(dyn.u, m, dyn.v);
    }
    out.capacity = running;
    out.truncation_error_bound = ctx.tail_bound(m);
    return out;
}

double capacity(const LinearMatrixDynamics& dyn, double tol) {
    FmcContext ctx(dyn);
    Mat m = dyn.w;
    double sum = 0.0;
    for (int i = 0; i < 200000; ++i) {
        sum += ctx.j_of(m);
        if (ctx.tail_bound(m) < tol) return sum;
        m = bilinear_form(dyn.u, m, dyn.v);
    }
    throw_error(ErrorCode::NonConvergent, "capacity: tail bound did not reach tol");
}

double capacity_normal_closed_form(const LinearMatrixDynamics& dyn) {
    dyn.validate();
    EigNormal eu = eig_normal(dyn.u);
    EigNormal ev = eig_normal(dyn.v);
    const int n = dyn.n();
    double max_u = 0.0, max_v = 0.0;
    for (const auto& l : eu.values) max_u = std::max(max_u, std::abs(l));
    for (const auto& l : ev.values) max_v = std::max(max_v, std::abs(l));
    if (max_u * max_v >= 1.0)
        throw_error(ErrorCode::NonConvergent, "capacity_normal_closed_form: eigenvalue moduli product >= 1");

    CMat b = matmul(matmul(eu.vectors.adjoint(), CMat::from_real(dyn.w)), ev.vectors);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        double au = std::norm(eu.values[j]);  // |lambda_U_j|^2
        for (int k = 0; k < n; ++k) {
            double av = std::norm(ev.values[k]);
            double weight = (1.0 - av) * (1.0 - au) / (1.0 - av * au);
            total += weight * std::norm(b(j, k));
        }
    }
    return total / (dyn.eps1 * dyn.eps2);
}

CapacityBoundsReport capacity_bounds_report(const LinearMatrixDynamics& dyn) {
    dyn.validate();
    CapacityBoundsReport rep;
    rep.j_tot = capacity(dyn, 1e-12);
    rep.input_fisher = frobenius_inner(dyn.w, dyn.w) / (dyn.eps1 * dyn.eps2);
    rep.j_tot_rel = rep.input_fisher > 0.0 ? rep.j_tot / rep.input_fisher : 0.0;
    rep.normal = is_normal(dyn.u) && is_normal(dyn.v);
    double rho_u = spectral_radius_estimate(dyn.u);
    double rho_v = spectral_radius_estimate(dyn.v);
    rep.convergent = rho_u < 1.0 && rho_v < 1.0;
    rep.degenerate_edge = rho_u * rho_v < 1e-14;
    rep.normal_bound_satisfied = rep.j_tot_rel < 1.0;
    const double n2 = static_cast<double>(dyn.n()) * dyn.n();
    rep.general_bound_satisfied = rep.j_tot_rel <= n2 * (1.0 + 1e-9);
    return rep;
}

double expected_state_norm(const LinearMatrixDynamics& dyn, double tol) {
    dyn.validate();
    double tail_factor = geometric_tail_factor(dyn.u, dyn.v);
    Mat m = dyn.w;
    Mat pu = Mat::identity(dyn.n());
    Mat pv = Mat::identity(dyn.n());
    double sum = 0.0;
    for (int k = 0; k < 200000; ++k) {
        double s_signal = frobenius_inner(m, m);
        double s_noise = dyn.eps1 * dyn.eps2 * frobenius_inner(pu, pu) * frobenius_inner(pv, pv);
        sum += s_signal + s_noise;
        double tail = (s_signal + s_noise) * tail_factor;
        if (tail < tol) return sum;
        m = bilinear_form(dyn.u, m, dyn.v);
        pu = matmul(pu, dyn.u);
        pv = matmul(pv, dyn.v);
    }
    throw_error(ErrorCode::NonConvergent, "expected_state_norm: tail bound did not reach tol");
}

DynamicRangeReport dynamic_range_bound_check(const LinearMatrixDynamics& dyn) {
    DynamicRangeReport rep;
    rep.j_tot = capacity(dyn, 1e-12);
    Mat psi, sigma;
    state_covariances(dyn, psi, sigma);
    double tr_psi_inv = trace(inverse_spd(psi));
    double tr_sigma_inv = trace(inverse_spd(sigma));
    rep.bound = tr_sigma_inv * tr_psi_inv * expected_state_norm(dyn);
    rep.holds = rep.j_tot <= rep.bound * (1.0 + 1e-9);
    return rep;
}

void spatiotemporal_fmm(const LinearMatrixDynamics& dyn, int i, int j, Mat& jst_v, Mat& jst_u) {
    Mat psi, sigma;
    state_covariances(dyn, psi, sigma);
    Mat sigma_inv = inverse_spd(sigma);
    Mat psi_inv = inverse_spd(psi);
    Mat vi = Mat::identity(dyn.n());
    Mat vj = Mat::identity(dyn.n());
    Mat ui = Mat::identity(dyn.n());
    Mat uj = Mat::identity(dyn.n());
    for (int p = 0; p < i; ++p) vi = matmul(vi, dyn.v);
    for (int p = 0; p < j; ++p) vj = matmul(vj, dyn.v);
    for (int p = 0; p < i; ++p) ui = matmul(ui, dyn.u);
    for (int p = 0; p < j; ++p) uj = matmul(uj, dyn.u);
    jst_v = matmul_nt(matmul(vj, sigma_inv), vi);  // V^j Sigma^-1 V^iT
    jst_u = matmul_nt(matmul(ui, psi_inv), uj);    // U^i Psi^-1 U^jT
}

FmcSeries vector_fmc(const VectorDynamics& dyn, int k_max) {
    const int n = dyn.w_rec.rows();
    if (dyn.w_rec.cols() != n || static_cast<int>(dyn.v.size()) != n)
        throw_error(ErrorCode::ShapeMismatch, "vector_fmc: W_rec square with matching v");
    if (dyn.eps <= 0.0) throw_error(ErrorCode::ConfigError, "vector_fmc: eps must be positive");
    if (spectral_radius_estimate(dyn.w_rec) >= 1.0)
        throw_error(ErrorCode::NonConvergent, "vector_fmc: recurrent matrix not convergent");

    // C_n = eps * sum_k W^k W^kT = eps * dlyap(W^T, I)
    Mat c = solve_discrete_lyapunov(dyn.w_rec.transpose(), Mat::identity(n)) * dyn.eps;
    Mat chol_c = cholesky(c);
    double tr_c_inv = trace(cholesky_solve(chol_c, Mat::identity(n)));
    double tail_factor = geometric_tail_factor(dyn.w_rec, Mat::identity(1));

    Mat cur(n, 1);
    for (int i = 0; i < n; ++i) cur(i, 0) = dyn.v[i];

    FmcSeries out;
    double running = 0.0;
    for (int i = 0; i <= k_max; ++i) {
        Mat solved = cholesky_solve(chol_c, cur);
        double j = frobenius_inner(cur, solved);
        running += j;
        out.values.push_back(j);
        out.cumulative.push_back(running);
        if (i < k_max) cur = matmul(dyn.w_rec, cur);
    }
    out.capacity = running;
    out.truncation_error_bound = tr_c_inv * frobenius_inner(cur, cur) * tail_factor;
    return out;
}

}  // namespace matcap
