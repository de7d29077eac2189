#include "matcap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace matcap {

namespace {

void require_square(const Mat& a, const char* who) {
    if (a.rows() != a.cols()) throw_error(ErrorCode::ShapeMismatch, std::string(who) + ": matrix not square");
}

}  // namespace

double spectral_radius_estimate(const Mat& a, int squarings) {
    require_square(a, "spectral_radius_estimate");
    double nb = frobenius_norm(a);
    if (nb == 0.0) return 0.0;
    Mat b = a * (1.0 / nb);
    double log_scale = std::log(nb);  // b * exp(log_scale) = a^(2^m)
    double estimate = nb;
    for (int m = 1; m <= squarings; ++m) {
        b = matmul(b, b);
        double n2 = frobenius_norm(b);
        if (n2 == 0.0) return 0.0;
        b *= 1.0 / n2;
        log_scale = 2.0 * log_scale + std::log(n2);
        estimate = std::exp(log_scale / std::pow(2.0, m));
    }
    return estimate;
}

Mat solve_discrete_lyapunov(const Mat& a, const Mat& q, double tol, int iter_max) {
    require_square(a, "solve_discrete_lyapunov");
    if (!a.same_shape(q)) throw_error(ErrorCode::ShapeMismatch, "solve_discrete_lyapunov: A and Q differ in size");
    if (tol <= 0.0) throw_error(ErrorCode::ConfigError, "solve_discrete_lyapunov: tol must be positive");
    if (spectral_radius_estimate(a) >= 1.0)
        throw_error(ErrorCode::NonConvergent, "solve_discrete_lyapunov: spectral radius estimate >= 1");

    // X_{m} = sum_{k < 2^m} A^kT Q A^k; doubling the power of A each step.
    Mat x = q;
    Mat p = a;
    for (int m = 0; m < iter_max; ++m) {
        Mat inc = matmul_tn(p, matmul(x, p));
        x += inc;
        double residual = max_abs(matmul_tn(a, matmul(x, a)) + q - x);
        if (residual <= tol) {
            if (!x.all_finite()) throw_error(ErrorCode::NonConvergent, "solve_discrete_lyapunov: non-finite result");
            return x;
        }
        p = matmul(p, p);
    }
    throw_error(ErrorCode::NonConvergent, "solve_discrete_lyapunov: residual above tol after iter_max iterations");
}

Mat solve_discrete_sylvester_sum(const Mat& u, const Mat& v, const Mat& a, double tol, int iter_max) {
    require_square(u, "solve_discrete_sylvester_sum");
    require_square(v, "solve_discrete_sylvester_sum");
    if (a.rows() != u.rows() || a.cols() != v.rows())
        throw_error(ErrorCode::ShapeMismatch, "solve_discrete_sylvester_sum: A not conformable with U, V");
    if (spectral_radius_estimate(u) * spectral_radius_estimate(v) >= 1.0)
        throw_error(ErrorCode::NonConvergent, "solve_discrete_sylvester_sum: radius(U)*radius(V) >= 1");

    Mat x = a;
    Mat pu = u;
    Mat pv = v;
    for (int m = 0; m < iter_max; ++m) {
        Mat inc = matmul_tn(pu, matmul(x, pv));
        x += inc;
        double residual = max_abs(matmul_tn(u, matmul(x, v)) + a - x);
        if (residual <= tol) {
            if (!x.all_finite())
                throw_error(ErrorCode::NonConvergent, "solve_discrete_sylvester_sum: non-finite result");
            return x;
        }
        pu = matmul(pu, pu);
        pv = matmul(pv, pv);
    }
    throw_error(ErrorCode::NonConvergent, "solve_discrete_sylvester_sum: residual above tol after iter_max");
}

bool is_normal(const Mat& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    double scale = frobenius_inner(a, a);
    if (scale == 0.0) return true;
    Mat comm = matmul_nt(a, a) - matmul_tn(a, a);
    return max_abs(comm) <= rel_tol * scale;
}

namespace {

// Cyclic Jacobi sweeps on a Hermitian matrix; diagonalizes in place, accumulating the
// unitary transform into `e`. Entries below ~1e-15 * scale are annihilated.
void hermitian_jacobi(CMat& h, CMat& e) {
    const int n = h.rows();
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(h(i, j)));
    if (scale == 0.0) return;
    const double stop = 1e-15 * scale;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(h(p, q)));
        if (off <= stop) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                std::complex<double> hpq = h(p, q);
                double ah = std::abs(hpq);
                if (ah <= stop) continue;
                // Phase-rotate column q so the pivot becomes real, then a real Givens
                // rotation annihilates it.
                std::complex<double> phase = hpq / ah;
                double app = h(p, p).real();
                double aqq = h(q, q).real();
                double tau = (aqq - app) / (2.0 * ah);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                // Combined unitary: col p <- c*col p - s*conj(phase)*col q;
                //                   col q <- s*phase*col p + c*col q.
                std::complex<double> sp = s * phase;
                std::complex<double> spc = std::conj(sp);
                for (int i = 0; i < n; ++i) {
                    std::complex<double> hip = h(i, p), hiq = h(i, q);
                    h(i, p) = c * hip - spc * hiq;
                    h(i, q) = sp * hip + c * hiq;
                }
                for (int j = 0; j < n; ++j) {
                    std::complex<double> hpj = h(p, j), hqj = h(q, j);
                    h(p, j) = c * hpj - sp * hqj;
                    h(q, j) = spc * hpj + c * hqj;
                }
                for (int i = 0; i < n; ++i) {
                    std::complex<double> eip = e(i, p), eiq = e(i, q);
                    e(i, p) = c * eip - spc * eiq;
                    e(i, q) = sp * eip + c * eiq;
                }
                h(p, q) = 0.0;
                h(q, p) = 0.0;
            }
        }
    }
}

}  // namespace

void eig_symmetric(const Mat& a, Mat& q, std::vector<double>& d) {
    require_square(a, "eig_symmetric");
    const int n = a.rows();
    CMat h = CMat::from_real(a);
    CMat e = CMat::identity(n);
    hermitian_jacobi(h, e);
    q = Mat(n, n);
    d.resize(n);
    for (int i = 0; i < n; ++i) {
        d[i] = h(i, i).real();
        for (int j = 0; j < n; ++j) q(i, j) = e(i, j).real();
    }
}

EigNormal eig_normal(const Mat& a) {
    require_square(a, "eig_normal");
    const int n = a.rows();
    if (!is_normal(a)) throw_error(ErrorCode::NotNormal, "eig_normal: matrix is not normal within tolerance");

    // A = S + K with S symmetric, K skew; for normal A they commute, so diagonalize S
    // first and then i*K (Hermitian) restricted to each eigenvalue cluster of S.
    Mat s(n, n), k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            s(i, j) = 0.5 * (a(i, j) + a(j, i));
            k(i, j) = 0.5 * (a(i, j) - a(j, i));
        }

    Mat qs;
    std::vector<double> d;
    eig_symmetric(s, qs, d);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return d[i] < d[j]; });

    double dmax = 0.0;
    for (double v : d) dmax = std::max(dmax, std::abs(v));
    const double cluster_tol = 1e-11 * (1.0 + dmax);

    EigNormal out;
    out.values.resize(n);
    out.vectors = CMat(n, n);

    int start = 0;
    while (start < n) {
        int end = start + 1;
        while (end < n && d[order[end]] - d[order[end - 1]] <= cluster_tol) ++end;
        const int m = end - start;
        if (m == 1) {
            const int c = order[start];
            for (int i = 0; i < n; ++i) out.vectors(i, start) = qs(i, c);
        } else {
            // i*K restricted to the cluster is Hermitian; its eigenvectors split the
            // cluster into the complex eigenpairs of A.
            CMat kc(m, m);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) {
                    double v = 0.0;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) v += qs(i, order[start + r]) * k(i, j) * qs(j, order[start + c]);
                    kc(r, c) = std::complex<double>(0.0, v);
                }
            CMat w = CMat::identity(m);
            hermitian_jacobi(kc, w);
            for (int c = 0; c < m; ++c)
                for (int i = 0; i < n; ++i) {
                    std::complex<double> acc = 0.0;
                    for (int r = 0; r < m; ++r) acc += qs(i, order[start + r]) * w(r, c);
                    out.vectors(i, start + c) = acc;
                }
        }
        start = end;
    }

    // Rayleigh quotients give the eigenvalues directly from the assembled basis.
    for (int c = 0; c < n; ++c) {
        std::complex<double> lam = 0.0;
        for (int i = 0; i < n; ++i) {
            std::complex<double> av = 0.0;
            for (int j = 0; j < n; ++j) av += a(i, j) * out.vectors(j, c);
            lam += std::conj(out.vectors(i, c)) * av;
        }
        out.values[c] = lam;
    }
    return out;
}

Mat random_orthogonal(int n, SeededRng& rng) {
    Mat g = rng.normal_mat(n, n);
    // Modified Gram-Schmidt on columns, deterministic given the rng stream.
    for (int j = 0; j < n; ++j) {
        for (int p = 0; p < j; ++p) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += g(i, p) * g(i, j);
            for (int i = 0; i < n; ++i) g(i, j) -= dot * g(i, p);
        }
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += g(i, j) * g(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw: replace with a basis vector and restart the column.
            for (int i = 0; i < n; ++i) g(i, j) = (i == j) ? 1.0 : 0.0;
            --j;
            continue;
        }
        for (int i = 0; i < n; ++i) g(i, j) /= norm;
    }
    return g;
}

Mat random_normal_convergent(int n, double radius_max, SeededRng& rng) {
    if (n < 1 || radius_max <= 0.0 || radius_max >= 1.0)
        throw_error(ErrorCode::ConfigError, "random_normal_convergent: need n >= 1 and radius_max in (0,1)");
    Mat q = random_orthogonal(n, rng);
    Mat d(n, n);
    int i = 0;
    while (i < n) {
        double r = rng.uniform_open(0.0, radius_max);
        bool pair = (n - i >= 2) && (rng.uniform() < 0.75);
        if (pair) {
            double theta = rng.uniform_open(0.0, 3.14159265358979323846);
            double c = r * std::cos(theta), s = r * std::sin(theta);
            d(i, i) = c;
            d(i, i + 1) = -s;
            d(i + 1, i) = s;
            d(i + 1, i + 1) = c;
            i += 2;
        } else {
            d(i, i) = (rng.uniform() < 0.5) ? r : -r;
            i += 1;
        }
    }
    return matmul(matmul(q, d), q.transpose());
}

Mat random_general_convergent(int n, double radius_max, SeededRng& rng) {
    if (n < 1 || radius_max <= 0.0 || radius_max >= 1.0)
        throw_error(ErrorCode::ConfigError, "random_general_convergent: need n >= 1 and radius_max in (0,1)");
    Mat g = rng.normal_mat(n, n);
    double target = rng.uniform_open(0.1 * radius_max, radius_max);
    double rho = spectral_radius_estimate(g);
    if (rho < 1e-12) return g;  // numerically nilpotent, already convergent
    return g * (target / rho);
}

Mat cholesky(const Mat& spd) {
    require_square(spd, "cholesky");
    const int n = spd.rows();
    Mat l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = spd(i, j);
            for (int p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw_error(ErrorCode::SingularCovariance, "cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

Mat cholesky_solve(const Mat& chol_l, const Mat& b) {
    const int n = chol_l.rows();
    if (b.rows() != n) throw_error(ErrorCode::ShapeMismatch, "cholesky_solve: rhs rows mismatch");
    Mat x = b;
    // forward substitution L y = b
    for (int c = 0; c < x.cols(); ++c) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, c);
            for (int p = 0; p < i; ++p) s -= chol_l(i, p) * x(p, c);
            x(i, c) = s / chol_l(i, i);
        }
        // back substitution L^T x = y
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, c);
            for (int p = i + 1; p < n; ++p) s -= chol_l(p, i) * x(p, c);
            x(i, c) = s / chol_l(i, i);
        }
    }
    return x;
}

Mat inverse_spd(const Mat& spd) { return cholesky_solve(cholesky(spd), Mat::identity(spd.rows())); }

double log_det_spd(const Mat& spd) {
    Mat l = cholesky(spd);
    double s = 0.0;
    for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

}  // namespace matcap
