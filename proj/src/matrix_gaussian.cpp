#include "matcap/matrix_gaussian.hpp"

#include <cmath>

namespace matcap {

namespace {

void require_symmetric(const Mat& m, const char* who) {
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12)
                throw_error(ErrorCode::ShapeMismatch, std::string(who) + ": covariance not symmetric");
}

}  // namespace

MatrixGaussian::MatrixGaussian(Mat mean, Mat row_cov, Mat col_cov)
    : mean_(std::move(mean)), row_cov_(std::move(row_cov)), col_cov_(std::move(col_cov)) {
    if (row_cov_.rows() != mean_.rows() || col_cov_.rows() != mean_.cols())
        throw_error(ErrorCode::ShapeMismatch, "MatrixGaussian: covariance shapes not conformable with mean");
    require_symmetric(row_cov_, "MatrixGaussian");
    require_symmetric(col_cov_, "MatrixGaussian");
    row_chol_ = cholesky(row_cov_);
    col_chol_ = cholesky(col_cov_);
}

double kl_divergence(const MatrixGaussian& p1, const MatrixGaussian& p2) {
    if (p1.rows() != p2.rows() || p1.cols() != p2.cols())
        throw_error(ErrorCode::ShapeMismatch, "kl_divergence: distributions differ in shape");
    const int n = p1.rows();
    const int p = p1.cols();

    // Determinant exponents follow the density (2pi)^{-np/2} |Psi|^{-p/2} |Sigma|^{-n/2}:
    // the row factor enters once per column and vice versa.
    double log_det = n * (log_det_spd(p2.col_cov()) - log_det_spd(p1.col_cov())) +
                     p * (log_det_spd(p2.row_cov()) - log_det_spd(p1.row_cov()));
    double tr_psi = trace(cholesky_solve(p2.row_chol(), p1.row_cov()));
    double tr_sigma = trace(cholesky_solve(p2.col_chol(), p1.col_cov()));
    Mat dm = p2.mean() - p1.mean();
    Mat t = matmul_tn(dm, cholesky_solve(p2.row_chol(), dm));  // dM^T Psi2^-1 dM
    double mean_term = trace(cholesky_solve(p2.col_chol(), t));

    return 0.5 * (log_det - n * p + tr_psi * tr_sigma + mean_term);
}

Mat sample(const MatrixGaussian& d, SeededRng& rng) {
    Mat g = rng.normal_mat(d.rows(), d.cols());
    return d.mean() + matmul_nt(matmul(d.row_chol(), g), d.col_chol());
}

double log_density(const MatrixGaussian& d, const Mat& x) {
    if (x.rows() != d.rows() || x.cols() != d.cols())
        throw_error(ErrorCode::ShapeMismatch, "log_density: sample shape mismatch");
    const int n = d.rows();
    const int p = d.cols();
    Mat dm = x - d.mean();
    Mat t = matmul_tn(dm, cholesky_solve(d.row_chol(), dm));
    double quad = trace(cholesky_solve(d.col_chol(), t));
    constexpr double ln_2pi = 1.8378770664093454836;
    return -0.5 * (n * p * ln_2pi + p * log_det_spd(d.row_cov()) + n * log_det_spd(d.col_cov()) + quad);
}

double input_fisher_information(const Mat& w, double eps1, double eps2) {
    if (eps1 <= 0.0 || eps2 <= 0.0)
        throw_error(ErrorCode::ConfigError, "input_fisher_information: noise scales must be positive");
    return frobenius_inner(w, w) / (eps1 * eps2);
}

}  // namespace matcap
