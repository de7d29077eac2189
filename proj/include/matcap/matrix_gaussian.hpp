#pragma once

#include "matcap/linalg.hpp"
#include "matcap/mat.hpp"
#include "matcap/rng.hpp"

namespace matcap {

/// Matrix normal distribution MN(mean, row_cov, col_cov); row covariance n x n,
/// column covariance p x p, both symmetric positive definite.
class MatrixGaussian {
  public:
    MatrixGaussian(Mat mean, Mat row_cov, Mat col_cov);

    const Mat& mean() const { return mean_; }
    const Mat& row_cov() const { return row_cov_; }
    const Mat& col_cov() const { return col_cov_; }
    const Mat& row_chol() const { return row_chol_; }
    const Mat& col_chol() const { return col_chol_; }
    int rows() const { return mean_.rows(); }
    int cols() const { return mean_.cols(); }

  private:
    Mat mean_, row_cov_, col_cov_;
    Mat row_chol_, col_chol_;
};

/// KL(p1 || p2) between two matrix normals of identical shape.
double kl_divergence(const MatrixGaussian& p1, const MatrixGaussian& p2);

/// Draw M + L_r G L_c^T with G a matrix of unit normals.
Mat sample(const MatrixGaussian& d, SeededRng& rng);

double log_density(const MatrixGaussian& d, const Mat& x);

/// Fisher information the state receives from one scalar input pulse: Tr(W^T W) / (eps1 eps2).
double input_fisher_information(const Mat& w, double eps1, double eps2);

}  // namespace matcap
