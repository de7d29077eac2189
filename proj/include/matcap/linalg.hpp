#pragma once

#include "matcap/mat.hpp"
#include "matcap/rng.hpp"

namespace matcap {

/// Solves X = A^T X A + Q for convergent A (spectral radius < 1) by doubling-accelerated
/// fixed-point iteration; X equals the series sum_{k>=0} A^kT Q A^k.
Mat solve_discrete_lyapunov(const Mat& a, const Mat& q, double tol = 1e-12, int iter_max = 200);

/// Evaluates G(A) = sum_{k>=0} U^kT A V^k, the fixed point of X = U^T X V + A.
/// Requires spectral_radius(U) * spectral_radius(V) < 1.
Mat solve_discrete_sylvester_sum(const Mat& u, const Mat& v, const Mat& a, double tol = 1e-12,
                                 int iter_max = 200);

/// Upper estimate of the spectral radius via Gelfand iteration ||A^(2^m)||_F^(1/2^m).
double spectral_radius_estimate(const Mat& a, int squarings = 24);

struct EigNormal {
    ComplexVec values;
    CMat vectors;  // unitary, columns are eigenvectors
};

/// Eigendecomposition A = E Lambda E^H of a real normal matrix (A A^T = A^T A).
/// Throws NotNormal when ||A A^T - A^T A||_max > 1e-10 * ||A||_F^2.
EigNormal eig_normal(const Mat& a);

/// Symmetric eigendecomposition by cyclic Jacobi, A = Q diag(d) Q^T.
void eig_symmetric(const Mat& a, Mat& q, std::vector<double>& d);

/// Random normal matrix with spectral radius <= radius_max: a seeded random orthogonal
/// basis conjugating a block diagonal of 1x1 entries and 2x2 scaled rotations, radii
/// uniform in (0, radius_max).
Mat random_normal_convergent(int n, double radius_max, SeededRng& rng);

/// Random dense (generically non-normal) matrix rescaled to the requested spectral radius.
Mat random_general_convergent(int n, double radius_max, SeededRng& rng);

/// Random orthogonal matrix (Gram-Schmidt orthonormalization of a Gaussian draw).
Mat random_orthogonal(int n, SeededRng& rng);

/// Cholesky factor L (lower) of a symmetric positive definite matrix; Cholesky success
/// is the runtime definition of positive definite. Throws SingularCovariance.
Mat cholesky(const Mat& spd);

/// Solves A x = b for all columns of b given the Cholesky factor of A.
Mat cholesky_solve(const Mat& chol_l, const Mat& b);

/// Inverse of an SPD matrix via its Cholesky factorization.
Mat inverse_spd(const Mat& spd);

/// log det(A) for SPD A, from the Cholesky factor.
double log_det_spd(const Mat& spd);

bool is_normal(const Mat& a, double rel_tol = 1e-10);

}  // namespace matcap
