#include "doctest.h"
#include "matcap/matrix_gaussian.hpp"

#include <cmath>

using namespace matcap;

namespace {

Mat scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

Mat random_spd(int n, SeededRng& rng) {
    Mat g = rng.normal_mat(n, n);
    return matmul_nt(g, g) * (1.0 / n) + Mat::identity(n) * 0.3;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            for (int p = 0; p < b.rows(); ++p)
                for (int q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
    return k;
}

Mat vec_columns(const Mat& m) {
    Mat v(m.rows() * m.cols(), 1);
    for (int j = 0; j < m.cols(); ++j)
        for (int i = 0; i < m.rows(); ++i) v(j * m.rows() + i, 0) = m(i, j);
    return v;
}

// Multivariate-normal KL on the column-stacked vectorization with cov = kron(col, row):
// the independent oracle for the matrix-normal closed form.
double mvn_kl_oracle(const MatrixGaussian& p1, const MatrixGaussian& p2) {
    Mat s1 = kron(p1.col_cov(), p1.row_cov());
    Mat s2 = kron(p2.col_cov(), p2.row_cov());
    const int d = s1.rows();
    Mat l2 = cholesky(s2);
    double tr = trace(cholesky_solve(l2, s1));
    Mat dm = vec_columns(p2.mean() - p1.mean());
    double quad = frobenius_inner(dm, cholesky_solve(l2, dm));
    return 0.5 * (log_det_spd(s2) - log_det_spd(s1) - d + tr + quad);
}

}  // namespace

TEST_CASE("matrix-normal KL anchors") {
    MatrixGaussian std1(scalar(0.0), scalar(1.0), scalar(1.0));
    MatrixGaussian shifted(scalar(1.0), scalar(1.0), scalar(1.0));
    CHECK(kl_divergence(std1, std1) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(kl_divergence(std1, shifted) == doctest::Approx(0.5).epsilon(1e-13));

    MatrixGaussian wide(scalar(0.0), scalar(2.0), scalar(1.0));
    CHECK(kl_divergence(std1, wide) == doctest::Approx(0.5 * (std::log(2.0) - 0.5)).epsilon(1e-12));
}

TEST_CASE("matrix-normal KL matches the Kronecker-vectorized oracle") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng rng(seed + 1000);
        int n = 1 + static_cast<int>(seed % 4);
        int p = 1 + static_cast<int>((seed / 4) % 5);
        MatrixGaussian p1(rng.normal_mat(n, p), random_spd(n, rng), random_spd(p, rng));
        MatrixGaussian p2(rng.normal_mat(n, p), random_spd(n, rng), random_spd(p, rng));
        double kl = kl_divergence(p1, p2);
        CHECK(std::abs(kl - mvn_kl_oracle(p1, p2)) < 1e-10);
        CHECK(kl >= -1e-10);
    }
}

TEST_CASE("KL(p||p) vanishes and KL is asymmetric") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        SeededRng rng(seed + 77);
        MatrixGaussian p(rng.normal_mat(2, 3), random_spd(2, rng), random_spd(3, rng));
        CHECK(std::abs(kl_divergence(p, p)) <= 1e-12);
    }
    MatrixGaussian a(scalar(0.0), scalar(1.0), scalar(1.0));
    MatrixGaussian b(scalar(0.5), scalar(3.0), scalar(1.0));
    CHECK(std::abs(kl_divergence(a, b) - kl_divergence(b, a)) > 1e-6);
}

TEST_CASE("sampling is deterministic and matches first and second moments") {
    MatrixGaussian d(Mat::zeros(2, 2), Mat::identity(2), Mat::identity(2));
    SeededRng r1(9), r2(9);
    CHECK(max_abs(sample(d, r1) - sample(d, r2)) == 0.0);

    SeededRng rng(123);
    Mat mean_acc(2, 2);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) mean_acc += sample(d, rng);
    mean_acc *= 1.0 / draws;
    CHECK(max_abs(mean_acc) < 0.02);

    MatrixGaussian d1(scalar(0.0), scalar(2.0), scalar(3.0));
    SeededRng rng2(5);
    double var_acc = 0.0;
    for (int i = 0; i < draws; ++i) {
        double x = sample(d1, rng2)(0, 0);
        var_acc += x * x;
    }
    var_acc /= draws;
    CHECK(var_acc == doctest::Approx(6.0).epsilon(0.05));
}

TEST_CASE("log density anchors and mode") {
    MatrixGaussian std1(scalar(0.0), scalar(1.0), scalar(1.0));
    const double half_ln_2pi = 0.9189385332046727;
    CHECK(log_density(std1, scalar(0.0)) == doctest::Approx(-half_ln_2pi).epsilon(1e-12));
    CHECK(log_density(std1, scalar(1.0)) == doctest::Approx(-half_ln_2pi - 0.5).epsilon(1e-12));

    SeededRng rng(3);
    MatrixGaussian d(rng.normal_mat(2, 3), Mat::identity(2), Mat::identity(3));
    double at_mean = log_density(d, d.mean());
    for (int i = 0; i < 20; ++i) CHECK(at_mean >= log_density(d, d.mean() + rng.normal_mat(2, 3)));
}

TEST_CASE("mean negative log density estimates differential entropy within 1%") {
    SeededRng rng(21);
    MatrixGaussian d(rng.normal_mat(2, 3), random_spd(2, rng), random_spd(3, rng));
    const int n = 2, p = 3;
    double entropy = 0.5 * (n * p * (1.0 + std::log(2.0 * M_PI)) + n * log_det_spd(d.col_cov()) +
                            p * log_det_spd(d.row_cov()));
    double acc = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) acc -= log_density(d, sample(d, rng));
    acc /= draws;
    CHECK(acc == doctest::Approx(entropy).epsilon(0.01));
}

TEST_CASE("input Fisher information anchors") {
    CHECK(input_fisher_information(Mat::identity(2), 1.0, 1.0) == 2.0);
    CHECK(input_fisher_information(Mat::zeros(3, 3), 0.5, 2.0) == 0.0);
    Mat w(2, 2, {1, 2, 3, 4});
    CHECK(input_fisher_information(w, 2.0, 0.5) == doctest::Approx(30.0).epsilon(1e-14));
    CHECK_THROWS_AS(input_fisher_information(w, 0.0, 1.0), MatcapError);
}

TEST_CASE("MatrixGaussian rejects invalid covariances") {
    CHECK_THROWS_AS(MatrixGaussian(Mat::zeros(2, 2), Mat::zeros(2, 2), Mat::identity(2)), MatcapError);
    Mat asym(2, 2, {1.0, 0.5, 0.1, 1.0});
    CHECK_THROWS_AS(MatrixGaussian(Mat::zeros(2, 2), asym, Mat::identity(2)), MatcapError);
    CHECK_THROWS_AS(MatrixGaussian(Mat::zeros(2, 2), Mat::identity(3), Mat::identity(2)), MatcapError);
}
