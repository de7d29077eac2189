#include "doctest.h"
#include "matcap/linalg.hpp"

#include <cmath>

using namespace matcap;

namespace {

Mat scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

Mat diag2(double a, double b) {
    Mat m(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// Direct truncated series sum_{k<terms} A^kT Q A^k, the independent oracle for the solver.
Mat lyapunov_series(const Mat& a, const Mat& q, int terms) {
    Mat sum = q;
    Mat p = Mat::identity(a.rows());
    for (int k = 1; k < terms; ++k) {
        p = matmul(p, a);
        sum += matmul_tn(p, matmul(q, p));
    }
    return sum;
}

Mat sylvester_series(const Mat& u, const Mat& v, const Mat& a, int terms) {
    Mat sum = a;
    Mat pu = Mat::identity(u.rows());
    Mat pv = Mat::identity(v.rows());
    for (int k = 1; k < terms; ++k) {
        pu = matmul(pu, u);
        pv = matmul(pv, v);
        sum += matmul_tn(pu, matmul(a, pv));
    }
    return sum;
}

}  // namespace

TEST_CASE("discrete Lyapunov solver on anchor cases") {
    CHECK(solve_discrete_lyapunov(scalar(0.0), scalar(1.0))(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

    Mat x = solve_discrete_lyapunov(scalar(0.5), scalar(1.0));
    Mat oracle = lyapunov_series(scalar(0.5), scalar(1.0), 200);
    CHECK(x(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(std::abs(x(0, 0) - oracle(0, 0)) < 1e-12);

    Mat xd = solve_discrete_lyapunov(diag2(0.5, 0.3), Mat::identity(2));
    CHECK(xd(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(xd(1, 1) == doctest::Approx(100.0 / 91.0).epsilon(1e-13));
    CHECK(max_abs(xd - lyapunov_series(diag2(0.5, 0.3), Mat::identity(2), 200)) < 1e-12);
}

TEST_CASE("discrete Lyapunov solver matches 500-term series on random 5x5 systems") {
    for (uint64_t seed = 1; seed <= 8; ++seed) {
        SeededRng rng(seed);
        Mat a = random_normal_convergent(5, 0.9, rng);
        Mat g = rng.normal_mat(5, 5);
        Mat q = matmul_nt(g, g);  // symmetric PSD
        Mat x = solve_discrete_lyapunov(a, q, 1e-12, 300);
        CHECK(max_abs(x - lyapunov_series(a, q, 500)) < 1e-9);
        CHECK(max_abs(matmul_tn(a, matmul(x, a)) + q - x) < 1e-10);
    }
}

TEST_CASE("discrete Lyapunov solver rejects bad input") {
    CHECK_THROWS_AS(solve_discrete_lyapunov(scalar(1.0), scalar(1.0)), MatcapError);
    CHECK_THROWS_AS(solve_discrete_lyapunov(scalar(1.2), scalar(1.0)), MatcapError);
    CHECK_THROWS_AS(solve_discrete_lyapunov(Mat(2, 3), Mat(2, 3)), MatcapError);
}

TEST_CASE("Sylvester sum anchor cases") {
    CHECK(solve_discrete_sylvester_sum(scalar(0.0), scalar(0.7), scalar(3.0))(0, 0) ==
          doctest::Approx(3.0).epsilon(1e-14));
    CHECK(solve_discrete_sylvester_sum(scalar(0.5), scalar(0.5), scalar(1.0))(0, 0) ==
          doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    Mat xd = solve_discrete_sylvester_sum(diag2(0.5, 0.3), diag2(0.5, 0.3), Mat::identity(2));
    CHECK(xd(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(xd(1, 1) == doctest::Approx(100.0 / 91.0).epsilon(1e-13));
}

TEST_CASE("Sylvester sum is linear in A and matches the direct series") {
    SeededRng rng(42);
    Mat u = random_normal_convergent(4, 0.8, rng);
    Mat v = random_normal_convergent(4, 0.8, rng);
    Mat a = rng.normal_mat(4, 4);
    Mat b = rng.normal_mat(4, 4);
    Mat ga = solve_discrete_sylvester_sum(u, v, a);
    Mat gb = solve_discrete_sylvester_sum(u, v, b);
    Mat gab = solve_discrete_sylvester_sum(u, v, a * 2.5 + b * (-0.75));
    CHECK(max_abs(gab - (ga * 2.5 + gb * (-0.75))) < 1e-10);
    CHECK(max_abs(ga - sylvester_series(u, v, a, 500)) < 1e-9);
}

TEST_CASE("eig_normal anchor spectra") {
    EigNormal e = eig_normal(Mat::identity(2));
    CHECK(std::abs(e.values[0] - 1.0) < 1e-12);
    CHECK(std::abs(e.values[1] - 1.0) < 1e-12);

    EigNormal ed = eig_normal(diag2(0.4, 0.2));
    double lo = std::min(ed.values[0].real(), ed.values[1].real());
    double hi = std::max(ed.values[0].real(), ed.values[1].real());
    CHECK(lo == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(hi == doctest::Approx(0.4).epsilon(1e-12));

    // rotation by pi/4: eigenvalues exp(+-i pi/4)
    const double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
    Mat rot(2, 2);
    rot(0, 0) = c;
    rot(0, 1) = -s;
    rot(1, 0) = s;
    rot(1, 1) = c;
    EigNormal er = eig_normal(rot);
    for (const auto& lam : er.values) {
        CHECK(std::abs(std::abs(lam) - 1.0) < 1e-12);
        CHECK(std::abs(std::abs(lam.imag()) - s) < 1e-12);
        CHECK(lam.real() == doctest::Approx(c).epsilon(1e-12));
    }
    // trace and |det| agree with the rotation spectrum
    CHECK((er.values[0] + er.values[1]).real() == doctest::Approx(2.0 * c).epsilon(1e-12));
    CHECK(std::abs(er.values[0] * er.values[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eig_normal reconstructs 100 seeded random normal matrices") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng rng(seed * 13 + 7);
        int n = 2 + static_cast<int>(seed % 14);  // up to 15x15
        Mat a = random_normal_convergent(n, 0.95, rng);
        EigNormal e = eig_normal(a);

        CMat lam(n, n);
        for (int i = 0; i < n; ++i) lam(i, i) = e.values[i];
        CMat recon = matmul(matmul(e.vectors, lam), e.vectors.adjoint());
        CMat am = CMat::from_real(a);
        double err = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) err = std::max(err, std::abs(recon(i, j) - am(i, j)));
        CHECK(err <= 1e-8);

        CMat gram = matmul(e.vectors.adjoint(), e.vectors);
        for (int i = 0; i < n; ++i) gram(i, i) -= 1.0;
        CHECK(max_abs(gram) <= 1e-8);
    }
}

TEST_CASE("eig_normal rejects non-normal input") {
    Mat a(2, 2);
    a(0, 0) = 1.0;
    a(0, 1) = 1.0;
    a(1, 1) = 1.0;  // Jordan-ish block, not normal
    CHECK_THROWS_AS(eig_normal(a), MatcapError);
}

TEST_CASE("random_normal_convergent contract") {
    SeededRng rng(7);
    Mat one = random_normal_convergent(1, 0.9, rng);
    CHECK(std::abs(one(0, 0)) <= 0.9);

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        SeededRng r(seed);
        int n = 1 + static_cast<int>(seed % 12);
        Mat a = random_normal_convergent(n, 0.85, r);
        Mat comm = matmul_nt(a, a) - matmul_tn(a, a);
        CHECK(max_abs(comm) <= 1e-10);
        CHECK(spectral_radius_estimate(a) <= 0.85 + 1e-6);
    }

    SeededRng r1(123), r2(123);
    Mat a1 = random_normal_convergent(6, 0.9, r1);
    Mat a2 = random_normal_convergent(6, 0.9, r2);
    CHECK(max_abs(a1 - a2) == 0.0);
}

TEST_CASE("frobenius inner product anchors") {
    CHECK(frobenius_inner(Mat::identity(2), Mat::identity(2)) == 2.0);
    Mat a(2, 2, {1, 2, 3, 4});
    CHECK(frobenius_inner(a, Mat::zeros(2, 2)) == 0.0);
    CHECK(frobenius_inner(a, a) == 30.0);
    CHECK_THROWS_AS(frobenius_inner(a, Mat(2, 3)), MatcapError);
}

TEST_CASE("cholesky solve and inverse on a random SPD matrix") {
    SeededRng rng(5);
    Mat g = rng.normal_mat(6, 6);
    Mat spd = matmul_nt(g, g) + Mat::identity(6) * 0.5;
    Mat l = cholesky(spd);
    CHECK(max_abs(matmul_nt(l, l) - spd) < 1e-10);
    Mat inv = inverse_spd(spd);
    CHECK(max_abs(matmul(spd, inv) - Mat::identity(6)) < 1e-9);
    CHECK_THROWS_AS(cholesky(Mat::zeros(3, 3)), MatcapError);
}

TEST_CASE("spectral radius estimate brackets known spectra") {
    CHECK(spectral_radius_estimate(Mat::zeros(3, 3)) == 0.0);
    CHECK(spectral_radius_estimate(diag2(0.5, 0.3)) == doctest::Approx(0.5).epsilon(1e-6));
    Mat shear(2, 2);
    shear(0, 0) = 0.9;
    shear(0, 1) = 10.0;
    shear(1, 1) = 0.9;  // huge transient, radius 0.9
    CHECK(spectral_radius_estimate(shear) == doctest::Approx(0.9).epsilon(1e-4));
}
