#include "doctest.h"
#include "matcap/tape.hpp"

#include <cmath>

using namespace matcap;

namespace {

// Finite-difference probe of d(value(out))/d(param coordinate).
double fd_probe(const std::function<int(Tape&, const Mat&)>& build, Mat x, size_t coord, double eps) {
    Tape t;
    Mat up = x, down = x;
    up.raw()[coord] += eps;
    down.raw()[coord] -= eps;
    t.rewind();
    double fu = t.value(build(t, up))(0, 0);
    t.rewind();
    double fd = t.value(build(t, down))(0, 0);
    return (fu - fd) / (2.0 * eps);
}

}  // namespace

TEST_CASE("tanh gradient at zero is one per entry") {
    Tape t;
    int x = t.param(Mat::zeros(3, 3), 0);
    int y = t.tanh_elem(x);
    CHECK(max_abs(t.value(y)) == 0.0);
    int loss = t.sum_elements(y);
    t.backward(loss);
    CHECK(max_abs(t.grad(x) - Mat::constant(3, 3, 1.0)) < 1e-15);
}

TEST_CASE("sum and quadratic losses have closed form gradients") {
    SeededRng rng(1);
    Mat xv = rng.normal_mat(2, 4);
    Tape t;
    int x = t.param(xv, 0);
    t.backward(t.sum_elements(x));
    CHECK(max_abs(t.grad(x) - Mat::constant(2, 4, 1.0)) == 0.0);

    t.rewind();
    x = t.param(xv, 0);
    int sq = t.hadamard(x, x);
    t.backward(t.sum_elements(sq));
    CHECK(max_abs(t.grad(x) - xv * 2.0) < 1e-14);
}

TEST_CASE("bilinear backward matches finite differences") {
    SeededRng rng(2);
    Mat u = rng.normal_mat(3, 2), xm = rng.normal_mat(3, 4), v = rng.normal_mat(4, 2);
    Mat c = rng.normal_mat(2, 2);

    auto build_x = [&](Tape& t, const Mat& probe) {
        int un = t.constant(u);
        int xn = t.param(probe, 0);
        int vn = t.constant(v);
        int y = t.bilinear(un, xn, vn);
        return t.sum_elements(t.hadamard(y, t.constant(c)));
    };
    Tape t;
    int un = t.constant(u);
    int xn = t.param(xm, 0);
    int vn = t.constant(v);
    int y = t.bilinear(un, xn, vn);
    t.backward(t.sum_elements(t.hadamard(y, t.constant(c))));
    // dX = U G V^T with upstream G = c
    Mat expect = matmul_nt(matmul(u, c), v);
    CHECK(max_abs(t.grad(xn) - expect) < 1e-12);
    for (size_t i = 0; i < xm.size(); ++i) {
        double fd = fd_probe(build_x, xm, i, 1e-6);
        CHECK(std::abs(fd - t.grad(xn).raw()[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("softmax of a uniform vector is uniform with zero-sum gradients") {
    Tape t;
    int x = t.param(Mat::constant(5, 1, 0.3), 0);
    int y = t.softmax_vec(x);
    CHECK(max_abs(t.value(y) - Mat::constant(5, 1, 0.2)) < 1e-15);
    SeededRng rng(3);
    int loss = t.sum_elements(t.hadamard(y, t.constant(rng.normal_mat(5, 1))));
    t.backward(loss);
    double colsum = 0.0;
    for (double g : t.grad(x).raw()) colsum += g;
    CHECK(std::abs(colsum) < 1e-14);
}

TEST_CASE("bce gradient vanishes at probs equal to targets") {
    Mat p(2, 2, {0.3, 0.6, 0.5, 0.9});
    Tape t;
    int probs = t.param(p, 0);
    int targets = t.constant(p);
    t.backward(t.bce_loss(probs, targets));
    CHECK(max_abs(t.grad(probs)) <= 1e-12);
    CHECK(t.value(t.bce_loss(t.constant(Mat::constant(1, 1, 0.5)), t.constant(Mat::constant(1, 1, 1.0))))(0, 0) ==
          doctest::Approx(-std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("circular convolution is linear in w with exact transpose gradient") {
    SeededRng rng(4);
    Mat w = rng.normal_mat(8, 1);
    Mat s(3, 1, {0.2, 0.5, 0.3});
    Mat c = rng.normal_mat(8, 1);
    auto build = [&](Tape& t, const Mat& probe) {
        int wn = t.param(probe, 0);
        int sn = t.constant(s);
        return t.sum_elements(t.hadamard(t.circular_convolve(wn, sn), t.constant(c)));
    };
    Tape t;
    int wn = t.param(w, 0);
    int out = t.circular_convolve(wn, t.constant(s));
    t.backward(t.sum_elements(t.hadamard(out, t.constant(c))));
    for (size_t i = 0; i < w.size(); ++i)
        CHECK(std::abs(fd_probe(build, w, i, 1e-6) - t.grad(wn).raw()[i]) <= 1e-8);

    // one-hot right kernel rotates by one slot
    Tape t2;
    Mat onehot(3, 1, {0.0, 0.0, 1.0});
    int rot = t2.circular_convolve(t2.constant(w), t2.constant(onehot));
    for (int i = 0; i < 8; ++i) CHECK(t2.value(rot)(i, 0) == doctest::Approx(w((i + 7) % 8, 0)));
}

TEST_CASE("cosine similarity, sharpen, softplus and scalar ops pass finite differences") {
    SeededRng rng(5);
    Mat a = rng.normal_mat(3, 3), b = rng.normal_mat(3, 3);

    auto cos_build = [&](Tape& t, const Mat& probe) {
        return t.cosine_sim(t.param(probe, 0), t.constant(b));
    };
    Tape t;
    int an = t.param(a, 0);
    t.backward(t.cosine_sim(an, t.constant(b)));
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(fd_probe(cos_build, a, i, 1e-6) - t.grad(an).raw()[i]) <= 1e-7);

    Mat w(6, 1, {0.3, 0.05, 0.2, 0.15, 0.1, 0.2});
    Mat gam(1, 1, {2.3});
    Mat c = rng.normal_mat(6, 1);
    auto sharp_w = [&](Tape& tt, const Mat& probe) {
        return tt.sum_elements(
            tt.hadamard(tt.elem_pow_normalize(tt.param(probe, 0), tt.constant(gam)), tt.constant(c)));
    };
    auto sharp_g = [&](Tape& tt, const Mat& probe) {
        return tt.sum_elements(
            tt.hadamard(tt.elem_pow_normalize(tt.constant(w), tt.param(probe, 0)), tt.constant(c)));
    };
    Tape t2;
    int wn = t2.param(w, 0);
    int gn = t2.param(gam, 1);
    t2.backward(t2.sum_elements(t2.hadamard(t2.elem_pow_normalize(wn, gn), t2.constant(c))));
    for (size_t i = 0; i < w.size(); ++i)
        CHECK(std::abs(fd_probe(sharp_w, w, i, 1e-7) - t2.grad(wn).raw()[i]) <= 1e-6);
    CHECK(std::abs(fd_probe(sharp_g, gam, 0, 1e-6) - t2.grad(gn)(0, 0)) <= 1e-7);

    auto soft_build = [&](Tape& tt, const Mat& probe) {
        return tt.sum_elements(tt.softplus_elem(tt.param(probe, 0)));
    };
    Tape t3;
    int xn = t3.param(a, 0);
    t3.backward(t3.sum_elements(t3.softplus_elem(xn)));
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(fd_probe(soft_build, a, i, 1e-6) - t3.grad(xn).raw()[i]) <= 1e-8);
}

TEST_CASE("memory bank primitives pass finite differences") {
    const int slots = 4, nm = 2;
    SeededRng rng(6);
    Mat mem = rng.normal_mat(slots * nm, nm);
    Mat key = rng.normal_mat(nm, nm);
    Mat w(slots, 1, {0.4, 0.3, 0.2, 0.1});
    Mat er(nm, nm, {0.2, 0.8, 0.5, 0.6});
    Mat add = rng.normal_mat(nm, nm);
    Mat csim = rng.normal_mat(slots, 1);
    Mat cread = rng.normal_mat(nm, nm);
    Mat cwrite = rng.normal_mat(slots * nm, nm);

    auto loss_all = [&](Tape& t, const Mat& m_probe, const Mat& k_probe, const Mat& w_probe,
                        const Mat& er_probe, const Mat& add_probe) {
        int mn = t.param(m_probe, 0);
        int kn = t.param(k_probe, 1);
        int wn = t.param(w_probe, 2);
        int en = t.param(er_probe, 3);
        int an = t.param(add_probe, 4);
        int sim = t.bank_similarities(mn, kn, slots);
        int wrote = t.bank_write(mn, wn, en, an, slots);
        int read = t.bank_read(wrote, wn, slots);
        int l1 = t.sum_elements(t.hadamard(sim, t.constant(csim)));
        int l2 = t.sum_elements(t.hadamard(read, t.constant(cread)));
        int l3 = t.sum_elements(t.hadamard(wrote, t.constant(cwrite)));
        return t.add(t.add(l1, l2), l3);
    };

    Tape t;
    int loss = loss_all(t, mem, key, w, er, add);
    t.backward(loss);
    Mat grads[5];
    for (size_t node = 0; node < t.size(); ++node) {
        int pid = t.param_id_of(static_cast<int>(node));
        if (pid >= 0) grads[pid] = t.grad(static_cast<int>(node));
    }

    Mat* probes[5] = {&mem, &key, &w, &er, &add};
    for (int pid = 0; pid < 5; ++pid) {
        for (size_t i = 0; i < probes[pid]->size(); ++i) {
            Mat up[5] = {mem, key, w, er, add};
            Mat down[5] = {mem, key, w, er, add};
            const double eps = 1e-6;
            up[pid].raw()[i] += eps;
            down[pid].raw()[i] -= eps;
            Tape tt;
            double fu = tt.value(loss_all(tt, up[0], up[1], up[2], up[3], up[4]))(0, 0);
            tt.rewind();
            double fdn = tt.value(loss_all(tt, down[0], down[1], down[2], down[3], down[4]))(0, 0);
            double fd = (fu - fdn) / (2.0 * eps);
            CHECK(std::abs(fd - grads[pid].raw()[i]) <= 2e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("forward and backward passes are bit-deterministic") {
    SeededRng rng(7);
    Mat xv = rng.normal_mat(4, 4);
    auto run = [&](Mat& grad_out) {
        Tape t;
        int x = t.param(xv, 0);
        int y = t.tanh_elem(t.bilinear(t.constant(xv), x, t.constant(xv)));
        int loss = t.sum_elements(t.hadamard(y, y));
        t.backward(loss);
        grad_out = t.grad(x);
        return t.value(loss)(0, 0);
    };
    Mat g1, g2;
    double l1 = run(g1);
    double l2 = run(g2);
    CHECK(l1 == l2);
    CHECK(max_abs(g1 - g2) == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
    Tape t;
    int x = t.param(Mat::zeros(2, 2), 0);
    CHECK_THROWS_AS(t.backward(t.tanh_elem(x)), MatcapError);
}

TEST_CASE("grad_check on a quadratic is exact to roundoff") {
    SeededRng rng(8);
    Mat x0 = rng.normal_mat(3, 3);
    Mat c = rng.normal_mat(3, 3);
    auto build = [&](Tape& t, const std::vector<Mat>& params) {
        int x = t.param(params[0], 0);
        int q = t.hadamard(x, x);
        return t.sum_elements(t.hadamard(q, t.constant(c)));
    };
    SeededRng coord_rng(9);
    CHECK(grad_check(build, {x0}, 1e-5, 200, coord_rng) <= 1e-9);
}

TEST_CASE("tape slots are reusable across passes with different shapes") {
    Tape t;
    SeededRng rng(10);
    Mat a3 = rng.normal_mat(3, 3);
    int x = t.param(a3, 0);
    t.backward(t.sum_elements(t.tanh_elem(x)));
    double first = t.value(2)(0, 0);

    t.rewind();
    Mat a52 = rng.normal_mat(5, 2);
    int y = t.param(a52, 0);
    int loss = t.sum_elements(t.hadamard(y, y));
    t.backward(loss);
    CHECK(t.value(loss)(0, 0) == doctest::Approx(frobenius_inner(a52, a52)).epsilon(1e-14));
    CHECK(t.grad(y).rows() == 5);
    CHECK(t.grad(y).cols() == 2);
    CHECK(max_abs(t.grad(y) - a52 * 2.0) < 1e-14);

    t.rewind();
    int x2 = t.param(a3, 0);
    t.backward(t.sum_elements(t.tanh_elem(x2)));
    CHECK(t.value(2)(0, 0) == first);
}
