#include "matcap/mat.hpp"

#include <algorithm>

namespace matcap {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw_error(ErrorCode::ShapeMismatch, "matmul: inner dimensions differ");
    Mat c(a.rows(), b.cols());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    for (int i = 0; i < m; ++i) {
        double* ci = c.data() + static_cast<size_t>(i) * n;
        const double* ai = a.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows()) throw_error(ErrorCode::ShapeMismatch, "matmul_tn: inner dimensions differ");
    Mat c(a.cols(), b.cols());
    const int m = a.cols(), k = a.rows(), n = b.cols();
    for (int p = 0; p < k; ++p) {
        const double* ap = a.data() + static_cast<size_t>(p) * m;
        const double* bp = b.data() + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double api = ap[i];
            if (api == 0.0) continue;
            double* ci = c.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols()) throw_error(ErrorCode::ShapeMismatch, "matmul_nt: inner dimensions differ");
    Mat c(a.rows(), b.rows());
    const int m = a.rows(), k = a.cols(), n = b.rows();
    for (int i = 0; i < m; ++i) {
        const double* ai = a.data() + static_cast<size_t>(i) * k;
        double* ci = c.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b.data() + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
    return c;
}

Mat bilinear_form(const Mat& u, const Mat& x, const Mat& v) { return matmul(matmul_tn(u, x), v); }

Mat hadamard(const Mat& a, const Mat& b) {
    a.check_same(b);
    Mat c(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) c.raw()[i] = a.raw()[i] * b.raw()[i];
    return c;
}

double frobenius_inner(const Mat& a, const Mat& b) {
    a.check_same(b);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.raw()[i] * b.raw()[i];
    return s;
}

double frobenius_norm(const Mat& a) { return std::sqrt(frobenius_inner(a, a)); }

double max_abs(const Mat& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::abs(v));
    return m;
}

double trace(const Mat& a) {
    double s = 0.0;
    const int n = std::min(a.rows(), a.cols());
    for (int i = 0; i < n; ++i) s += a(i, i);
    return s;
}

CMat matmul(const CMat& a, const CMat& b) {
    if (a.cols() != b.rows()) throw_error(ErrorCode::ShapeMismatch, "cmatmul: inner dimensions differ");
    CMat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int p = 0; p < a.cols(); ++p) {
            const std::complex<double> aip = a(i, p);
            if (aip == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
        }
    return c;
}

double max_abs(const CMat& a) {
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
}

}  // namespace matcap
