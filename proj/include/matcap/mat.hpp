#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "matcap/errors.hpp"

namespace matcap {

/// Dense real matrix, row-major, double precision.
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}
    Mat(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), a_(std::move(data)) {
        if (a_.size() != static_cast<size_t>(rows_) * cols_)
            throw_error(ErrorCode::ShapeMismatch, "Mat: data length does not match rows*cols");
    }

    static Mat zeros(int rows, int cols) { return Mat(rows, cols); }
    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat constant(int rows, int cols, double v) {
        Mat m(rows, cols);
        for (auto& x : m.a_) x = v;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return a_.size(); }
    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }
    std::vector<double>& raw() { return a_; }
    const std::vector<double>& raw() const { return a_; }

    /// Reshape in place without reallocating when the element count already matches.
    void resize(int rows, int cols) {
        rows_ = rows;
        cols_ = cols;
        a_.assign(static_cast<size_t>(rows) * cols, 0.0);
    }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Mat transpose() const {
        Mat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat& operator+=(const Mat& o) {
        check_same(o);
        for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        check_same(o);
        for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Mat& operator*=(double c) {
        for (auto& x : a_) x *= c;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double c) { return a *= c; }
    friend Mat operator*(double c, Mat a) { return a *= c; }

    void check_same(const Mat& o) const {
        if (!same_shape(o)) throw_error(ErrorCode::ShapeMismatch, "Mat: shape mismatch");
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C = A^T * B
Mat matmul_tn(const Mat& a, const Mat& b);
/// C = A * B^T
Mat matmul_nt(const Mat& a, const Mat& b);
/// U^T X V
Mat bilinear_form(const Mat& u, const Mat& x, const Mat& v);

Mat hadamard(const Mat& a, const Mat& b);

/// Tr(A^T B) = sum_ij a_ij b_ij
double frobenius_inner(const Mat& a, const Mat& b);
double frobenius_norm(const Mat& a);
double max_abs(const Mat& a);
double trace(const Mat& a);

using ComplexVec = std::vector<std::complex<double>>;

/// Dense complex matrix, row-major; used only for eigendecompositions of normal matrices.
class CMat {
  public:
    CMat() = default;
    CMat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

    static CMat identity(int n) {
        CMat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static CMat from_real(const Mat& r) {
        CMat m(r.rows(), r.cols());
        for (int i = 0; i < r.rows(); ++i)
            for (int j = 0; j < r.cols(); ++j) m(i, j) = r(i, j);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::complex<double>& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    const std::complex<double>& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    CMat adjoint() const {
        CMat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = std::conj((*this)(i, j));
        return t;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::complex<double>> a_;
};

CMat matmul(const CMat& a, const CMat& b);
double max_abs(const CMat& a);

}  // namespace matcap
