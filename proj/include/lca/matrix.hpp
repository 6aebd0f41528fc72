#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "lca/error.hpp"

namespace lca {

// Dense row-major matrix of doubles. Every constructed matrix is finite:
// constructors reject NaN/Inf entries so downstream code never has to check.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeMismatch("matrix data size does not match dimensions");
        check_finite();
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows.size() ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw ShapeMismatch("ragged initializer for matrix");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        check_finite();
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { a += b; return a; }
    friend Matrix operator-(Matrix a, const Matrix& b) { a -= b; return a; }
    friend Matrix operator*(Matrix a, double s) { a *= s; return a; }
    friend Matrix operator*(double s, Matrix a) { a *= s; return a; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_)
            throw ShapeMismatch("matrix product inner dimensions disagree");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            double* ci = &c.data_[i * c.cols_];
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a.data_[i * a.cols_ + k];
                if (aik == 0.0) continue;
                const double* bk = &b.data_[k * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
            }
        }
        return c;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::fabs(v));
        return m;
    }

private:
    void require_same_shape(const Matrix& o) const {
        if (!same_shape(o)) throw ShapeMismatch("matrix shapes disagree");
    }

    void check_finite() const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw NumericFailure("matrix entry is not finite");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a * b^T without materializing the transpose; rows of both operands are
// contiguous, so this is also the cache-friendly order.
inline Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeMismatch("multiply_transposed inner dimensions disagree");
    Matrix c(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = &a.data()[i * inner];
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = &b.data()[j * inner];
            double s = 0.0;
            for (std::size_t t = 0; t < inner; ++t) s += ai[t] * bj[t];
            c(i, j) = s;
        }
    }
    return c;
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("inner product shapes disagree");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

// || m^T m - I ||_F, the usual orthonormality residual of a column frame.
inline double orthonormality_error(const Matrix& m) {
    const std::size_t k = m.cols();
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r) dot += m(r, i) * m(r, j);
            const double target = (i == j) ? 1.0 : 0.0;
            s += (dot - target) * (dot - target);
        }
    }
    return std::sqrt(s);
}

} // namespace lca
