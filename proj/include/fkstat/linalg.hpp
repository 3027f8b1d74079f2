#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fkstat/errors.hpp"

namespace fkstat {

// Small dense row-major matrix. Everything in this library is tiny (state
// spaces, regression designs), so no attempt at blocking or views.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Matrix operator*(const Matrix& o) const {
        if (cols_ != o.rows_) throw DomainError("Matrix multiply: shape mismatch");
        Matrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
            }
        return r;
    }

    Matrix operator+(const Matrix& o) const {
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
        return r;
    }

    Matrix operator-(const Matrix& o) const {
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
        return r;
    }

    Matrix scaled(double c) const {
        Matrix r = *this;
        for (double& x : r.data_) x *= c;
        return r;
    }

    // max column sum of absolute values
    double norm1() const {
        double best = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows_; ++i) s += std::fabs((*this)(i, j));
            best = std::max(best, s);
        }
        return best;
    }

    std::vector<double> apply(const std::vector<double>& v) const {
        if (v.size() != cols_) throw DomainError("Matrix apply: size mismatch");
        std::vector<double> r(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }

    std::vector<double> apply_transposed(const std::vector<double>& v) const {
        if (v.size() != rows_) throw DomainError("Matrix apply_transposed: size mismatch");
        std::vector<double> r(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r[j] += (*this)(i, j) * v[i];
        return r;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// Solve A X = B by Gaussian elimination with partial pivoting.
inline Matrix solve(Matrix a, Matrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw DomainError("solve: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::fabs(a(i, col)) > std::fabs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) throw FitDegenerate("solve: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(piv, j));
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            const double factor = a(i, col) * inv;
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(i, j) -= factor * a(col, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= factor * b(col, j);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        const double inv = 1.0 / a(col, col);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = b(col, j);
            for (std::size_t k = col + 1; k < n; ++k) s -= a(col, k) * b(k, j);
            b(col, j) = s * inv;
        }
    }
    return b;
}

// Matrix exponential, scaling-and-squaring with the degree-13 Pade
// approximant (Higham's coefficients). Accurate to ~1e-14 relative for the
// small generator matrices used here.
inline Matrix expm(const Matrix& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DomainError("expm: matrix not square");
    static const double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    const double theta13 = 5.371920351148152;

    int squarings = 0;
    Matrix as = a;
    const double nrm = a.norm1();
    if (nrm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
        as = a.scaled(std::ldexp(1.0, -squarings));
    }

    const Matrix eye = Matrix::identity(n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a2 * a4;

    Matrix u = a6 * (a6.scaled(b[13]) + a4.scaled(b[11]) + a2.scaled(b[9]))
             + a6.scaled(b[7]) + a4.scaled(b[5]) + a2.scaled(b[3]) + eye.scaled(b[1]);
    u = as * u;
    Matrix v = a6 * (a6.scaled(b[12]) + a4.scaled(b[10]) + a2.scaled(b[8]))
             + a6.scaled(b[6]) + a4.scaled(b[4]) + a2.scaled(b[2]) + eye.scaled(b[0]);

    Matrix r = solve(v - u, v + u);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DomainError("symmetric_eigenvalues: not square");
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace fkstat
