#pragma once

// Dense matrices over the Gaussian rationals with exact linear algebra.
//
// All rank decisions use literal zero tests, and the pivoting rule is
// "first nonzero entry", so kernels, images, and solves are deterministic
// functions of the input matrix.  No normalization is ever performed
// (square roots do not exist in the field); orthogonality is with respect
// to the sesquilinear form  <x, y> = sum tau(x_i) y_i  or a supplied Gram.

#include <cstddef>
#include <string>
#include <vector>

#include "torsionlab/errors.hpp"
#include "torsionlab/scalar.hpp"

namespace torsionlab {

class QMat {
public:
    QMat() : rows_(0), cols_(0) {}
    QMat(std::size_t r, std::size_t c) : rows_(r), cols_(c), data_(r * c) {}

    static QMat identity(std::size_t n) {
        QMat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = GQ(1);
        return m;
    }
    static QMat zero(std::size_t r, std::size_t c) { return QMat(r, c); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    GQ& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const GQ& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    QMat col(std::size_t j) const {
        QMat v(rows_, 1);
        for (std::size_t i = 0; i < rows_; ++i) v(i, 0) = (*this)(i, j);
        return v;
    }

    QMat block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const {
        QMat b(r, c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
        return b;
    }

    friend QMat operator+(const QMat& a, const QMat& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ConfigError("QMat +: shape mismatch");
        QMat c(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) c.data_[i] = a.data_[i] + b.data_[i];
        return c;
    }
    friend QMat operator-(const QMat& a, const QMat& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ConfigError("QMat -: shape mismatch");
        QMat c(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) c.data_[i] = a.data_[i] - b.data_[i];
        return c;
    }
    friend QMat operator*(const QMat& a, const QMat& b) {
        if (a.cols_ != b.rows_) throw ConfigError("QMat *: shape mismatch");
        QMat c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                if (a(i, k).is_zero()) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += a(i, k) * b(k, j);
            }
        return c;
    }
    friend QMat operator*(const GQ& s, const QMat& a) {
        QMat c(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) c.data_[i] = s * a.data_[i];
        return c;
    }
    friend QMat operator-(const QMat& a) { return GQ(-1) * a; }

    friend bool operator==(const QMat& a, const QMat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    bool is_zero() const {
        for (const auto& z : data_)
            if (!z.is_zero()) return false;
        return true;
    }

private:
    std::size_t rows_, cols_;
    std::vector<GQ> data_;
};

inline QMat adjoint(const QMat& a) {
    QMat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = tau(a(i, j));
    return t;
}

inline QMat transpose(const QMat& a) {
    QMat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline QMat tau(const QMat& a) {
    QMat t(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(i, j) = tau(a(i, j));
    return t;
}

inline QMat hcat(const QMat& a, const QMat& b) {
    if (a.cols() == 0 && a.rows() == 0) return b;
    if (b.cols() == 0 && b.rows() == 0) return a;
    if (a.rows() != b.rows()) throw ConfigError("hcat: row mismatch");
    QMat c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
    }
    return c;
}

inline GQ trace(const QMat& a) {
    GQ t;
    for (std::size_t i = 0; i < a.rows() && i < a.cols(); ++i) t += a(i, i);
    return t;
}

struct Rref {
    QMat r;                        // reduced row echelon form
    std::vector<std::size_t> pivots; // pivot column indices, increasing
};

// Gauss-Jordan with "first nonzero" pivoting: deterministic.
inline Rref rref(QMat a) {
    Rref out;
    std::size_t r = 0;
    for (std::size_t c = 0; c < a.cols() && r < a.rows(); ++c) {
        std::size_t p = r;
        while (p < a.rows() && a(p, c).is_zero()) ++p;
        if (p == a.rows()) continue;
        if (p != r)
            for (std::size_t j = 0; j < a.cols(); ++j) std::swap(a(r, j), a(p, j));
        GQ inv = GQ(1) / a(r, c);
        for (std::size_t j = 0; j < a.cols(); ++j) a(r, j) = inv * a(r, j);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            if (i == r || a(i, c).is_zero()) continue;
            GQ f = a(i, c);
            for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) -= f * a(r, j);
        }
        out.pivots.push_back(c);
        ++r;
    }
    out.r = std::move(a);
    return out;
}

inline std::size_t rank(const QMat& a) { return rref(a).pivots.size(); }

// Columns span ker(a).  Free-variable basis from the RREF; deterministic.
inline QMat kernel(const QMat& a) {
    Rref rr = rref(a);
    std::vector<bool> is_pivot(a.cols(), false);
    for (auto c : rr.pivots) is_pivot[c] = true;
    std::vector<std::size_t> free_cols;
    for (std::size_t c = 0; c < a.cols(); ++c)
        if (!is_pivot[c]) free_cols.push_back(c);
    QMat k(a.cols(), free_cols.size());
    for (std::size_t j = 0; j < free_cols.size(); ++j) {
        k(free_cols[j], j) = GQ(1);
        for (std::size_t i = 0; i < rr.pivots.size(); ++i)
            k(rr.pivots[i], j) = -rr.r(i, free_cols[j]);
    }
    return k;
}

// Columns span im(a): the pivot columns of a itself; deterministic.
inline QMat image(const QMat& a) {
    Rref rr = rref(a);
    QMat m(a.rows(), rr.pivots.size());
    for (std::size_t j = 0; j < rr.pivots.size(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i) m(i, j) = a(i, rr.pivots[j]);
    return m;
}

inline GQ det(QMat a) {
    if (a.rows() != a.cols()) throw ConfigError("det: not square");
    GQ d(1);
    for (std::size_t c = 0; c < a.cols(); ++c) {
        std::size_t p = c;
        while (p < a.rows() && a(p, c).is_zero()) ++p;
        if (p == a.rows()) return GQ(0);
        if (p != c) {
            for (std::size_t j = 0; j < a.cols(); ++j) std::swap(a(c, j), a(p, j));
            d = -d;
        }
        d *= a(c, c);
        for (std::size_t i = c + 1; i < a.rows(); ++i) {
            if (a(i, c).is_zero()) continue;
            GQ f = a(i, c) / a(c, c);
            for (std::size_t j = c; j < a.cols(); ++j) a(i, j) -= f * a(c, j);
        }
    }
    return d;
}

// Solve a x = b (b may have several columns).  Inconsistent systems throw;
// underdetermined systems get the free variables set to zero.
inline QMat solve(const QMat& a, const QMat& b) {
    if (a.rows() != b.rows()) throw ConfigError("solve: shape mismatch");
    Rref rr = rref(hcat(a, b));
    for (auto c : rr.pivots)
        if (c >= a.cols()) throw ConfigError("solve: inconsistent system");
    QMat x(a.cols(), b.cols());
    for (std::size_t i = 0; i < rr.pivots.size(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) x(rr.pivots[i], j) = rr.r(i, a.cols() + j);
    return x;
}

inline QMat inverse(const QMat& a) {
    if (a.rows() != a.cols()) throw ConfigError("inverse: not square");
    if (rank(a) != a.rows()) throw ConfigError("inverse: singular matrix");
    return solve(a, QMat::identity(a.rows()));
}

} // namespace torsionlab
