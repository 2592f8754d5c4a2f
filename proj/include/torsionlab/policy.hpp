#pragma once

// Backend policies.
//
// Modules that make sense over both backends (graded complexes,
// determinant lines, torsion representatives) are templated on a policy:
//
//   ExactPolicy - Gaussian-rational matrices, literal zero tests,
//                 deterministic RREF pivoting.  No spectra, no norms.
//   NumPolicy   - complex doubles via Eigen, SVD/QR rank decisions with
//                 refusal bands.
//
// Both expose the same static vocabulary (kernel, image, complement,
// solve, det, ...) so the graded-complex code reads identically over
// either field model.  Spectral, signature, and metric modules are
// floating-point only and use NumPolicy types directly.

#include <cstddef>

#include "torsionlab/exact.hpp"
#include "torsionlab/numeric.hpp"
#include "torsionlab/scalar.hpp"

namespace torsionlab {

struct ExactPolicy {
    using Scalar = GQ;
    using Matrix = QMat;
    static constexpr bool exact = true;

    static Matrix identity(std::size_t n) { return QMat::identity(n); }
    static Matrix zero(std::size_t r, std::size_t c) { return QMat::zero(r, c); }
    static std::size_t rows(const Matrix& m) { return m.rows(); }
    static std::size_t cols(const Matrix& m) { return m.cols(); }

    static Matrix kernel(const Matrix& m) { return torsionlab::kernel(m); }
    static Matrix image(const Matrix& m) { return torsionlab::image(m); }
    static std::size_t rank(const Matrix& m) { return torsionlab::rank(m); }
    static Matrix complement(const Matrix& u, const Matrix& w, const Matrix& g) {
        if (cols(w) == 0) return zero(rows(w), 0);
        if (cols(u) == 0) return w;
        return w * torsionlab::kernel(torsionlab::adjoint(u) * g * w);
    }
    static Matrix solve(const Matrix& a, const Matrix& b) { return torsionlab::solve(a, b); }
    static Matrix inverse(const Matrix& a) { return torsionlab::inverse(a); }
    static Matrix adjoint(const Matrix& a) { return torsionlab::adjoint(a); }
    static Matrix tau(const Matrix& a) { return torsionlab::tau(a); }
    static Matrix hcat(const Matrix& a, const Matrix& b) { return torsionlab::hcat(a, b); }
    static Scalar det(const Matrix& a) { return torsionlab::det(a); }
    static Scalar det_ratio(const Matrix& a, const Matrix& b) {
        return torsionlab::det(a) / torsionlab::det(b);
    }
    static Scalar trace(const Matrix& a) { return torsionlab::trace(a); }
    static bool is_zero(const Matrix& a, double /*atol*/ = 0.0) { return a.is_zero(); }
    static bool scalar_close(const Scalar& a, const Scalar& b, double /*tol*/ = 0.0) {
        return a == b;
    }
};

struct NumPolicy {
    using Scalar = Cx;
    using Matrix = CMat;
    static constexpr bool exact = false;

    static Matrix identity(std::size_t n) {
        return CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    }
    static Matrix zero(std::size_t r, std::size_t c) {
        return CMat::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    static std::size_t rows(const Matrix& m) { return static_cast<std::size_t>(m.rows()); }
    static std::size_t cols(const Matrix& m) { return static_cast<std::size_t>(m.cols()); }

    static Matrix kernel(const Matrix& m) { return kernel_image(m).kernel; }
    static Matrix image(const Matrix& m) { return kernel_image(m).image; }
    static std::size_t rank(const Matrix& m) { return kernel_image(m).rank; }
    static Matrix complement(const Matrix& u, const Matrix& w, const Matrix& g) {
        return complement_in(u, w, g);
    }
    static Matrix solve(const Matrix& a, const Matrix& b) { return solve_in_span(a, b); }
    static Matrix inverse(const Matrix& a) {
        if (a.rows() != a.cols()) throw ConfigError("inverse: not square");
        return a.inverse();
    }
    static Matrix adjoint(const Matrix& a) { return a.adjoint(); }
    static Matrix tau(const Matrix& a) { return a.conjugate(); }
    static Matrix hcat(const Matrix& a, const Matrix& b) { return torsionlab::hcat(a, b); }
    static Scalar det(const Matrix& a) { return a.determinant(); }
    static Scalar det_ratio(const Matrix& a, const Matrix& b) {
        return (logdet_lu(a) / logdet_lu(b)).to_complex();
    }
    static Scalar trace(const Matrix& a) { return a.trace(); }
    static bool is_zero(const Matrix& a, double atol = 1e-10) {
        return a.size() == 0 || a.norm() <= atol;
    }
    static bool scalar_close(const Scalar& a, const Scalar& b, double tol = 1e-10) {
        return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    }
};

} // namespace torsionlab
