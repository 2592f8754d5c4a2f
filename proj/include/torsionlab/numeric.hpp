#pragma once

// Floating-point linear algebra kernels.
//
// Rank decisions go through one SVD-based routine with an explicit
// threshold  eps * max(rows, cols) * sigma_max * factor  and a refusal
// band: a singular value within a factor 10 of the threshold means the
// rank of the input is numerically ambiguous, and the library refuses to
// guess (NumericalRefusal) instead of silently picking a side.
//
// TorsionScalar carries determinant-sized quantities in log form
// (log-modulus and phase) so products over hundreds of factors neither
// overflow nor lose the winding information needed for graded ratios.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "torsionlab/errors.hpp"
#include "torsionlab/scalar.hpp"

namespace torsionlab {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline CMat hcat(const CMat& a, const CMat& b) {
    if (a.size() == 0 && a.rows() == 0) return b;
    if (b.size() == 0 && b.rows() == 0) return a;
    if (a.rows() != b.rows()) throw ConfigError("hcat: row mismatch");
    CMat c(a.rows(), a.cols() + b.cols());
    if (a.cols() > 0) c.leftCols(a.cols()) = a;
    if (b.cols() > 0) c.rightCols(b.cols()) = b;
    return c;
}

inline CMat tau(const CMat& a) { return a.conjugate(); }

// ---------------------------------------------------------------------------
// Rank / kernel / image with refusal band.

struct KernelImage {
    CMat kernel;     // columns: orthonormal basis of ker
    CMat image;      // columns: orthonormal basis of im
    std::size_t rank = 0;
    double threshold = 0.0;
};

inline KernelImage kernel_image(const CMat& m, double factor = 64.0) {
    KernelImage out;
    if (m.rows() == 0 || m.cols() == 0) {
        out.kernel = CMat::Identity(m.cols(), m.cols());
        out.image = CMat(m.rows(), 0);
        return out;
    }
    Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv.size() ? sv(0) : 0.0;
    double thr = std::numeric_limits<double>::epsilon() *
                 static_cast<double>(std::max(m.rows(), m.cols())) * smax * factor;
    out.threshold = thr;
    if (smax > 0.0) {
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            double s = sv(i);
            if (s > thr / 10.0 && s < thr * 10.0)
                throw NumericalRefusal(
                    "ill-conditioned rank: singular value " + std::to_string(s) +
                    " within a factor 10 of threshold " + std::to_string(thr));
        }
    }
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > thr) ++r;
    out.rank = static_cast<std::size_t>(r);
    out.image = svd.matrixU().leftCols(r);
    out.kernel = svd.matrixV().rightCols(m.cols() - r);
    return out;
}

inline std::size_t numeric_rank(const CMat& m, double factor = 64.0) {
    return kernel_image(m, factor).rank;
}

// ---------------------------------------------------------------------------
// Subspace utilities.

// Solve basis * x = target column-wise; refuse if target is not in the span.
inline CMat solve_in_span(const CMat& basis, const CMat& target, double rtol = 1e-9) {
    if (basis.rows() != target.rows()) throw ConfigError("solve_in_span: shape mismatch");
    if (basis.cols() == 0) {
        if (target.norm() > rtol)
            throw NumericalRefusal("solve_in_span: target outside empty span");
        return CMat(0, target.cols());
    }
    CMat x = basis.colPivHouseholderQr().solve(target);
    double resid = (basis * x - target).norm();
    double scale = std::max(1.0, target.norm());
    if (resid > rtol * scale)
        throw NumericalRefusal("solve_in_span: residual " + std::to_string(resid) +
                               " exceeds tolerance");
    return x;
}

// Basis of the G-orthogonal complement of span(u) inside span(w).
// G must be Hermitian positive definite (identity when not supplied).
inline CMat complement_in(const CMat& u, const CMat& w, const CMat& g) {
    if (w.cols() == 0) return CMat(w.rows(), 0);
    if (u.cols() == 0) return w;
    CMat form = u.adjoint() * g * w;
    KernelImage ki = kernel_image(form);
    CMat comp = w * ki.kernel;
    // Orthonormalize (standard inner product) for conditioning only.
    Eigen::HouseholderQR<CMat> qr(comp);
    CMat q = qr.householderQ() * CMat::Identity(comp.rows(), comp.cols());
    return q;
}

// Snap a derived matrix to exact zero when it is numerically zero relative
// to the scale of the data it came from.  Rank decisions threshold against
// a matrix's own largest singular value, so a block that should vanish but
// carries rounding noise would otherwise look full-rank.
inline CMat snap_zero(CMat m, double scale, double atol = 1e-12) {
    if (m.size() != 0 && m.norm() <= atol * std::max(1.0, scale)) m.setZero();
    return m;
}

// G-orthonormalize the columns of v (assumed independent) via Cholesky of
// the Gram matrix v^* G v.
inline CMat g_orthonormalize(const CMat& v, const CMat& g) {
    if (v.cols() == 0) return v;
    CMat gram = v.adjoint() * g * v;
    Eigen::LLT<CMat> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalRefusal("g_orthonormalize: Gram matrix not positive definite");
    CMat l = llt.matrixL();
    return l.triangularView<Eigen::Lower>()
        .solve(v.adjoint().eval())
        .adjoint();
}

// ---------------------------------------------------------------------------
// Log-form scalars.

struct TorsionScalar {
    double log_modulus = 0.0; // log |z|
    double phase = 0.0;       // arg z, kept in (-pi, pi]

    static TorsionScalar one() { return {}; }

    static TorsionScalar from_complex(const Cx& z) {
        if (z == Cx(0.0, 0.0)) throw ConfigError("TorsionScalar: zero value");
        return {std::log(std::abs(z)), std::arg(z)};
    }

    static double wrap(double a) {
        double w = std::remainder(a, 2.0 * std::numbers::pi);
        if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
        return w;
    }

    Cx to_complex() const { return std::exp(log_modulus) * Cx(std::cos(phase), std::sin(phase)); }

    friend TorsionScalar operator*(const TorsionScalar& a, const TorsionScalar& b) {
        return {a.log_modulus + b.log_modulus, wrap(a.phase + b.phase)};
    }
    friend TorsionScalar operator/(const TorsionScalar& a, const TorsionScalar& b) {
        return {a.log_modulus - b.log_modulus, wrap(a.phase - b.phase)};
    }
    TorsionScalar inv() const { return {-log_modulus, wrap(-phase)}; }
    TorsionScalar pow_int(long k) const {
        return {static_cast<double>(k) * log_modulus, wrap(static_cast<double>(k) * phase)};
    }
    TorsionScalar negated() const { return {log_modulus, wrap(phase + std::numbers::pi)}; }
};

inline double torsion_distance(const TorsionScalar& a, const TorsionScalar& b) {
    double dlog = std::abs(a.log_modulus - b.log_modulus);
    double dph = std::abs(TorsionScalar::wrap(a.phase - b.phase));
    return std::max(dlog, dph);
}

// log det via partial-pivot LU, returned in log form (phase folded to
// (-pi, pi], i.e. det up to the principal branch).
inline TorsionScalar logdet_lu(const CMat& a) {
    if (a.rows() != a.cols()) throw ConfigError("logdet_lu: not square");
    if (a.rows() == 0) return TorsionScalar::one();
    Eigen::PartialPivLU<CMat> lu(a);
    CVec d = lu.matrixLU().diagonal();
    TorsionScalar out;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        double m = std::abs(d(i));
        if (m == 0.0) throw NumericalRefusal("logdet_lu: singular matrix");
        out.log_modulus += std::log(m);
        out.phase = TorsionScalar::wrap(out.phase + std::arg(d(i)));
    }
    int sign = static_cast<int>(lu.permutationP().determinant());
    if (sign < 0) out = out.negated();
    return out;
}

} // namespace torsionlab
