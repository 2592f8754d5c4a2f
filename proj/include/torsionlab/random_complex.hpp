#pragma once
// Seeded instance generators.
//
// Two families cover the test and experiment surface:
//
//   * Normal-form models: d0 = diag(a, 0^q, 0^h), d1 = diag(0^p, b, 0^h)
//     on C^0 = C^1 = C^n with n = p + q + h, chirality the identity,
//     optionally conjugated by independent unitaries U0, U1 per parity
//     (d0 -> U1 d0 U0^*, g0 -> U1 U0^*, ...).  Every spectral quantity is
//     known in closed form: the odd signature operator has spectrum
//     a + b + 0^h, C^0_+ carries diag(a), C^0_- carries diag(b), the
//     Laplacian spectrum is |a|^2 + |b|^2 + 0^h per parity, and the
//     refined torsion of an acyclic instance is (-1)^q prod(a)/prod(b).
//     With the standard inner products the chirality is self-adjoint.
//
//   * Generic complexes: d0 of prescribed rank, d1 a random map from an
//     orthonormal complement of im(d0) into ker(d0), so d1 d0 = 0 and
//     d0 d1 = 0 hold by construction.  Optional random positive metrics.
//
// All randomness flows through SplitMix64 so instances are reproducible
// from a single seed.

#include <complex>
#include <cstdint>
#include <vector>

#include "torsionlab/policy.hpp"
#include "torsionlab/rng.hpp"
#include "torsionlab/z2complex.hpp"

namespace torsionlab {

inline CMat random_dense(SplitMix64& rng, std::size_t r, std::size_t c, double amp = 1.0) {
    CMat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                amp * Cx(rng.next_signed(), rng.next_signed());
    return m;
}

inline CMat random_unitary(SplitMix64& rng, std::size_t n) {
    CMat a = random_dense(rng, n, n);
    Eigen::HouseholderQR<CMat> qr(a);
    return qr.householderQ() *
           CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

// Hermitian positive definite with condition number bounded by roughly
// (1 + spread) / spread.
inline CMat random_metric(SplitMix64& rng, std::size_t n, double spread = 0.5) {
    CMat u = random_unitary(rng, n);
    CMat d = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
            Cx(spread + rng.next_double() * (1.0 + spread), 0.0);
    CMat g = u * d * u.adjoint();
    return CMat(0.5 * (g + g.adjoint()));
}

// ---------------------------------------------------------------------------
// Normal-form models.

struct ModelSpec {
    std::vector<Cx> a; // nonzero eigenvalues carried by d0
    std::vector<Cx> b; // nonzero eigenvalues carried by d1
    std::size_t h = 0; // harmonic dimension per parity

    std::size_t dim() const { return a.size() + b.size() + h; }
};

struct Model {
    Z2Complex<NumPolicy> cx;
    Chirality<NumPolicy> gamma;
    ModelSpec spec;
};

inline Model make_model(const ModelSpec& ms, std::uint64_t seed, bool conjugate = true,
                        bool with_metric = false) {
    const std::size_t n = ms.dim();
    const std::size_t p = ms.a.size(), q = ms.b.size();
    CMat d0 = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    CMat d1 = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < p; ++i)
        d0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = ms.a[i];
    for (std::size_t j = 0; j < q; ++j)
        d1(static_cast<Eigen::Index>(p + j), static_cast<Eigen::Index>(p + j)) = ms.b[j];
    CMat g0 = CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    CMat g1 = g0;
    if (conjugate) {
        SplitMix64 rng(seed);
        CMat u0 = random_unitary(rng, n);
        CMat u1 = random_unitary(rng, n);
        d0 = u1 * d0 * u0.adjoint();
        d1 = u0 * d1 * u1.adjoint();
        g0 = u1 * u0.adjoint();
        g1 = u0 * u1.adjoint();
    }
    Model m;
    if (with_metric) {
        CMat eye = CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        m.cx = make_z2complex<NumPolicy>(d0, d1, eye, eye, 1e-10);
    } else {
        m.cx = make_z2complex<NumPolicy>(d0, d1, 1e-10);
    }
    m.gamma = make_chirality(m.cx, g0, g1, 1e-10);
    m.spec = ms;
    return m;
}

// Refined torsion of an acyclic normal-form model: (-1)^q prod(a)/prod(b),
// invariant under the unitary conjugation.
inline Cx expected_acyclic_torsion(const ModelSpec& ms) {
    Cx t(1.0, 0.0);
    for (const auto& z : ms.a) t *= z;
    for (const auto& z : ms.b) t /= z;
    if (ms.b.size() % 2 == 1) t = -t;
    return t;
}

// ---------------------------------------------------------------------------
// Generic complexes with d^2 = 0 by construction.

// d0 = A B^* with A: n1 x r0, B: n0 x r0 (generic rank r0).  d1 maps an
// orthonormal basis K' of im(d0)^perp through a random coefficient block
// into an orthonormal basis K of ker(d0); its generic rank is r1.
// Cohomology dimensions: h0 = n0 - r0 - r1, h1 = n1 - r0 - r1.
inline Z2Complex<NumPolicy> random_z2complex(SplitMix64& rng, std::size_t n0, std::size_t n1,
                                             std::size_t r0, std::size_t r1,
                                             bool with_metric = false) {
    if (r0 + r1 > n0 || r0 + r1 > n1)
        throw ConfigError("random_z2complex: ranks exceed the dimensions");
    CMat d0 = CMat::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0));
    if (r0 > 0) d0 = random_dense(rng, n1, r0) * random_dense(rng, n0, r0).adjoint();
    KernelImage ki = kernel_image(d0);
    // Orthonormal complement of im(d0) inside C^1: trailing Q columns of an
    // unpivoted QR of the (full column rank) image basis.
    CMat full = CMat::Identity(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1));
    Eigen::HouseholderQR<CMat> qr(ki.image);
    CMat q = qr.householderQ() * full;
    CMat coker = q.rightCols(static_cast<Eigen::Index>(n1) - ki.image.cols());
    CMat d1 = CMat::Zero(static_cast<Eigen::Index>(n0), static_cast<Eigen::Index>(n1));
    if (r1 > 0)
        d1 = ki.kernel * random_dense(rng, static_cast<std::size_t>(ki.kernel.cols()), r1) *
             random_dense(rng, static_cast<std::size_t>(coker.cols()), r1).adjoint() *
             coker.adjoint();
    if (!with_metric) return make_z2complex<NumPolicy>(d0, d1, 1e-9);
    return make_z2complex<NumPolicy>(d0, d1, random_metric(rng, n0), random_metric(rng, n1),
                                     1e-9);
}

// Chirality with no self-adjointness constraint: g0 a random invertible
// block (diagonally shifted so invertibility is generic), g1 its inverse.
inline Chirality<NumPolicy> random_chirality(SplitMix64& rng, const Z2Complex<NumPolicy>& cx) {
    if (cx.n0 != cx.n1)
        throw ConfigError("random_chirality: parities must have equal dimension");
    CMat g0 = random_dense(rng, cx.n0, cx.n0) +
              (2.0 + static_cast<double>(cx.n0)) *
                  CMat::Identity(static_cast<Eigen::Index>(cx.n0),
                                 static_cast<Eigen::Index>(cx.n0));
    return make_chirality(cx, g0, CMat(g0.inverse()), 1e-9);
}

// Self-adjoint chirality for a metrized complex: g0 = G1^{-1/2} U G0^{1/2}
// with U unitary makes Gamma both an involution and G-self-adjoint.
inline Chirality<NumPolicy> random_selfadjoint_chirality(SplitMix64& rng,
                                                         const Z2Complex<NumPolicy>& cx) {
    if (cx.n0 != cx.n1)
        throw ConfigError("random_selfadjoint_chirality: parities must have equal dimension");
    if (!cx.has_metric)
        throw ConfigError("random_selfadjoint_chirality: inner products required");
    CMat u = random_unitary(rng, cx.n0);
    Eigen::SelfAdjointEigenSolver<CMat> e0(cx.G0), e1(cx.G1);
    CMat g0 = e1.operatorInverseSqrt() * u * e0.operatorSqrt();
    CMat g1 = cx.G0.inverse() * g0.adjoint() * cx.G1;
    return make_chirality(cx, g0, g1, 1e-8);
}

// ---------------------------------------------------------------------------
// Exact-backend instances: Gaussian-integer data, d^2 = 0 by construction.

inline GQ random_gq(SplitMix64& rng, long amp = 2) {
    return GQ(mpq_class(rng.next_small_int(amp)), mpq_class(rng.next_small_int(amp)));
}

inline QMat random_qmat(SplitMix64& rng, std::size_t r, std::size_t c, long amp = 2) {
    QMat m = QMat::zero(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = random_gq(rng, amp);
    return m;
}

// d0 = A B^dagger of prescribed generic rank, d1 routed through the exact
// kernel bases so both composites vanish identically.
inline Z2Complex<ExactPolicy> random_exact_z2complex(SplitMix64& rng, std::size_t n0,
                                                     std::size_t n1, std::size_t r0,
                                                     std::size_t r1,
                                                     bool with_metric = false) {
    if (r0 + r1 > n0 || r0 + r1 > n1)
        throw ConfigError("random_exact_z2complex: ranks exceed the dimensions");
    QMat d0 = QMat::zero(n1, n0);
    if (r0 > 0)
        d0 = random_qmat(rng, n1, r0) * adjoint(random_qmat(rng, n0, r0));
    QMat k = ExactPolicy::kernel(d0);          // in C^0
    QMat w = ExactPolicy::kernel(adjoint(d0)); // in C^1
    QMat d1 = QMat::zero(n0, n1);
    if (r1 > 0)
        d1 = k * random_qmat(rng, k.cols(), r1) * adjoint(random_qmat(rng, w.cols(), r1)) *
             adjoint(w);
    if (!with_metric) return make_z2complex<ExactPolicy>(d0, d1);
    auto gram = [&](std::size_t n) {
        QMat a = random_qmat(rng, n, n);
        return QMat(adjoint(a) * a + GQ(static_cast<long>(n) + 1) * QMat::identity(n));
    };
    return make_z2complex<ExactPolicy>(d0, d1, gram(n0), gram(n1));
}

// Exact chirality: integer g0 with a diagonal shift (redrawn in the measure-
// zero event of a vanishing determinant), g1 the exact inverse.
inline Chirality<ExactPolicy> random_exact_chirality(SplitMix64& rng,
                                                     const Z2Complex<ExactPolicy>& cx) {
    if (cx.n0 != cx.n1)
        throw ConfigError("random_exact_chirality: parities must have equal dimension");
    for (int attempt = 0; attempt < 64; ++attempt) {
        QMat g0 = random_qmat(rng, cx.n0, cx.n0) +
                  GQ(static_cast<long>(cx.n0) + 2) * QMat::identity(cx.n0);
        if (det(g0) == GQ(0)) continue;
        return make_chirality(cx, g0, inverse(g0));
    }
    throw NumericalRefusal("random_exact_chirality: could not draw an invertible block");
}

} // namespace torsionlab
