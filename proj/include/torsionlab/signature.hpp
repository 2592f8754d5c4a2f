#pragma once

// The signature operator of a graded complex with chirality and everything
// built from its spectrum.
//
//   B_k = Gamma d + d Gamma restricted to C^k; B_0 = Gamma B_1 Gamma.
//
// Spectral windows are taken from B_k^2 (block-diagonalized by modulus with
// shared cuts across parity).  On a window whose spectrum avoids 0 the
// complex splits as C^k = C^k_+ (+) C^k_- with
//
//   C^k_- = ker d_k,   C^k_+ = Gamma(ker d_{k+1}),
//
// both intersected with the window, and B acts as Gamma d on C_+ and
// d Gamma on C_-.  The graded determinant of a window is
//
//   Det_gr = exp( ldet_theta(B^+_0) - ldet_theta(-B^+_1) ),
//
// a branch-independent nonzero number kept in log form.  With
//
//   xi      = 1/2 [ ldet_{2 theta}((B^+_0)^2) - ldet_{2 theta}((B^+_1)^2) ],
//   eta     = spectral asymmetry of B_0 on the windows above the cut,
//   d^-_k   = dim C^k_- per window,
//
// the log of the graded determinant over (lambda, inf) equals
//   xi - i pi eta - (i pi / 2) sum_k (-1)^k d^-_k
// whenever theta lies in (-pi/2, 0) and no eigenvalue direction of B falls
// in the closed arcs (-pi/2, theta] or (pi/2, theta + pi].  The d^- count
// in this identity runs over the windows ABOVE the cut: a zeta-regularized
// value at 0 that vanishes in the closed setting equals the plain dimension
// here, which moves the count to the complementary window.  The parity
// congruence  sum_k (-1)^k d^-_k = dim C^0_[0,lambda] (mod 2)  uses the
// windows BELOW the cut, and both counts are exposed.
//
// rho_H is computed from its definition: the graded determinant over the
// windows above lambda times the refined torsion of the [0, lambda] window
// subcomplex, carried to the cohomology of the ambient complex along the
// inclusion (a quasi-isomorphism because 0-free windows are acyclic).
// rho_an adds the phase exp(i pi rank eta_trivial).
//
// The flux deformation d_v = e^{v beta} d e^{-v beta} (beta parity
// preserving) changes nothing cohomological; finite-dimensionally
//
//   d/dv xi_lambda          = - sum_k (-1)^k tr(beta | windows above),
//   d/dv (pulled-back rho)  = - sum_k (-1)^k tr(beta | windows below) rho,
//   d/dv log(e^xi rho)      = - (tr beta|C0 - tr beta|C1),
//
// so the combined object is constant exactly when the supertrace of beta
// vanishes.  The closed-setting form of the first line uses the windows
// below the cut with the opposite sign; the two versions differ by the full
// supertrace, and that discrepancy is asserted as an exact identity.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "torsionlab/detline.hpp"
#include "torsionlab/errors.hpp"
#include "torsionlab/numeric.hpp"
#include "torsionlab/policy.hpp"
#include "torsionlab/spectral.hpp"
#include "torsionlab/z2complex.hpp"

namespace torsionlab {

// ---------------------------------------------------------------------------
// Assembly.

struct SignatureData {
    Z2Complex<NumPolicy> cx;
    Chirality<NumPolicy> gamma;
    CMat b0, b1;                       // blocks of Gamma d + d Gamma
    std::array<SpectralSplit, 2> split; // windows of b_k^2, shared cuts
    double spectral_radius = 0.0;       // of the squared operator

    const CMat& block(int k) const { return (k % 2 == 0) ? b0 : b1; }
    std::size_t window_count() const { return split[0].windows.size(); }
};

// Restriction of m to the (invariant) orthonormal window basis; refuses when
// the window is in fact not invariant under m.
inline CMat window_restrict(const SpectralWindow& win, const CMat& m,
                            const std::string& what, double rtol = 1e-9) {
    CMat mw = m * win.basis;
    CMat r = win.basis.adjoint() * mw;
    double scale = std::max(1.0, mw.norm());
    if ((mw - win.basis * r).norm() > rtol * scale)
        throw NumericalRefusal(what + ": window basis not invariant");
    return r;
}

inline SignatureData build_signature(const Z2Complex<NumPolicy>& cx,
                                     const Chirality<NumPolicy>& gam,
                                     std::vector<double> cuts = {},
                                     double rel_tol = 1e-8) {
    SignatureData sig{cx, gam, CMat(), CMat(), {}, 0.0};
    sig.b0 = gam.g1 * cx.d0 + cx.d1 * gam.g0;
    sig.b1 = gam.g0 * cx.d1 + cx.d0 * gam.g1;

    CMat conj = gam.g0 * sig.b0 * gam.g1;
    double scale = std::max(1.0, sig.b1.norm());
    if ((sig.b1 - conj).norm() > 1e-12 * scale)
        throw NumericalRefusal("build_signature: Gamma conjugation identity fails");

    sig.split[0] = split_by_modulus(sig.b0 * sig.b0, cuts, rel_tol);
    sig.split[1] = split_by_modulus(sig.b1 * sig.b1, cuts, rel_tol);
    for (std::size_t w = 0; w < sig.split[0].windows.size(); ++w)
        if (sig.split[0].windows[w].dim() != sig.split[1].windows[w].dim())
            throw NumericalRefusal("build_signature: window dimensions disagree across parity");
    for (int k = 0; k < 2; ++k)
        for (const auto& win : sig.split[k].windows)
            for (const auto& mu : win.eigenvalues)
                sig.spectral_radius = std::max(sig.spectral_radius, std::abs(mu));
    return sig;
}

// True when the window holds an eigenvalue of B^2 at 0 (relative to the
// spectral radius; an identically zero operator counts as containing 0).
inline bool window_contains_zero(const SignatureData& sig, std::size_t w,
                                 double zero_rtol = 1e-10) {
    double floor_ = zero_rtol * sig.spectral_radius;
    for (int k = 0; k < 2; ++k)
        for (const auto& mu : sig.split[k].windows[w].eigenvalues)
            if (std::abs(mu) <= floor_) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Plus/minus splitting per window.

struct PMSplit {
    CMat plus_basis, minus_basis; // ambient coordinates
    CMat b_plus, b_minus;         // restrictions of B_k to the halves
    std::size_t d_minus = 0;      // dim of C^k_- in the window
};

inline PMSplit pm_split(const SignatureData& sig, int k, std::size_t w,
                        double rtol = 1e-9) {
    k = ((k % 2) + 2) % 2;
    if (w >= sig.window_count()) throw ConfigError("pm_split: bad window index");
    if (window_contains_zero(sig, w))
        throw NumericalRefusal("pm_split: window contains 0, plus/minus split not guaranteed");

    const SpectralWindow& win = sig.split[static_cast<std::size_t>(k)].windows[w];
    const SpectralWindow& win1 = sig.split[static_cast<std::size_t>(1 - k)].windows[w];

    // Window subcomplex in window coordinates.  A restricted differential
    // that vanishes on the window comes back as rounding noise; snap it so
    // rank decisions see the true zero block.
    CMat dk = snap_zero(solve_in_span(win1.basis, sig.cx.diff(k) * win.basis, rtol),
                        sig.cx.diff(k).norm());
    CMat dk1 = snap_zero(solve_in_span(win.basis, sig.cx.diff(1 - k) * win1.basis, rtol),
                         sig.cx.diff(1 - k).norm());
    CMat gk1 = solve_in_span(win.basis, sig.gamma.block(1 - k) * win1.basis, rtol);

    CMat minus = kernel_image(dk).kernel;       // ker d_k in the window
    CMat plus = gk1 * kernel_image(dk1).kernel; // Gamma(ker d_{k+1})

    std::size_t m = win.dim();
    if (static_cast<std::size_t>(minus.cols() + plus.cols()) != m)
        throw NumericalRefusal("pm_split: half dimensions do not sum to the window");
    if (m > 0 && kernel_image(hcat(plus, minus)).rank != m)
        throw NumericalRefusal("pm_split: plus and minus halves are not transversal");

    CMat bw = window_restrict(win, sig.block(k), "pm_split");
    PMSplit out;
    out.b_plus = solve_in_span(plus, bw * plus, rtol);
    out.b_minus = solve_in_span(minus, bw * minus, rtol);
    out.plus_basis = win.basis * plus;
    out.minus_basis = win.basis * minus;
    out.d_minus = static_cast<std::size_t>(minus.cols());
    return out;
}

// ---------------------------------------------------------------------------
// Graded determinant.

inline std::vector<Cx> negated(std::vector<Cx> v) {
    for (auto& z : v) z = -z;
    return v;
}

// log Det_gr of one window: ldet_theta(B^+_0) - ldet_theta(-B^+_1).
inline Cx graded_ldet(const SignatureData& sig, std::size_t w, double theta) {
    if (!(theta > -kPi && theta < 0.0))
        throw ConfigError("graded_det: theta outside (-pi, 0)");
    PMSplit p0 = pm_split(sig, 0, w);
    PMSplit p1 = pm_split(sig, 1, w);
    return ldet_branch(eigenvalues_of(p0.b_plus), theta) -
           ldet_branch(negated(eigenvalues_of(p1.b_plus)), theta);
}

inline TorsionScalar graded_det(const SignatureData& sig, std::size_t w, double theta) {
    Cx l = graded_ldet(sig, w, theta);
    return TorsionScalar{l.real(), TorsionScalar::wrap(l.imag())};
}

// Product over the windows with index >= first.
inline TorsionScalar graded_det_above(const SignatureData& sig, std::size_t first,
                                      double theta) {
    TorsionScalar out = TorsionScalar::one();
    for (std::size_t w = first; w < sig.window_count(); ++w)
        if (sig.split[0].windows[w].dim() > 0) out = out * graded_det(sig, w, theta);
    return out;
}

// ---------------------------------------------------------------------------
// Eta invariant.

struct EtaResult {
    long positive = 0, negative = 0;   // Re > 0 / Re < 0 counts
    long m_plus = 0, m_minus = 0;      // purely imaginary, Im > 0 / Im < 0
    long m_zero = 0;
    bool axis_warning = false; // an eigenvalue sat near (not on) the axis

    long eta0() const { return positive - negative; }
    double eta() const {
        return 0.5 * static_cast<double>(eta0() + m_plus - m_minus + m_zero);
    }
    long total() const { return positive + negative + m_plus + m_minus + m_zero; }

    EtaResult& operator+=(const EtaResult& o) {
        positive += o.positive;
        negative += o.negative;
        m_plus += o.m_plus;
        m_minus += o.m_minus;
        m_zero += o.m_zero;
        axis_warning = axis_warning || o.axis_warning;
        return *this;
    }
};

inline EtaResult eta_from_spectrum(const std::vector<Cx>& spectrum,
                                   double axis_rtol = 1e-10, double zero_rtol = 1e-12) {
    double radius = 0.0;
    for (const auto& mu : spectrum) radius = std::max(radius, std::abs(mu));
    EtaResult out;
    for (const auto& mu : spectrum) {
        double m = std::abs(mu);
        if (m <= zero_rtol * radius || m == 0.0) {
            ++out.m_zero;
            continue;
        }
        double re = std::abs(mu.real());
        if (re <= axis_rtol * m) {
            if (mu.imag() > 0.0) ++out.m_plus;
            else ++out.m_minus;
            continue;
        }
        if (re <= 100.0 * axis_rtol * m) out.axis_warning = true;
        if (mu.real() > 0.0) ++out.positive;
        else ++out.negative;
    }
    if (out.total() != static_cast<long>(spectrum.size()))
        throw NumericalRefusal("eta_invariant: eigenvalue counts do not sum");
    return out;
}

inline EtaResult eta_invariant(const CMat& d, double axis_rtol = 1e-10,
                               double zero_rtol = 1e-12) {
    return eta_from_spectrum(eigenvalues_of(d), axis_rtol, zero_rtol);
}

// Eta of B_0 restricted to the windows with index >= first.
inline EtaResult eta_above(const SignatureData& sig, std::size_t first) {
    EtaResult out;
    for (std::size_t w = first; w < sig.window_count(); ++w) {
        const SpectralWindow& win = sig.split[0].windows[w];
        if (win.dim() == 0) continue;
        out += eta_invariant(window_restrict(win, sig.b0, "eta_above"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Xi.

// Per-window xi contribution through the 2 theta branch on the squared
// plus-spectra.
inline Cx xi_window(const SignatureData& sig, std::size_t w, double theta) {
    PMSplit p0 = pm_split(sig, 0, w);
    PMSplit p1 = pm_split(sig, 1, w);
    auto squares = [](std::vector<Cx> v) {
        for (auto& z : v) z = z * z;
        return v;
    };
    Cx l0 = ldet_branch(squares(eigenvalues_of(p0.b_plus)), 2.0 * theta);
    Cx l1 = ldet_branch(squares(eigenvalues_of(p1.b_plus)), 2.0 * theta);
    return 0.5 * (l0 - l1);
}

inline Cx xi_above(const SignatureData& sig, std::size_t first, double theta) {
    Cx out(0.0, 0.0);
    for (std::size_t w = first; w < sig.window_count(); ++w)
        if (sig.split[0].windows[w].dim() > 0) out += xi_window(sig, w, theta);
    return out;
}

// Alternating-sign d^- count over a window range [first, last).
inline long d_minus_alternating(const SignatureData& sig, std::size_t first,
                                std::size_t last) {
    long out = 0;
    for (std::size_t w = first; w < last && w < sig.window_count(); ++w) {
        if (sig.split[0].windows[w].dim() == 0) continue;
        out += static_cast<long>(pm_split(sig, 0, w).d_minus);
        out -= static_cast<long>(pm_split(sig, 1, w).d_minus);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Eta identity.

// Eigenvalues of B_0 on the windows above the cut.
inline std::vector<Cx> signature_spectrum_above(const SignatureData& sig,
                                                std::size_t first) {
    std::vector<Cx> out;
    for (std::size_t w = first; w < sig.window_count(); ++w) {
        const SpectralWindow& win = sig.split[0].windows[w];
        if (win.dim() == 0) continue;
        auto eigs = eigenvalues_of(window_restrict(win, sig.b0, "signature spectrum"));
        out.insert(out.end(), eigs.begin(), eigs.end());
    }
    return out;
}

// theta must lie in (-pi/2, 0) with no eigenvalue direction of B inside the
// arcs (-pi/2, theta] or (pi/2, theta + pi].
inline bool eta_identity_admissible(const std::vector<Cx>& spectrum, double theta) {
    if (!(theta > -kPi / 2.0 && theta < 0.0)) return false;
    for (const auto& mu : spectrum) {
        if (std::abs(mu) == 0.0) continue;
        double a = std::arg(mu);
        if (a > -kPi / 2.0 && a <= theta) return false;
        if (a > kPi / 2.0 && a <= theta + kPi) return false;
    }
    return true;
}

// Largest-clearance admissible angle: midpoint between -pi/2 and the first
// constraining eigenvalue direction.
inline double eta_identity_theta(const std::vector<Cx>& spectrum,
                                 double min_clearance = 1e-9) {
    double thmax = 0.0;
    for (const auto& mu : spectrum) {
        if (std::abs(mu) == 0.0)
            throw NumericalRefusal("eta_identity_theta: zero eigenvalue above the cut");
        double a = std::arg(mu);
        if (a > -kPi / 2.0 && a <= 0.0) thmax = std::min(thmax, a);
        if (a > kPi / 2.0) thmax = std::min(thmax, a - kPi);
    }
    double clearance = thmax + kPi / 2.0;
    if (clearance <= 2.0 * min_clearance)
        throw NumericalRefusal("eta_identity_theta: no admissible angle in (-pi/2, 0)");
    return -kPi / 2.0 + 0.5 * clearance;
}

struct EtaIdentity {
    Cx lhs;            // log Det_gr over the windows above the cut
    Cx xi;             // xi over the same windows
    EtaResult eta;     // eta of B_0 there
    long d_minus_alt;  // alternating d^- count there
    Cx rhs;            // xi - i pi eta - (i pi / 2) d_minus_alt
    double theta = 0.0;
    double residual = 0.0, scale = 1.0;
};

inline EtaIdentity eta_identity_check(const SignatureData& sig, std::size_t first,
                                      double theta) {
    if (!eta_identity_admissible(signature_spectrum_above(sig, first), theta))
        throw NumericalRefusal("eta_identity_check: theta violates the sector hypothesis");
    EtaIdentity out;
    out.theta = theta;
    out.lhs = Cx(0.0, 0.0);
    for (std::size_t w = first; w < sig.window_count(); ++w)
        if (sig.split[0].windows[w].dim() > 0) out.lhs += graded_ldet(sig, w, theta);
    out.xi = xi_above(sig, first, theta);
    out.eta = eta_above(sig, first);
    out.d_minus_alt = d_minus_alternating(sig, first, sig.window_count());
    out.rhs = out.xi - Cx(0.0, kPi) * out.eta.eta() -
              Cx(0.0, kPi / 2.0) * static_cast<double>(out.d_minus_alt);
    out.residual = std::abs(out.lhs - out.rhs);
    out.scale = std::max(1.0, std::max(std::abs(out.lhs), std::abs(out.rhs)));
    return out;
}

// ---------------------------------------------------------------------------
// Window subcomplex and rho_H.

struct WindowComplex {
    Z2Complex<NumPolicy> cx;
    Chirality<NumPolicy> gamma;
    std::array<CMat, 2> w; // inclusion bases per parity (ambient columns)
};

// The subcomplex spanned by the windows [0, last_small] per parity.
inline WindowComplex window_subcomplex(const SignatureData& sig, std::size_t last_small,
                                       double rtol = 1e-8) {
    std::array<CMat, 2> w;
    for (int k = 0; k < 2; ++k) {
        w[k] = CMat(sig.cx.dim(k), 0);
        for (std::size_t j = 0; j <= last_small && j < sig.window_count(); ++j)
            w[k] = hcat(w[k], sig.split[k].windows[j].basis);
    }
    CMat d0s = snap_zero(solve_in_span(w[1], sig.cx.d0 * w[0], rtol), sig.cx.d0.norm());
    CMat d1s = snap_zero(solve_in_span(w[0], sig.cx.d1 * w[1], rtol), sig.cx.d1.norm());
    CMat g0s = solve_in_span(w[1], sig.gamma.g0 * w[0], rtol);
    CMat g1s = solve_in_span(w[0], sig.gamma.g1 * w[1], rtol);

    WindowComplex out;
    if (sig.cx.has_metric) {
        CMat gm0 = w[0].adjoint() * sig.cx.G0 * w[0];
        CMat gm1 = w[1].adjoint() * sig.cx.G1 * w[1];
        out.cx = make_z2complex<NumPolicy>(d0s, d1s, gm0, gm1, rtol);
    } else {
        out.cx = make_z2complex<NumPolicy>(d0s, d1s, rtol);
    }
    out.gamma = make_chirality(out.cx, g0s, g1s, rtol);
    out.w = w;
    return out;
}

struct RhoResult {
    TorsionScalar coeff; // relative to the H-frame of decompose(cx)
    std::size_t h0 = 0, h1 = 0;
    double lambda = 0.0, theta = 0.0;
};

// rho_H from its definition: graded determinant above lambda times the
// refined torsion of the [0, lambda] window subcomplex, expressed in the
// ambient cohomology frame along the window inclusion.
inline RhoResult rho_h(const Z2Complex<NumPolicy>& cx, const Chirality<NumPolicy>& gam,
                       double lambda, double theta, double rel_tol = 1e-8) {
    if (lambda < 0.0) throw ConfigError("rho_h: negative lambda");
    std::vector<double> cuts;
    if (lambda > 0.0) cuts.push_back(lambda);
    SignatureData sig = build_signature(cx, gam, cuts, rel_tol);
    Decomposition<NumPolicy> dec = decompose(cx);

    RhoResult out;
    out.lambda = lambda;
    out.theta = theta;
    out.h0 = NumPolicy::cols(dec.H[0]);
    out.h1 = NumPolicy::cols(dec.H[1]);

    if (lambda == 0.0) {
        if (window_contains_zero(sig, 0))
            throw NumericalRefusal("rho_h: lambda = 0 requires an invertible signature operator");
        if (out.h0 != 0 || out.h1 != 0)
            throw NumericalRefusal("rho_h: invertible signature operator on a non-acyclic complex");
        out.coeff = graded_det_above(sig, 0, theta);
        return out;
    }

    WindowComplex sub = window_subcomplex(sig, 0, rel_tol);
    Decomposition<NumPolicy> dec_sub = decompose(sub.cx);
    DetElement<NumPolicy> rho_sub = refined_torsion(sub.cx, sub.gamma, dec_sub);

    if (NumPolicy::cols(dec_sub.H[0]) != out.h0 || NumPolicy::cols(dec_sub.H[1]) != out.h1)
        throw NumericalRefusal("rho_h: window subcomplex changes cohomology");

    // Carry the torsion class along the inclusion: columns W_k H_sub are
    // closed ambient vectors; their classes give the frame conversion.
    CMat t0 = class_in_frame(dec, 0, CMat(sub.w[0] * dec_sub.H[0]));
    CMat t1 = class_in_frame(dec, 1, CMat(sub.w[1] * dec_sub.H[1]));
    Cx conv = NumPolicy::det_ratio(t0, t1);
    out.coeff = graded_det_above(sig, 1, theta) *
                TorsionScalar::from_complex(rho_sub.coeff * conv);
    return out;
}

// rho_an = rho_H shifted by the phase exp(i pi rank eta_trivial).
inline RhoResult rho_an(const Z2Complex<NumPolicy>& cx, const Chirality<NumPolicy>& gam,
                        double lambda, double theta, double eta_trivial, long rank,
                        double rel_tol = 1e-8) {
    RhoResult out = rho_h(cx, gam, lambda, theta, rel_tol);
    out.coeff.phase = TorsionScalar::wrap(
        out.coeff.phase + kPi * static_cast<double>(rank) * eta_trivial);
    return out;
}

// ---------------------------------------------------------------------------
// Flux deformation.

// One evaluation of the deformed family at parameter v: the complex
// d_v = e^{v beta} d e^{-v beta}, its xi over the windows above the cut, the
// small-window torsion pulled back to the reference cohomology frame along
// e^{v beta}, and the combined object e^{xi} rho.
struct FluxSample {
    Cx xi;
    Cx rho_pullback;      // coefficient in the reference H-frame
    TorsionScalar combined;
};

inline FluxSample flux_sample(const Z2Complex<NumPolicy>& cx,
                              const Chirality<NumPolicy>& gam, const CMat& beta0,
                              const CMat& beta1, double lambda, double theta, double v,
                              const Decomposition<NumPolicy>& dec0,
                              double rel_tol = 1e-8) {
    CMat e0 = (v * beta0).exp(), e0i = (-v * beta0).exp();
    CMat e1 = (v * beta1).exp(), e1i = (-v * beta1).exp();
    CMat d0v = e1 * cx.d0 * e0i;
    CMat d1v = e0 * cx.d1 * e1i;

    Z2Complex<NumPolicy> cxv = cx.has_metric
                                   ? make_z2complex<NumPolicy>(d0v, d1v, cx.G0, cx.G1, rel_tol)
                                   : make_z2complex<NumPolicy>(d0v, d1v, rel_tol);

    std::vector<double> cuts;
    if (lambda > 0.0) cuts.push_back(lambda);
    SignatureData sig;
    try {
        sig = build_signature(cxv, gam, cuts, rel_tol);
    } catch (const NumericalRefusal& e) {
        throw NumericalRefusal(std::string("window collision during deformation: ") +
                               e.what());
    }
    std::size_t first_big = (lambda > 0.0) ? 1 : 0;

    FluxSample out;
    if (lambda == 0.0 && window_contains_zero(sig, 0))
        throw NumericalRefusal("flux_sample: lambda = 0 requires an invertible signature operator");
    out.xi = xi_above(sig, first_big, theta);

    Cx z(1.0, 0.0);
    Decomposition<NumPolicy> decv = decompose(cxv);
    if (lambda > 0.0) {
        WindowComplex sub = window_subcomplex(sig, 0, rel_tol);
        Decomposition<NumPolicy> dec_sub = decompose(sub.cx);
        DetElement<NumPolicy> rho_sub = refined_torsion(sub.cx, sub.gamma, dec_sub);
        CMat t0 = class_in_frame(decv, 0, CMat(sub.w[0] * dec_sub.H[0]));
        CMat t1 = class_in_frame(decv, 1, CMat(sub.w[1] * dec_sub.H[1]));
        z = rho_sub.coeff * NumPolicy::det_ratio(t0, t1);
    }
    // Pull back along e^{v beta}: columns of e^{v beta} H_0(ref) are closed
    // for d_v; the determinant ratio converts the v-frame coordinate.
    CMat t0 = class_in_frame(decv, 0, CMat(e0 * dec0.H[0]));
    CMat t1 = class_in_frame(decv, 1, CMat(e1 * dec0.H[1]));
    out.rho_pullback = z * NumPolicy::det_ratio(t1, t0);
    out.combined = TorsionScalar{out.xi.real(), TorsionScalar::wrap(out.xi.imag())} *
                   TorsionScalar::from_complex(out.rho_pullback);
    return out;
}

struct FluxVariation {
    double h = 0.0;
    Cx dxi_dv;          // central difference of xi_lambda
    Cx drho_dv;         // central difference of the pulled-back torsion
    Cx dlog_combined;   // central difference of log(e^xi rho)
    Cx trace_small;     // sum_k (-1)^k tr(beta | windows below the cut)
    Cx trace_big;       // sum_k (-1)^k tr(beta | windows above the cut)
    Cx supertrace;      // tr(beta0) - tr(beta1)
    double residual_xi = 0.0;       // |dxi/dv + trace_big|
    double residual_xi_closed = 0.0; // |dxi/dv - trace_small| (closed-setting form)
    double residual_rho = 0.0;      // |drho/dv + trace_small rho(0)|
    double residual_combined = 0.0; // |dlog_combined/dv + supertrace|
    double discrepancy = 0.0;       // |supertrace - trace_small - trace_big|
    double scale = 1.0;
};

inline FluxVariation flux_variation_check(const Z2Complex<NumPolicy>& cx,
                                          const Chirality<NumPolicy>& gam,
                                          const CMat& beta0, const CMat& beta1,
                                          double lambda, double theta, double h,
                                          double rel_tol = 1e-8) {
    if (beta0.rows() != static_cast<Eigen::Index>(cx.n0) ||
        beta0.cols() != static_cast<Eigen::Index>(cx.n0) ||
        beta1.rows() != static_cast<Eigen::Index>(cx.n1) ||
        beta1.cols() != static_cast<Eigen::Index>(cx.n1))
        throw ConfigError("flux_variation_check: beta blocks must preserve parity");
    if (!(h > 0.0)) throw ConfigError("flux_variation_check: step must be positive");

    std::vector<double> cuts;
    if (lambda > 0.0) cuts.push_back(lambda);
    SignatureData sig0 = build_signature(cx, gam, cuts, rel_tol);
    std::size_t first_big = (lambda > 0.0) ? 1 : 0;

    FluxVariation out;
    out.h = h;
    out.supertrace = beta0.trace() - beta1.trace();
    out.trace_small = Cx(0.0, 0.0);
    out.trace_big = Cx(0.0, 0.0);
    for (std::size_t w = 0; w < sig0.window_count(); ++w) {
        Cx alt = window_trace(sig0.split[0], beta0, w) - window_trace(sig0.split[1], beta1, w);
        if (w < first_big) out.trace_small += alt;
        else out.trace_big += alt;
    }

    Decomposition<NumPolicy> dec0 = decompose(cx);
    FluxSample at0 = flux_sample(cx, gam, beta0, beta1, lambda, theta, 0.0, dec0, rel_tol);
    FluxSample fw = flux_sample(cx, gam, beta0, beta1, lambda, theta, h, dec0, rel_tol);
    FluxSample bw = flux_sample(cx, gam, beta0, beta1, lambda, theta, -h, dec0, rel_tol);

    out.dxi_dv = (fw.xi - bw.xi) / (2.0 * h);
    out.drho_dv = (fw.rho_pullback - bw.rho_pullback) / (2.0 * h);
    double dlm = fw.combined.log_modulus - bw.combined.log_modulus;
    double dph = TorsionScalar::wrap(fw.combined.phase - bw.combined.phase);
    out.dlog_combined = Cx(dlm, dph) / (2.0 * h);

    out.residual_xi = std::abs(out.dxi_dv + out.trace_big);
    out.residual_xi_closed = std::abs(out.dxi_dv - out.trace_small);
    out.residual_rho = std::abs(out.drho_dv + out.trace_small * at0.rho_pullback);
    out.residual_combined = std::abs(out.dlog_combined + out.supertrace);
    out.discrepancy = std::abs(out.supertrace - out.trace_small - out.trace_big);
    out.scale = 1.0 + std::abs(out.supertrace) + std::abs(out.trace_big) +
                std::abs(out.trace_small) + std::abs(at0.rho_pullback);
    return out;
}

// ---------------------------------------------------------------------------
// Duality chain.
//
// Exact finite comparison of rho_an on a complex and on its metric dual:
//
//   alpha(rho_an) = rho_an(dual) * exp[ 2 pi i eta_(lambda,inf)
//                                       + (i pi / 2)(D + D')
//                                       - 2 pi i rank eta_trivial ]
//
// with D and D' the alternating d^- counts of the (lambda, inf) windows on
// the two sides and mirrored Agmon angles theta' = -theta - pi.  It requires
// eta to agree across the two models (no purely imaginary window
// eigenvalues), which holds generically.  The idealized comparison with
// exponent 2 pi i (eta - rank eta_trivial) drops the d^- terms; its defect
// is reported, not asserted.

struct DualityChain {
    RhoResult rho;       // primal rho_an at theta
    RhoResult rho_dual;  // dual-model rho_an at theta' = -theta - pi
    Cx alpha_rho;        // primal element transported through the pairing
    double eta_window = 0.0;
    long d_minus = 0, d_minus_dual = 0;
    Cx phase;            // the chain exponential
    Cx rhs;              // rho_dual * phase
    double theta = 0.0, theta_dual = 0.0;
    double residual = 0.0;             // |alpha_rho - rhs|
    double theorem_discrepancy = 0.0;  // defect of the d^- -free comparison
    double scale = 1.0;
};

inline DualityChain duality_chain_check(const Z2Complex<NumPolicy>& cx,
                                        const Chirality<NumPolicy>& gam, double lambda,
                                        double theta, double eta_trivial, long rank,
                                        double rel_tol = 1e-8) {
    DualityChain out;
    out.theta = theta;
    out.theta_dual = -theta - kPi;

    std::vector<double> cuts;
    if (lambda > 0.0) cuts.push_back(lambda);
    std::size_t first = (lambda > 0.0) ? 1 : 0;

    SignatureData sig = build_signature(cx, gam, cuts, rel_tol);
    out.rho = rho_an(cx, gam, lambda, theta, eta_trivial, rank, rel_tol);
    out.eta_window = eta_above(sig, first).eta();
    out.d_minus = d_minus_alternating(sig, first, sig.window_count());

    Z2Complex<NumPolicy> dl = dual_complex(cx);
    Chirality<NumPolicy> gd = dual_chirality(cx, gam);
    SignatureData sigd = build_signature(dl, gd, cuts, rel_tol);
    out.rho_dual = rho_an(dl, gd, lambda, out.theta_dual, eta_trivial, rank, rel_tol);
    out.d_minus_dual = d_minus_alternating(sigd, first, sigd.window_count());

    Decomposition<NumPolicy> dec = decompose(cx), decd = decompose(dl);
    DetElement<NumPolicy> x = make_graded_element<NumPolicy>(
        "H0", static_cast<std::size_t>(out.rho.h0), "H1",
        static_cast<std::size_t>(out.rho.h1), out.rho.coeff.to_complex());
    out.alpha_rho = alpha_on_cohomology(cx, dec, dl, decd, x).coeff;

    const double two_pi = 2.0 * kPi;
    double expo = two_pi * out.eta_window +
                  0.5 * kPi * static_cast<double>(out.d_minus + out.d_minus_dual) -
                  two_pi * static_cast<double>(rank) * eta_trivial;
    out.phase = std::exp(Cx(0.0, expo));
    out.rhs = out.rho_dual.coeff.to_complex() * out.phase;
    out.scale = std::max(1.0, std::abs(out.alpha_rho));
    out.residual = std::abs(out.alpha_rho - out.rhs);

    double naive = two_pi * (out.eta_window - static_cast<double>(rank) * eta_trivial);
    out.theorem_discrepancy =
        std::abs(out.alpha_rho - out.rho_dual.coeff.to_complex() * std::exp(Cx(0.0, naive)));
    return out;
}

} // namespace torsionlab
