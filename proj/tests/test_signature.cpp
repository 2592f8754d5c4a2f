#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "torsionlab/rng.hpp"
#include "torsionlab/signature.hpp"

using namespace torsionlab;

namespace {

bool ts_close(const TorsionScalar& x, const TorsionScalar& y, double tol) {
    return torsion_distance(x, y) <= tol;
}

bool cx_close(const Cx& x, const Cx& y, double tol) {
    return std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)));
}

CMat random_dense(SplitMix64& rng, std::size_t r, std::size_t c) {
    CMat m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                Cx(rng.next_signed(), rng.next_signed());
    return m;
}

CMat random_unitary(SplitMix64& rng, std::size_t n) {
    CMat a = random_dense(rng, n, n);
    Eigen::HouseholderQR<CMat> qr(a);
    return qr.householderQ() * CMat::Identity(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
}

// Normal-form complex: d0 = diag(a, 0^q, 0^h), d1 = diag(0^p, b, 0^h),
// g = identity, optionally conjugated by independent unitaries per parity.
// Every spectral quantity is then known: B_0 has spectrum a + b + 0^h,
// C^0_+ carries diag(a), C^0_- carries diag(b) plus the h-dim kernel, and
// the refined torsion of an acyclic (h = 0) instance is
// (-1)^q prod(a) / prod(b).
struct ModelSpec {
    std::vector<Cx> a;
    std::vector<Cx> b;
    std::size_t h = 0;

    std::size_t dim() const { return a.size() + b.size() + h; }
};

struct Model {
    Z2Complex<NumPolicy> cx;
    Chirality<NumPolicy> gamma;
    ModelSpec spec;
};

Model make_model(const ModelSpec& ms, std::uint64_t seed, bool conjugate = true) {
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
    m.cx = make_z2complex<NumPolicy>(d0, d1, 1e-10);
    m.gamma = make_chirality(m.cx, g0, g1, 1e-10);
    m.spec = ms;
    return m;
}

Cx expected_acyclic_torsion(const ModelSpec& ms) {
    Cx t(1.0, 0.0);
    for (const auto& z : ms.a) t *= z;
    for (const auto& z : ms.b) t /= z;
    if (ms.b.size() % 2 == 1) t = -t;
    return t;
}

// The 2+2 anchor: d0 = diag(2, 0), d1 = diag(0, 3), g = I.  Acyclic;
// B_0 = B_1 = diag(2, 3); C^0_+ = span e1, C^0_- = span e2.
Model anchor22() { return make_model({{Cx(2.0, 0.0)}, {Cx(3.0, 0.0)}, 0}, 0, false); }

// The 1+1 anchor: d0 = (2), everything one-dimensional.
Model anchor11() { return make_model({{Cx(2.0, 0.0)}, {}, 0}, 0, false); }

} // namespace

TEST_CASE("signature blocks match hand assembly") {
    Model m = anchor11();
    SignatureData sig = build_signature(m.cx, m.gamma);
    CHECK(cx_close(sig.b0(0, 0), Cx(2.0, 0.0), 1e-14));
    CHECK(cx_close(sig.b1(0, 0), Cx(2.0, 0.0), 1e-14));

    // d = 0 gives B = 0.
    CMat z = CMat::Zero(2, 2);
    auto cx = make_z2complex<NumPolicy>(z, z);
    auto gam = make_chirality(cx, CMat(CMat::Identity(2, 2)), CMat(CMat::Identity(2, 2)));
    SignatureData zs = build_signature(cx, gam);
    CHECK(zs.b0.norm() == 0.0);
    CHECK(zs.b1.norm() == 0.0);

    // Conjugated model: B_0 similar to diag(a, b, 0^h); Gamma conjugation
    // already verified inside build_signature.
    Model r = make_model({{Cx(2.0, 1.0)}, {Cx(0.0, 3.0)}, 1}, 17);
    SignatureData rs = build_signature(r.cx, r.gamma);
    auto eigs = eigenvalues_of(rs.b0);
    std::sort(eigs.begin(), eigs.end(),
              [](const Cx& x, const Cx& y) { return std::abs(x) < std::abs(y); });
    CHECK(std::abs(eigs[0]) <= 1e-8);
    CHECK(cx_close(eigs[1], Cx(2.0, 1.0), 1e-8));
    CHECK(cx_close(eigs[2], Cx(0.0, 3.0), 1e-8));
}

TEST_CASE("pm_split dimensions, counts, and the chirality swap") {
    Model m = anchor11();
    SignatureData sig = build_signature(m.cx, m.gamma);
    PMSplit p0 = pm_split(sig, 0, 0);
    PMSplit p1 = pm_split(sig, 1, 0);
    CHECK(p0.plus_basis.cols() == 1);
    CHECK(p0.d_minus == 0);
    CHECK(p1.plus_basis.cols() == 0);
    CHECK(p1.d_minus == 1);
    CHECK(cx_close(p0.b_plus(0, 0), Cx(2.0, 0.0), 1e-12));
    CHECK(cx_close(p1.b_minus(0, 0), Cx(2.0, 0.0), 1e-12));

    Model a = anchor22();
    SignatureData s2 = build_signature(a.cx, a.gamma, {5.0});
    REQUIRE(s2.window_count() == 2);
    // window 0 holds |mu|^2 = 4 (the a-eigenvalue), window 1 holds 9.
    PMSplit w0p0 = pm_split(s2, 0, 0);
    PMSplit w0p1 = pm_split(s2, 1, 0);
    PMSplit w1p0 = pm_split(s2, 0, 1);
    PMSplit w1p1 = pm_split(s2, 1, 1);
    CHECK(w0p0.d_minus == 0);
    CHECK(w0p1.d_minus == 1);
    CHECK(w1p0.d_minus == 1);
    CHECK(w1p1.d_minus == 0);

    // Gamma maps C^k_+ onto C^{k+1}_-: the image must lie in the span.
    Model r = make_model({{Cx(2.0, 0.5), Cx(-1.0, 1.0)}, {Cx(3.0, -1.0)}, 0}, 23);
    SignatureData sr = build_signature(r.cx, r.gamma);
    PMSplit rp0 = pm_split(sr, 0, 0);
    PMSplit rp1 = pm_split(sr, 1, 0);
    CHECK_NOTHROW(solve_in_span(rp1.minus_basis, CMat(r.gamma.g0 * rp0.plus_basis), 1e-8));
    CHECK_NOTHROW(solve_in_span(rp0.minus_basis, CMat(r.gamma.g1 * rp1.plus_basis), 1e-8));
    CHECK(rp0.plus_basis.cols() + rp0.minus_basis.cols() == 3);
}

TEST_CASE("pm_split refuses windows containing zero") {
    Model m = make_model({{}, {}, 1}, 0, false); // 1+1 zero differential
    SignatureData sig = build_signature(m.cx, m.gamma);
    bool threw = false;
    try {
        pm_split(sig, 0, 0);
    } catch (const NumericalRefusal& e) {
        threw = std::string(e.what()).find("window contains 0") != std::string::npos;
    }
    CHECK(threw);
}

TEST_CASE("graded determinant anchors") {
    // 2+2 anchor: Det_gr = 2 / (-3).
    Model a = anchor22();
    SignatureData sig = build_signature(a.cx, a.gamma);
    TorsionScalar d = graded_det(sig, 0, -kPi / 2.0);
    CHECK(ts_close(d, TorsionScalar::from_complex(Cx(-2.0 / 3.0, 0.0)), 1e-12));

    // Equal spectra: Det(I)/Det(-I) = (-1)^dim.
    Model e1 = make_model({{Cx(2.0, 0.0)}, {Cx(2.0, 0.0)}, 0}, 0, false);
    SignatureData se1 = build_signature(e1.cx, e1.gamma);
    CHECK(ts_close(graded_det(se1, 0, -kPi / 2.0),
                   TorsionScalar::from_complex(Cx(-1.0, 0.0)), 1e-12));
    Model e2 = make_model({{Cx(3.0, 0.0), Cx(3.0, 0.0)}, {Cx(3.0, 0.0), Cx(3.0, 0.0)}, 0},
                          0, false);
    SignatureData se2 = build_signature(e2.cx, e2.gamma);
    CHECK(ts_close(graded_det(se2, 0, -kPi / 2.0),
                   TorsionScalar::from_complex(Cx(1.0, 0.0)), 1e-12));

    // 1+1 anchor: Det_gr = 2 (no minus spectrum on parity 0).
    Model m = anchor11();
    SignatureData sm = build_signature(m.cx, m.gamma);
    CHECK(ts_close(graded_det(sm, 0, -kPi / 2.0),
                   TorsionScalar::from_complex(Cx(2.0, 0.0)), 1e-12));
}

TEST_CASE("graded determinant is independent of the admissible angle") {
    SplitMix64 rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        ModelSpec ms;
        for (int i = 0; i < 2; ++i)
            ms.a.push_back(Cx(1.0 + rng.next_double(), rng.next_signed()));
        for (int i = 0; i < 2; ++i)
            ms.b.push_back(Cx(1.0 + rng.next_double(), rng.next_signed()));
        Model m = make_model(ms, 1000 + static_cast<std::uint64_t>(trial));
        SignatureData sig = build_signature(m.cx, m.gamma);

        std::vector<Cx> rel;
        for (const auto& z : ms.a) rel.push_back(z);
        for (const auto& z : ms.b) rel.push_back(-z);
        double t1 = choose_agmon_angle(rel, -kPi, 0.0).theta;
        double t2 = choose_agmon_angle(rel, -kPi, t1 - 1e-3).theta;
        TorsionScalar d1 = graded_det(sig, 0, t1);
        TorsionScalar d2 = graded_det(sig, 0, t2);
        CHECK(ts_close(d1, d2, 1e-10));
    }
}

TEST_CASE("eta invariant oracles") {
    CMat d1(3, 3);
    d1.setZero();
    d1(0, 0) = Cx(1.0, 0.0);
    d1(1, 1) = Cx(-2.0, 0.0);
    d1(2, 2) = Cx(0.0, 3.0);
    EtaResult e1 = eta_invariant(d1);
    CHECK(e1.eta0() == 0);
    CHECK(e1.m_plus == 1);
    CHECK(e1.m_minus == 0);
    CHECK(e1.m_zero == 0);
    CHECK(e1.eta() == doctest::Approx(0.5));
    CHECK_FALSE(e1.axis_warning);

    CMat d2(2, 2);
    d2.setZero();
    d2(0, 0) = Cx(1.0, 0.0);
    d2(1, 1) = Cx(2.0, 0.0);
    CHECK(eta_invariant(d2).eta() == doctest::Approx(1.0));

    CMat d3 = CMat::Zero(1, 1);
    EtaResult e3 = eta_invariant(d3);
    CHECK(e3.m_zero == 1);
    CHECK(e3.eta() == doctest::Approx(0.5));

    // eta(-D) = -eta(D) for invertible D: eta0 negates, m_plus/m_minus swap.
    std::vector<Cx> spec{Cx(1.0, 2.0), Cx(-3.0, 0.1), Cx(0.0, 5.0), Cx(0.0, -7.0),
                         Cx(4.0, 0.0)};
    EtaResult ep = eta_from_spectrum(spec);
    EtaResult en = eta_from_spectrum(negated(spec));
    CHECK(en.eta0() == -ep.eta0());
    CHECK(en.m_plus == ep.m_minus);
    CHECK(en.m_minus == ep.m_plus);
    CHECK(en.eta() == doctest::Approx(-ep.eta()));

    // Near-axis eigenvalue inside the warning band.
    EtaResult ew = eta_from_spectrum({Cx(1e-9, 1.0), Cx(2.0, 0.0)});
    CHECK(ew.axis_warning);
    CHECK(ew.positive == 2);
}

TEST_CASE("eta is additive over windows") {
    Model a = anchor22();
    SignatureData sig = build_signature(a.cx, a.gamma, {5.0});
    EtaResult full = eta_invariant(sig.b0);
    EtaResult low = eta_above(sig, 0);
    CHECK(full.eta() == doctest::Approx(1.0));
    CHECK(low.positive == full.positive);

    EtaResult w0 = eta_invariant(window_restrict(sig.split[0].windows[0], sig.b0, "t"));
    EtaResult w1 = eta_invariant(window_restrict(sig.split[0].windows[1], sig.b0, "t"));
    CHECK(w0.positive + w1.positive == full.positive);
    CHECK(w0.eta() + w1.eta() == doctest::Approx(full.eta()));

    Model r = make_model({{Cx(1.0, 0.2), Cx(-2.0, 0.4)}, {Cx(0.0, 3.0)}, 0}, 31);
    SignatureData sr = build_signature(r.cx, r.gamma, {2.0});
    EtaResult rf = eta_invariant(sr.b0);
    EtaResult r0 = eta_invariant(window_restrict(sr.split[0].windows[0], sr.b0, "t"));
    EtaResult r1 = eta_invariant(window_restrict(sr.split[0].windows[1], sr.b0, "t"));
    CHECK(r0.positive + r1.positive == rf.positive);
    CHECK(r0.negative + r1.negative == rf.negative);
    CHECK(r0.m_plus + r1.m_plus == rf.m_plus);
    CHECK(r0.m_minus + r1.m_minus == rf.m_minus);
    CHECK(r0.m_zero + r1.m_zero == rf.m_zero);
}

TEST_CASE("xi values") {
    // B+_0 = (2), B+_1 = (3), theta = -pi/2: xi = log(2/3), real.
    Model a = anchor22();
    SignatureData sig = build_signature(a.cx, a.gamma);
    Cx xi = xi_window(sig, 0, -kPi / 2.0);
    CHECK(std::abs(xi - Cx(std::log(2.0 / 3.0), 0.0)) <= 1e-12);

    Model e = make_model({{Cx(2.0, 0.0)}, {Cx(2.0, 0.0)}, 0}, 0, false);
    SignatureData se = build_signature(e.cx, e.gamma);
    CHECK(std::abs(xi_window(se, 0, -kPi / 2.0)) <= 1e-12);

    // Self-adjoint signature operator: xi is real.
    Model r = make_model({{Cx(1.5, 0.0), Cx(4.0, 0.0)}, {Cx(2.5, 0.0)}, 0}, 47);
    SignatureData sr = build_signature(r.cx, r.gamma);
    CHECK(std::abs(xi_window(sr, 0, -kPi / 2.0).imag()) <= 1e-10);
}

TEST_CASE("eta identity on the anchors") {
    // 2+2 anchor: spectrum {2, 3} gives theta = -pi/4 and
    // LDet_gr = log 2 - log 3 - i pi.
    Model a = anchor22();
    SignatureData sig = build_signature(a.cx, a.gamma);
    double theta = eta_identity_theta(signature_spectrum_above(sig, 0));
    CHECK(theta == doctest::Approx(-kPi / 4.0));
    EtaIdentity id = eta_identity_check(sig, 0, theta);
    CHECK(std::abs(id.lhs - Cx(std::log(2.0 / 3.0), -kPi)) <= 1e-12);
    CHECK(id.eta.eta() == doctest::Approx(1.0));
    CHECK(id.d_minus_alt == 0); // one b above, one a above: 1 - 1
    CHECK(id.residual <= 1e-12 * id.scale);

    // 1+1 anchor at lambda = 0: d^- over the full window is 0 - 1, so the
    // count term cancels the eta term and LDet_gr = log 2 exactly.
    Model m = anchor11();
    SignatureData sm = build_signature(m.cx, m.gamma);
    double tm = eta_identity_theta(signature_spectrum_above(sm, 0));
    EtaIdentity im = eta_identity_check(sm, 0, tm);
    CHECK(im.d_minus_alt == -1);
    CHECK(im.eta.eta() == doctest::Approx(0.5));
    CHECK(std::abs(im.lhs - Cx(std::log(2.0), 0.0)) <= 1e-12);
    CHECK(im.residual <= 1e-12 * im.scale);
}

TEST_CASE("eta identity on random complexes") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        // Eigenvalue directions kept outside (-pi/2, 0] and (pi/2, pi] so an
        // admissible angle exists; moduli kept away from each other.
        ModelSpec ms;
        int p = 1 + static_cast<int>(rng.next_below(3));
        int q = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < p; ++i) {
            double r = 1.0 + 3.0 * rng.next_double();
            double arg = 0.1 + 1.3 * rng.next_double(); // inside (0, pi/2)
            if (rng.next_below(2)) arg = -1.7 - 1.3 * rng.next_double(); // inside (-pi, -pi/2)
            ms.a.push_back(std::polar(r, arg));
        }
        for (int i = 0; i < q; ++i) {
            double r = 1.0 + 3.0 * rng.next_double();
            double arg = 0.1 + 1.3 * rng.next_double();
            if (rng.next_below(2)) arg = -1.7 - 1.3 * rng.next_double();
            ms.b.push_back(std::polar(r, arg));
        }
        Model m = make_model(ms, 500 + static_cast<std::uint64_t>(trial));
        SignatureData sig = build_signature(m.cx, m.gamma);
        double theta = eta_identity_theta(signature_spectrum_above(sig, 0));
        EtaIdentity id = eta_identity_check(sig, 0, theta);
        CHECK(id.residual <= 1e-9 * id.scale);
    }
}

TEST_CASE("eta identity rejects an angle violating the sector hypothesis") {
    // Spectrum with an eigenvalue direction at -pi/8: theta = -pi/16 puts it
    // inside (-pi/2, theta].
    Model m = make_model({{std::polar(2.0, -kPi / 8.0)}, {Cx(3.0, 0.0)}, 0}, 3);
    SignatureData sig = build_signature(m.cx, m.gamma);
    CHECK_THROWS_AS(eta_identity_check(sig, 0, -kPi / 16.0), NumericalRefusal);
    double theta = eta_identity_theta(signature_spectrum_above(sig, 0));
    CHECK(theta < -kPi / 8.0);
    CHECK(eta_identity_check(sig, 0, theta).residual <= 1e-10);
}

TEST_CASE("alternating d-minus count below the cut matches the window dimension parity") {
    Model a = anchor22();
    SignatureData sig = build_signature(a.cx, a.gamma, {5.0});
    long alt = d_minus_alternating(sig, 0, 1);
    CHECK(alt == -1);
    long dim_small = static_cast<long>(sig.split[0].windows[0].dim());
    CHECK(((alt % 2 + 2) % 2) == (dim_small % 2));

    SplitMix64 rng(13);
    for (int trial = 0; trial < 8; ++trial) {
        ModelSpec ms;
        int p = 1 + static_cast<int>(rng.next_below(3));
        int q = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < p; ++i) ms.a.push_back(Cx(1.0 + rng.next_double(), rng.next_signed()));
        for (int i = 0; i < q; ++i)
            ms.b.push_back(Cx(-3.0 - rng.next_double(), rng.next_signed()));
        Model m = make_model(ms, 700 + static_cast<std::uint64_t>(trial));
        // Cut between the two modulus clusters: |a|^2 < 7 < |b|^2.
        SignatureData s = build_signature(m.cx, m.gamma, {7.0});
        long d = d_minus_alternating(s, 0, 1);
        long dim0 = static_cast<long>(s.split[0].windows[0].dim());
        CHECK(((d % 2 + 2) % 2) == (dim0 % 2));
    }
}

TEST_CASE("rho_h at lambda zero is the refined torsion") {
    Model m = anchor11();
    RhoResult r = rho_h(m.cx, m.gamma, 0.0, -kPi / 2.0);
    CHECK(ts_close(r.coeff, TorsionScalar::from_complex(Cx(2.0, 0.0)), 1e-12));
    CHECK(r.h0 == 0);

    SplitMix64 rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        ModelSpec ms;
        int p = 1 + static_cast<int>(rng.next_below(3));
        int q = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < p; ++i)
            ms.a.push_back(Cx(1.0 + rng.next_double(), rng.next_signed()));
        for (int i = 0; i < q; ++i)
            ms.b.push_back(Cx(1.0 + rng.next_double(), rng.next_signed()));
        Model m2 = make_model(ms, 900 + static_cast<std::uint64_t>(trial));

        std::vector<Cx> rel;
        for (const auto& z : ms.a) rel.push_back(z);
        for (const auto& z : ms.b) rel.push_back(-z);
        double theta = choose_agmon_angle(rel, -kPi, 0.0).theta;

        RhoResult rr = rho_h(m2.cx, m2.gamma, 0.0, theta);
        Cx rho = refined_torsion(m2.cx, m2.gamma).coeff;
        CHECK(ts_close(rr.coeff, TorsionScalar::from_complex(rho), 1e-9));
        // Closed form for the conjugated normal form.
        CHECK(cx_close(rho, expected_acyclic_torsion(ms), 1e-9));
    }
}

TEST_CASE("rho_h on a zero differential is the refined torsion of the whole complex") {
    SplitMix64 rng(41);
    CMat z = CMat::Zero(3, 3);
    CMat u0 = random_unitary(rng, 3), u1 = random_unitary(rng, 3);
    auto cx = make_z2complex<NumPolicy>(z, z);
    auto gam = make_chirality(cx, CMat(u1 * u0.adjoint()), CMat(u0 * u1.adjoint()));
    RhoResult r = rho_h(cx, gam, 1.0, -kPi / 2.0);
    Cx rho = refined_torsion(cx, gam).coeff;
    CHECK(r.h0 == 3);
    CHECK(r.h1 == 3);
    CHECK(ts_close(r.coeff, TorsionScalar::from_complex(rho), 1e-10));
}

TEST_CASE("rho_h is independent of the spectral cut") {
    SplitMix64 rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        // Moduli^2 clusters near 1, 16, 81; cohomology dim 1 per parity.
        ModelSpec ms;
        ms.a = {std::polar(1.0 + 0.05 * rng.next_signed(), 0.3 * rng.next_signed()),
                std::polar(4.0 + 0.1 * rng.next_signed(), 0.3 * rng.next_signed())};
        ms.b = {std::polar(9.0 + 0.1 * rng.next_signed(), 0.3 * rng.next_signed()),
                std::polar(4.0 + 0.1 * rng.next_signed(), 0.3 * rng.next_signed())};
        ms.h = 1;
        Model m = make_model(ms, 1200 + static_cast<std::uint64_t>(trial));

        std::vector<Cx> rel;
        for (const auto& z : ms.a) rel.push_back(z);
        for (const auto& z : ms.b) rel.push_back(-z);
        double theta = choose_agmon_angle(rel, -kPi, 0.0).theta;

        RhoResult r1 = rho_h(m.cx, m.gamma, 2.0, theta);   // below every cluster
        RhoResult r2 = rho_h(m.cx, m.gamma, 40.0, theta);  // between 16 and 81
        RhoResult r3 = rho_h(m.cx, m.gamma, 300.0, theta); // above everything
        CHECK(ts_close(r1.coeff, r2.coeff, 1e-8));
        CHECK(ts_close(r2.coeff, r3.coeff, 1e-8));
        // Straddling one cluster from both sides.
        RhoResult r4 = rho_h(m.cx, m.gamma, 10.0, theta);
        CHECK(ts_close(r1.coeff, r4.coeff, 1e-8));
    }
}

TEST_CASE("graded determinant is multiplicative over adjacent windows") {
    SplitMix64 rng(67);
    for (int trial = 0; trial < 8; ++trial) {
        ModelSpec ms;
        ms.a = {std::polar(1.0, 0.2 * rng.next_signed()),
                std::polar(5.0, 0.2 * rng.next_signed())};
        ms.b = {std::polar(3.0, 0.2 * rng.next_signed()),
                std::polar(7.0, 0.2 * rng.next_signed())};
        Model m = make_model(ms, 1400 + static_cast<std::uint64_t>(trial));

        std::vector<Cx> rel;
        for (const auto& z : ms.a) rel.push_back(z);
        for (const auto& z : ms.b) rel.push_back(-z);
        double theta = choose_agmon_angle(rel, -kPi, 0.0).theta;

        // One split at 4: Det_gr over (4, inf); finer split at 4 and 30.
        SignatureData coarse = build_signature(m.cx, m.gamma, {4.0});
        SignatureData fine = build_signature(m.cx, m.gamma, {4.0, 30.0});
        TorsionScalar whole = graded_det_above(coarse, 1, theta);
        TorsionScalar prod = graded_det(fine, 1, theta) * graded_det(fine, 2, theta);
        CHECK(ts_close(whole, prod, 1e-9));
    }
}

TEST_CASE("rho_an applies the trivial-eta phase") {
    Model m = anchor11();
    RhoResult base = rho_h(m.cx, m.gamma, 0.0, -kPi / 2.0);
    RhoResult same = rho_an(m.cx, m.gamma, 0.0, -kPi / 2.0, 0.0, 1);
    CHECK(ts_close(base.coeff, same.coeff, 1e-14));

    RhoResult one = rho_an(m.cx, m.gamma, 0.0, -kPi / 2.0, -0.5, 1);
    CHECK(one.coeff.phase ==
          doctest::Approx(TorsionScalar::wrap(base.coeff.phase - kPi / 2.0)));
    RhoResult two = rho_an(m.cx, m.gamma, 0.0, -kPi / 2.0, -0.5, 2);
    CHECK(two.coeff.phase ==
          doctest::Approx(TorsionScalar::wrap(base.coeff.phase - kPi)));
}

TEST_CASE("flux deformation: zero beta gives zero residuals") {
    Model m = make_model({{Cx(2.0, 0.3)}, {Cx(3.0, -0.2)}, 1}, 77);
    std::size_t n = m.spec.dim();
    CMat z = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    FluxVariation fv =
        flux_variation_check(m.cx, m.gamma, z, z, 1.0, -kPi / 2.0, 1e-3);
    CHECK(fv.residual_xi <= 1e-11);
    CHECK(fv.residual_rho <= 1e-11);
    CHECK(fv.residual_combined <= 1e-11);
    CHECK(fv.discrepancy <= 1e-12);
}

TEST_CASE("flux deformation: residual structure and the window-convention discrepancy") {
    SplitMix64 rng(83);
    Model m = make_model({{Cx(1.2, 0.4), Cx(-2.0, 0.5)}, {Cx(3.0, -0.3)}, 1}, 85);
    std::size_t n = m.spec.dim();
    CMat b0 = 0.5 * random_dense(rng, n, n);
    CMat b1 = 0.5 * random_dense(rng, n, n);

    double lambda = 3.0; // between |1.2+0.4i|^2 ~ 1.6 and |2-0.5i|^2 ~ 4.25
    double theta = -kPi / 2.0 + 0.2;

    FluxVariation f2 = flux_variation_check(m.cx, m.gamma, b0, b1, lambda, theta, 1e-2);
    FluxVariation f3 = flux_variation_check(m.cx, m.gamma, b0, b1, lambda, theta, 1e-3);

    // (i) and (ii) are quadratic in the step.
    CHECK(f2.residual_xi <= 1e-2 * f2.scale);
    CHECK(f3.residual_xi <= 1e-4 * f3.scale);
    if (f3.residual_xi > 1e-9 * f3.scale) {
        double ratio = f2.residual_xi / f3.residual_xi;
        CHECK(ratio > 20.0);
        CHECK(ratio < 500.0);
    }
    CHECK(f3.residual_rho <= 1e-4 * f3.scale);

    // (iii) the combined object is an exact exponential in v.
    CHECK(f2.residual_combined <= 1e-8 * f2.scale);
    CHECK(f3.residual_combined <= 1e-8 * f3.scale);

    // Closed-setting window convention differs by exactly the supertrace.
    CHECK(f3.discrepancy <= 1e-10 * f3.scale);
    Cx closed_gap = (f3.dxi_dv - f3.trace_small) - (f3.dxi_dv + f3.trace_big);
    CHECK(std::abs(closed_gap + f3.supertrace) <= 1e-10 * f3.scale);
}

TEST_CASE("flux deformation: supertraceless beta leaves the combined object constant") {
    SplitMix64 rng(97);
    Model m = make_model({{Cx(1.5, 0.2)}, {Cx(2.5, -0.4)}, 1}, 99);
    std::size_t n = m.spec.dim();
    CMat b0 = 0.4 * random_dense(rng, n, n);
    CMat b1 = 0.4 * random_dense(rng, n, n);
    // Make the supertrace vanish without making either block traceless.
    Cx gap = (b0.trace() - b1.trace()) / static_cast<double>(n);
    b0 -= gap * CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    double theta = -kPi / 2.0 + 0.15;
    Decomposition<NumPolicy> dec0 = decompose(m.cx);
    FluxSample s0 = flux_sample(m.cx, m.gamma, b0, b1, 1.5, theta, 0.0, dec0);
    FluxSample s1 = flux_sample(m.cx, m.gamma, b0, b1, 1.5, theta, 0.25, dec0);
    FluxSample s2 = flux_sample(m.cx, m.gamma, b0, b1, 1.5, theta, -0.35, dec0);
    CHECK(ts_close(s0.combined, s1.combined, 1e-8));
    CHECK(ts_close(s0.combined, s2.combined, 1e-8));

    // beta = identity on both parities is supertraceless when n0 = n1.
    CMat id = CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    FluxVariation fi = flux_variation_check(m.cx, m.gamma, id, id, 1.5, theta, 1e-3);
    CHECK(std::abs(fi.supertrace) <= 1e-14);
    CHECK(fi.residual_combined <= 1e-9 * fi.scale);

    // Nonzero supertrace: the measured drift equals minus the supertrace.
    CMat zz = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    FluxVariation fd = flux_variation_check(m.cx, m.gamma, id, zz, 1.5, theta, 1e-3);
    CHECK(cx_close(fd.dlog_combined, Cx(-static_cast<double>(n), 0.0), 1e-6));
    CHECK(fd.residual_combined <= 1e-8 * fd.scale);
}

TEST_CASE("flux deformation reports window collisions") {
    // Scaling beta drives |a|^2 = 4 exactly onto the cut 4.5 at v = h.
    Model a = anchor22();
    double h = 0.1;
    double c = std::log(4.5 / 4.0) / (4.0 * h);
    CMat b0(2, 2), b1(2, 2);
    b0.setZero();
    b1.setZero();
    b0(0, 0) = Cx(-c, 0.0);
    b1(0, 0) = Cx(c, 0.0);
    bool threw = false;
    try {
        flux_variation_check(a.cx, a.gamma, b0, b1, 4.5, -kPi / 2.0, h);
    } catch (const NumericalRefusal& e) {
        threw = std::string(e.what()).find("window collision during deformation") !=
                std::string::npos;
    }
    CHECK(threw);
}
