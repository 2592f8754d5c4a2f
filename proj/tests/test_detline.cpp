#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>

#include "torsionlab/detline.hpp"
#include "torsionlab/policy.hpp"

using namespace torsionlab;

namespace {

template <class P>
typename P::Scalar sc(long re, long im = 0) {
    if constexpr (P::exact)
        return GQ(mpq_class(re), mpq_class(im));
    else
        return Cx(static_cast<double>(re), static_cast<double>(im));
}

template <class P>
bool close(const typename P::Scalar& a, const typename P::Scalar& b) {
    return P::scalar_close(a, b, 1e-12);
}

} // namespace

TEST_CASE("sign exponents") {
    CHECK(sign_N(0, 0) == 0);
    CHECK(sign_N(1, 1) == 1);
    CHECK(sign_N(2, 2) == 0);
    CHECK(sign_N(1, 0) == 1);
    CHECK(sign_N(0, 1) == 0);
    CHECK(sign_N(2, 1) == 1);
    CHECK(sign_N(1, 2) == 0);

    CHECK(sign_R(0) == 0);
    CHECK(sign_R(1) == 1);
    CHECK(sign_R(2) == 1);
    CHECK(sign_R(3) == 0);
    CHECK(sign_R(4) == 0);

    CHECK(sign_M(2, 3) == 0);
    CHECK(sign_M(1, 1) == 1);

    CHECK(swap_sign(1, 1) == -1);
    CHECK(swap_sign(2, 1) == 1);

    // the combined exponent vanishes identically
    for (std::size_t p = 0; p <= 6; ++p)
        for (std::size_t q = 0; q <= 6; ++q) CHECK(sign_F(p, q) == 0);
}

TEST_CASE("direct sum congruence of the canonical-isomorphism exponents") {
    // For complexes with dim C^k = dim A^k + dim A^{k+1} + dim H^k and even
    // total cohomology on each summand:
    //   N(A + A~) + N(A) + N(A~) + M(C, C~) + M(H, H~)
    //     = sum_k (A^k A~^{k+1} + H^k A~^{k+1} + A^k H~^k)   mod 2.
    auto loop = [](auto&& body) {
        for (std::size_t a0 = 0; a0 <= 3; ++a0)
            for (std::size_t a1 = 0; a1 <= 3; ++a1)
                for (std::size_t h0 = 0; h0 <= 3; ++h0)
                    for (std::size_t h1 = 0; h1 <= 3; ++h1) body(a0, a1, h0, h1);
    };
    loop([&](std::size_t a0, std::size_t a1, std::size_t h0, std::size_t h1) {
        if ((h0 + h1) % 2) return;
        loop([&](std::size_t b0, std::size_t b1, std::size_t k0, std::size_t k1) {
            if ((k0 + k1) % 2) return;
            std::size_t c1 = a1 + a0 + h1;  // dim C^1
            std::size_t d0 = b0 + b1 + k0;  // dim C~^0
            std::size_t lhs = static_cast<std::size_t>(sign_N(a0 + b0, a1 + b1)) +
                              static_cast<std::size_t>(sign_N(a0, a1)) +
                              static_cast<std::size_t>(sign_N(b0, b1)) +
                              static_cast<std::size_t>(sign_M(c1, d0)) +
                              static_cast<std::size_t>(sign_M(h1, k0));
            std::size_t rhs = a0 * b1 + h0 * b1 + a0 * k0 + a1 * b0 + h1 * b0 + a1 * k1;
            REQUIRE((lhs + rhs) % 2 == 0);
        });
    });
}

TEST_CASE_TEMPLATE("fusion is multiplicative", P, ExactPolicy, NumPolicy) {
    auto v = make_line_element<P>("V", 2, sc<P>(2));
    auto w = make_line_element<P>("W", 3, sc<P>(3));
    auto f = fuse(v, w);
    CHECK(close<P>(f.coeff, sc<P>(6)));
    CHECK(f.word[0].dim == 5);
    CHECK(f.word[0].exp == 1);

    auto vi = inverse_element(v);
    auto wi = inverse_element(w);
    auto fi = fuse_inverse(vi, wi);
    CHECK(close<P>(fi.coeff, typename P::Scalar(1) / sc<P>(6)));
    CHECK(fi.word[0].exp == -1);

    CHECK_THROWS_AS(fuse(v, wi), ConfigError);
    auto zero = make_line_element<P>("Z", 1, sc<P>(0));
    CHECK_THROWS_AS(inverse_element(zero), ConfigError);
}

TEST_CASE_TEMPLATE("graded fusion sign", P, ExactPolicy, NumPolicy) {
    // sign (-1)^{dim C1_x * dim C0_y}
    auto x11 = make_graded_element<P>("X0", 1, "X1", 1, sc<P>(1));
    auto y11 = make_graded_element<P>("Y0", 1, "Y1", 1, sc<P>(1));
    auto f = fuse_graded(x11, y11);
    CHECK(close<P>(f.coeff, sc<P>(-1)));
    CHECK(f.word[0].dim == 2);
    CHECK(f.word[1].dim == 2);

    auto x12 = make_graded_element<P>("X0", 1, "X1", 2, sc<P>(1));
    auto g = fuse_graded(x12, y11);
    CHECK(close<P>(g.coeff, sc<P>(1)));

    // coefficients multiply under the sign
    auto a = make_graded_element<P>("A0", 1, "A1", 1, sc<P>(2));
    auto b = make_graded_element<P>("B0", 1, "B1", 1, sc<P>(3));
    CHECK(close<P>(fuse_graded(a, b).coeff, sc<P>(-6)));
}

TEST_CASE_TEMPLATE("alpha and beta on a line", P, ExactPolicy, NumPolicy) {
    // alpha: Det(V*) -> Det(V)^{-1} conjugates the coordinate
    auto xs = make_line_element<P>("V", 1, sc<P>(0, 2), /*dual=*/true);
    auto ax = alpha_line(xs);
    CHECK(close<P>(ax.coeff, sc<P>(0, -2)));
    CHECK(ax.word[0].exp == -1);
    CHECK_FALSE(ax.word[0].dual);

    // alpha^{-1} undoes it
    auto back = alpha_line_inv(ax);
    CHECK(close<P>(back.coeff, xs.coeff));
    CHECK(back.word[0].dual);
    CHECK(back.word[0].exp == 1);

    // beta on dim 1: coefficient -tau(z)
    auto v = make_line_element<P>("V", 1, sc<P>(1));
    auto bv = beta_line(v);
    CHECK(close<P>(bv.coeff, sc<P>(-1)));
    CHECK(bv.word[0].dual);
    CHECK(bv.word[0].exp == -1);

    // beta on even dimension keeps the sign
    auto w = make_line_element<P>("W", 2, sc<P>(0, 1));
    CHECK(close<P>(beta_line(w).coeff, sc<P>(0, -1)));
}

TEST_CASE_TEMPLATE("alpha on graded words", P, ExactPolicy, NumPolicy) {
    auto x = make_graded_element<P>("V0", 1, "V1", 1, sc<P>(1));
    auto a = alpha_graded(x);
    CHECK(close<P>(a.coeff, sc<P>(-1)));
    CHECK(a.word[0].space == "V1");
    CHECK(a.word[0].exp == 1);
    CHECK(a.word[1].space == "V0");
    CHECK(a.word[1].exp == -1);

    // slot-by-slot route differs by (-1)^{dim V0}
    auto s = alpha_graded_slotwise(x);
    CHECK(close<P>(s.coeff, sc<P>(1)));
    auto x2 = make_graded_element<P>("V0", 2, "V1", 1, sc<P>(1));
    CHECK(close<P>(alpha_graded(x2).coeff, alpha_graded_slotwise(x2).coeff));

    // conjugation of the coordinate
    auto xi = make_graded_element<P>("V0", 2, "V1", 2, sc<P>(0, 1));
    CHECK(close<P>(alpha_graded(xi).coeff, sc<P>(0, -1)));
}

TEST_CASE("adjoint transport is the identity on coordinates (float)") {
    CMat t(2, 2);
    t << Cx(1, 1), Cx(0, 2), Cx(3, 0), Cx(1, -1);
    auto v = make_line_element<NumPolicy>("V", 2, Cx(2.0, -1.0));
    Cx r = adjoint_transport<NumPolicy>(t, v);
    CHECK(std::abs(r - Cx(1, 0)) < 1e-12);
}

TEST_CASE("adjoint transport is the identity on coordinates (exact)") {
    QMat t = QMat::zero(2, 2);
    t(0, 0) = GQ(mpq_class(1), mpq_class(1));
    t(0, 1) = GQ(mpq_class(0), mpq_class(2));
    t(1, 0) = GQ(3);
    t(1, 1) = GQ(mpq_class(1), mpq_class(-1));
    auto v = make_line_element<ExactPolicy>("V", 2, GQ(mpq_class(2), mpq_class(-1)));
    GQ r = adjoint_transport<ExactPolicy>(t, v);
    CHECK(r == GQ(1));
    // singular maps are rejected
    QMat z = QMat::zero(2, 2);
    CHECK_THROWS_AS(adjoint_transport<ExactPolicy>(z, v), ConfigError);
}
