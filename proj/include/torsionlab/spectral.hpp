#pragma once

// Spectral windows, branch logarithms, Agmon angles.
//
// Operators here are general (non-normal) complex matrices, so eigenspaces
// may be defective.  All window extraction therefore works with Schur
// forms: a window's invariant subspace is read off an orthonormal Schur
// basis after reordering the selected eigenvalues to the front with
// unitary adjacent swaps; no eigenvector of a possibly-defective cluster
// is ever formed.
//
// Windows partition the spectrum by eigenvalue modulus relative to a cut
// list 0 < c_1 < ... < c_r:  [0, c_1], (c_1, c_2], ..., (c_r, inf).  A cut
// falling inside an eigenvalue cluster (within rel_tol * spectral radius
// of some eigenvalue) is refused rather than resolved arbitrarily.
//
// Branch logarithm: ldet_theta(A) = sum over eigenvalues of
// log|mu| + i arg(mu) with arg taken in (theta, theta + 2 pi).  The angle
// theta is admissible when no eigenvalue lies on the cut ray.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "torsionlab/errors.hpp"
#include "torsionlab/numeric.hpp"

namespace torsionlab {

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Schur reordering.

// Swap the eigenvalues at positions p, p+1 of the upper-triangular t by a
// unitary similarity, updating u accordingly.
inline void swap_adjacent_schur(CMat& t, CMat& u, Eigen::Index p) {
    const Eigen::Index n = t.rows();
    Cx t11 = t(p, p), t22 = t(p + 1, p + 1), t12 = t(p, p + 1);
    double nv = std::sqrt(std::norm(t12) + std::norm(t22 - t11));
    if (nv == 0.0) return; // equal eigenvalues, no coupling: nothing to move
    Cx v1 = t12 / nv, v2 = (t22 - t11) / nv;
    Eigen::Matrix2cd g;
    g << v1, -std::conj(v2), v2, std::conj(v1);
    t.block(p, 0, 2, n) = (g.adjoint() * t.block(p, 0, 2, n)).eval();
    t.block(0, p, n, 2) = (t.block(0, p, n, 2) * g).eval();
    u.block(0, p, u.rows(), 2) = (u.block(0, p, u.rows(), 2) * g).eval();
    t(p + 1, p) = Cx(0.0, 0.0);
}

// Stable reorder moving the selected diagonal positions to the front.
inline void reorder_selected_to_front(CMat& t, CMat& u, std::vector<char> sel) {
    const Eigen::Index n = t.rows();
    Eigen::Index target = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!sel[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index k = i; k > target; --k) {
            swap_adjacent_schur(t, u, k - 1);
            std::swap(sel[static_cast<std::size_t>(k - 1)], sel[static_cast<std::size_t>(k)]);
        }
        ++target;
    }
}

// ---------------------------------------------------------------------------
// Modulus windows.

struct SpectralWindow {
    double lo = 0.0;        // left endpoint of the modulus interval
    double hi = 0.0;        // right endpoint (ignored when unbounded)
    bool includes_zero = false; // first window [0, c_1] is closed at 0
    bool unbounded = false;     // last window (c_r, inf)
    std::vector<Cx> eigenvalues; // eigenvalues of the original operator here
    CMat basis;      // n x m, orthonormal, invariant under the operator
    CMat restricted; // m x m upper triangular: the operator on the window

    bool contains(double modulus) const {
        bool above = includes_zero ? modulus >= lo : modulus > lo;
        bool below = unbounded ? true : modulus <= hi;
        return above && below;
    }
    std::size_t dim() const { return static_cast<std::size_t>(basis.cols()); }
};

struct SpectralSplit {
    std::vector<double> cuts;
    std::vector<SpectralWindow> windows;
    CMat assembled; // hcat of window bases; invertible, not unitary in general

    std::size_t total_dim() const { return static_cast<std::size_t>(assembled.rows()); }
};

inline std::vector<Cx> eigenvalues_of(const CMat& a) {
    if (a.rows() != a.cols()) throw ConfigError("eigenvalues_of: not square");
    if (a.rows() == 0) return {};
    Eigen::ComplexSchur<CMat> schur(a, /*computeU=*/false);
    if (schur.info() != Eigen::Success) throw NumericalRefusal("Schur decomposition failed");
    std::vector<Cx> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        out[static_cast<std::size_t>(i)] = schur.matrixT()(i, i);
    return out;
}

// Partition the spectrum of a by eigenvalue modulus.  cuts must be strictly
// increasing and positive.  Refuses when a cut passes within
// rel_tol * spectral_radius of an eigenvalue modulus (cut through cluster).
inline SpectralSplit split_by_modulus(const CMat& a, std::vector<double> cuts,
                                      double rel_tol = 1e-8) {
    if (a.rows() != a.cols()) throw ConfigError("split_by_modulus: not square");
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (cuts[i] <= 0.0) throw ConfigError("split_by_modulus: cuts must be positive");
        if (i > 0 && cuts[i] <= cuts[i - 1])
            throw ConfigError("split_by_modulus: cuts must be strictly increasing");
    }
    const Eigen::Index n = a.rows();
    SpectralSplit out;
    out.cuts = cuts;

    CMat t0, u0;
    std::vector<Cx> eigs;
    if (n > 0) {
        Eigen::ComplexSchur<CMat> schur(a, /*computeU=*/true);
        if (schur.info() != Eigen::Success) throw NumericalRefusal("Schur decomposition failed");
        t0 = schur.matrixT();
        u0 = schur.matrixU();
        for (Eigen::Index i = 0; i < n; ++i) eigs.push_back(t0(i, i));
    }

    double radius = 0.0;
    for (const auto& z : eigs) radius = std::max(radius, std::abs(z));
    double guard = rel_tol * radius;
    for (const auto& z : eigs)
        for (double c : cuts)
            if (std::abs(std::abs(z) - c) <= guard)
                throw NumericalRefusal(
                    "spectral cut through eigenvalue cluster: |eigenvalue| = " +
                    std::to_string(std::abs(z)) + " vs cut " + std::to_string(c));

    const std::size_t nw = cuts.size() + 1;
    std::size_t total = 0;
    for (std::size_t w = 0; w < nw; ++w) {
        SpectralWindow win;
        win.includes_zero = (w == 0);
        win.lo = (w == 0) ? 0.0 : cuts[w - 1];
        win.unbounded = (w + 1 == nw);
        win.hi = win.unbounded ? 0.0 : cuts[w];

        std::vector<char> sel(static_cast<std::size_t>(n), 0);
        Eigen::Index m = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (win.contains(std::abs(eigs[static_cast<std::size_t>(i)]))) {
                sel[static_cast<std::size_t>(i)] = 1;
                win.eigenvalues.push_back(eigs[static_cast<std::size_t>(i)]);
                ++m;
            }
        }
        if (n > 0) {
            CMat t = t0, u = u0;
            reorder_selected_to_front(t, u, sel);
            win.basis = u.leftCols(m);
            win.restricted = t.topLeftCorner(m, m);
        } else {
            win.basis = CMat(0, 0);
            win.restricted = CMat(0, 0);
        }
        total += win.dim();
        out.windows.push_back(std::move(win));
    }
    if (total != static_cast<std::size_t>(n))
        throw NumericalRefusal("split_by_modulus: window dimensions do not sum");

    out.assembled = CMat(n, n);
    Eigen::Index col = 0;
    for (const auto& w : out.windows) {
        out.assembled.middleCols(col, w.basis.cols()) = w.basis;
        col += w.basis.cols();
    }
    return out;
}

// Trace of m compressed to window w of the split (diagonal block of
// S^{-1} m S where S assembles all window bases).
inline Cx window_trace(const SpectralSplit& split, const CMat& m, std::size_t w) {
    if (w >= split.windows.size()) throw ConfigError("window_trace: bad window index");
    const Eigen::Index n = split.assembled.rows();
    if (m.rows() != n || m.cols() != n) throw ConfigError("window_trace: shape mismatch");
    CMat x = split.assembled.partialPivLu().solve(m * split.assembled);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < w; ++i) off += split.windows[i].basis.cols();
    Eigen::Index d = split.windows[w].basis.cols();
    return x.block(off, off, d, d).trace();
}

// ---------------------------------------------------------------------------
// Branch logarithms.

// arg(mu) normalized into (theta, theta + 2 pi).
inline double arg_in_branch(const Cx& mu, double theta) {
    double a = std::arg(mu);
    while (a <= theta) a += 2.0 * kPi;
    while (a > theta + 2.0 * kPi) a -= 2.0 * kPi;
    return a;
}

// Sum of branch logs over a finite spectrum; refuses on singular input or
// when an eigenvalue sits on the cut ray through angle theta.
inline Cx ldet_branch(const std::vector<Cx>& spectrum, double theta, double cut_tol = 1e-10) {
    Cx out(0.0, 0.0);
    for (const auto& mu : spectrum) {
        double m = std::abs(mu);
        if (m == 0.0) throw NumericalRefusal("ldet_branch: singular operator");
        double a = arg_in_branch(mu, theta);
        double dist = std::min(a - theta, theta + 2.0 * kPi - a);
        if (dist <= cut_tol)
            throw NumericalRefusal("ldet_branch: spectrum on the branch cut");
        out += Cx(std::log(m), a);
    }
    return out;
}

inline Cx ldet_branch(const CMat& a, double theta, double cut_tol = 1e-10) {
    return ldet_branch(eigenvalues_of(a), theta, cut_tol);
}

// ---------------------------------------------------------------------------
// Agmon angle selection.

struct AngleChoice {
    double theta = -kPi / 2.0; // chosen angle
    double clearance = 0.0;    // angular distance (mod pi) to the nearest
                               // eigenvalue direction
};

inline double direction_distance(double x, double y) {
    double d = std::fmod(std::abs(x - y), kPi);
    return std::min(d, kPi - d);
}

// Choose an angle in the open sector (sector_lo, sector_hi), maximizing the
// distance mod pi to all eigenvalue directions of the given spectra.  Both
// theta and theta + pi must avoid the spectrum, hence the mod-pi geometry.
// Deterministic: candidates are gap midpoints (in sorted order) and pulled-in
// sector endpoints; first best wins.
inline AngleChoice choose_agmon_angle(const std::vector<Cx>& spectrum,
                                      double sector_lo = -kPi, double sector_hi = 0.0,
                                      double min_clearance = 1e-9) {
    if (!(sector_lo < sector_hi)) throw ConfigError("choose_agmon_angle: empty sector");

    std::vector<double> dirs;
    for (const auto& mu : spectrum) {
        if (std::abs(mu) == 0.0)
            throw NumericalRefusal("choose_agmon_angle: zero eigenvalue has no direction");
        double d = std::fmod(std::arg(mu), kPi);
        if (d < 0.0) d += kPi;
        dirs.push_back(d);
    }
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());

    std::vector<double> candidates;
    auto push_if_inside = [&](double t) {
        if (t > sector_lo && t < sector_hi) candidates.push_back(t);
    };

    if (dirs.empty()) {
        candidates.push_back(0.5 * (sector_lo + sector_hi));
    } else {
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            double a = dirs[i];
            double b = (i + 1 < dirs.size()) ? dirs[i + 1] : dirs[0] + kPi;
            double mid = std::fmod(0.5 * (a + b), kPi);
            // all representatives of the direction `mid` near the sector
            for (int k = -2; k <= 2; ++k) push_if_inside(mid + k * kPi);
        }
        for (double e : {sector_lo, sector_hi}) {
            double de = kPi / 2.0;
            for (double d : dirs) de = std::min(de, direction_distance(e, d));
            double pull = 0.5 * std::min(de, sector_hi - sector_lo);
            push_if_inside(e == sector_lo ? e + pull : e - pull);
        }
    }

    AngleChoice best;
    bool have = false;
    for (double t : candidates) {
        double cl = kPi / 2.0;
        for (double d : dirs) cl = std::min(cl, direction_distance(t, d));
        if (!have || cl > best.clearance) {
            best.theta = t;
            best.clearance = cl;
            have = true;
        }
    }
    if (!have || best.clearance <= min_clearance)
        throw NumericalRefusal("no admissible Agmon angle in the sector");
    return best;
}

// The angle with mirrored admissibility: eigenvalue directions of the
// conjugate spectrum are the reflections of the original, so the mirrored
// angle is admissible exactly when the original is.
inline double mirror_angle(double theta) { return -theta - kPi; }

// Monic characteristic polynomial coefficients from roots (test helper):
// returns c_0..c_n with p(x) = sum c_k x^k, c_n = 1.
inline std::vector<Cx> charpoly_from_roots(const std::vector<Cx>& roots) {
    std::vector<Cx> c{Cx(1.0, 0.0)};
    for (const auto& r : roots) {
        std::vector<Cx> next(c.size() + 1, Cx(0.0, 0.0));
        for (std::size_t k = 0; k < c.size(); ++k) {
            next[k + 1] += c[k];
            next[k] -= r * c[k];
        }
        c = std::move(next);
    }
    return c;
}

} // namespace torsionlab
