// torsionlab: command-line driver for the refined-torsion laboratory.
//
// Commands
//   verify   identity suites: exact sign/fusion laws, float spectral laws
//   torsion  full report for one abstract model
//   torus    assembled + per-mode report for the truncated torus model
//   deform   metric or flux deformation experiments along a parameter grid
//   dual     duality of refined torsion, the duality-phase chain, RS duality
//   rsnorm   Ray-Singer norm self-test and the norm of rho_an
//
// Configuration comes from --config JSON and/or flags (flags win).  Reports
// are JSON on stdout (or --out PATH); progress logging, enabled with
// TORSIONLAB_LOG, goes to stderr only, so report bytes are reproducible.
//
// Exit codes: 0 = all asserted checks passed; 1 = assertion failure or bad
// configuration; 2 = numerical-ambiguity refusal (spectral cut through a
// cluster, no admissible angle, ill-conditioned rank decision).

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "torsionlab/random_complex.hpp"
#include "torsionlab/report.hpp"
#include "torsionlab/rs_metric.hpp"
#include "torsionlab/torus.hpp"

namespace {

using namespace torsionlab;

// ---------------------------------------------------------------------------
// Logging (stderr only; never touches report bytes).

bool log_enabled() {
    static const bool on = [] {
        const char* v = std::getenv("TORSIONLAB_LOG");
        return v != nullptr && *v != '\0' && std::string(v) != "0";
    }();
    return on;
}

void logline(const std::string& msg) {
    if (!log_enabled()) return;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    std::cerr << "[torsionlab] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
    std::string command;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string backend = "float";
    std::vector<double> lambdas; // empty => automatic policy
    std::optional<double> theta; // nullopt => automatic policy
    std::string out_path;
    unsigned jobs = 1;
    std::size_t count = 0; // 0 => per-command default
    std::string fixture;   // test hook: injects a known-bad expectation
    double eta_trivial = 0.0;
    bool eta_trivial_given = false;
    long rank = 1;
    Json model;  // one model source object
    Json deform; // deform-command parameters
};

std::vector<double> parse_lambda_csv(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw ConfigError("--lambda: bad number '" + tok + "'");
        if (!(v >= 0.0)) throw ConfigError("--lambda: cuts must be nonnegative");
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

RunConfig resolve_config(const std::string& config_path, const std::string& command,
                         std::optional<std::uint64_t> seed, const std::string& backend,
                         const std::string& lambda_csv, const std::string& theta_str,
                         const std::string& out_path, std::optional<unsigned> jobs,
                         std::optional<std::size_t> count, const std::string& fixture) {
    RunConfig rc;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file: " + config_path);
        Json j = Json::parse(in); // throws on malformed JSON
        if (!j.is_object()) throw ConfigError("config root must be a JSON object");
        if (j.contains("command")) rc.command = j.at("command").get<std::string>();
        if (j.contains("seed")) {
            rc.seed = j.at("seed").get<std::uint64_t>();
            rc.seed_given = true;
        }
        if (j.contains("backend")) rc.backend = j.at("backend").get<std::string>();
        if (j.contains("lambda")) {
            if (!j.at("lambda").is_array()) throw ConfigError("config lambda must be an array");
            for (const auto& v : j.at("lambda")) {
                double x = v.get<double>();
                if (!(x >= 0.0)) throw ConfigError("config lambda: cuts must be nonnegative");
                rc.lambdas.push_back(x);
            }
            std::sort(rc.lambdas.begin(), rc.lambdas.end());
        }
        if (j.contains("theta") && !j.at("theta").is_null()) {
            if (j.at("theta").is_string()) {
                if (j.at("theta").get<std::string>() != "auto")
                    throw ConfigError("config theta must be a number or \"auto\"");
            } else {
                rc.theta = j.at("theta").get<double>();
            }
        }
        if (j.contains("out")) rc.out_path = j.at("out").get<std::string>();
        if (j.contains("jobs")) rc.jobs = j.at("jobs").get<unsigned>();
        if (j.contains("count")) rc.count = j.at("count").get<std::size_t>();
        if (j.contains("fixture")) rc.fixture = j.at("fixture").get<std::string>();
        if (j.contains("eta_trivial")) {
            rc.eta_trivial = j.at("eta_trivial").get<double>();
            rc.eta_trivial_given = true;
        }
        if (j.contains("rank")) rc.rank = j.at("rank").get<long>();
        if (j.contains("model")) rc.model = j.at("model");
        if (j.contains("deform")) rc.deform = j.at("deform");
    }
    // Flags override the config file.
    if (!command.empty()) rc.command = command;
    if (seed) {
        rc.seed = *seed;
        rc.seed_given = true;
    }
    if (!backend.empty()) rc.backend = backend;
    if (!lambda_csv.empty()) rc.lambdas = parse_lambda_csv(lambda_csv);
    if (!theta_str.empty() && theta_str != "auto") {
        std::size_t used = 0;
        double v = std::stod(theta_str, &used);
        if (used != theta_str.size()) throw ConfigError("--theta: expected 'auto' or a number");
        rc.theta = v;
    } else if (theta_str == "auto") {
        rc.theta.reset();
    }
    if (!out_path.empty()) rc.out_path = out_path;
    if (jobs) rc.jobs = *jobs;
    if (count) rc.count = *count;
    if (!fixture.empty()) rc.fixture = fixture;

    if (rc.command.empty())
        throw ConfigError("no command given (use --command or a config file)");
    if (rc.backend != "float" && rc.backend != "exact")
        throw ConfigError("backend must be 'float' or 'exact'");
    if (rc.jobs == 0) throw ConfigError("--jobs must be at least 1");
    return rc;
}

// ---------------------------------------------------------------------------
// Deterministic parallel loop: results are written into slot i by body(i),
// so the reduction order never depends on thread scheduling.

template <class F>
void parallel_indexed(unsigned jobs, std::size_t n, F&& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    unsigned want = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    pool.reserve(want);
    for (unsigned t = 0; t < want; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
        });
    for (auto& th : pool) th.join();
}

std::uint64_t instance_seed(std::uint64_t base, std::size_t i) {
    return base + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1);
}

// ---------------------------------------------------------------------------
// Spectral-cut and angle policies.

// No kernel: lambda = 0 (the whole spectrum is one invertible window).
// Kernel present: half the smallest nonzero eigenvalue modulus.
double auto_lambda(const SignatureData& sig) {
    const double ztol = 1e-10 * std::max(1.0, sig.spectral_radius);
    double smallest = std::numeric_limits<double>::infinity();
    bool kernel = false;
    for (int k = 0; k < 2; ++k)
        for (const auto& win : sig.split[static_cast<std::size_t>(k)].windows)
            for (const Cx& mu : win.eigenvalues) {
                double m = std::abs(mu);
                if (m <= ztol)
                    kernel = true;
                else
                    smallest = std::min(smallest, m);
            }
    if (!kernel) return 0.0;
    if (!std::isfinite(smallest)) return 1.0; // everything is kernel
    return 0.5 * smallest;
}

// Midpoint of the largest gap between eigenvalue directions folded mod pi
// into [-pi, 0); any angle off the directions is an admissible Agmon angle.
double largest_gap_theta(const std::vector<Cx>& spectrum) {
    std::vector<double> dirs;
    for (const Cx& mu : spectrum) {
        if (std::abs(mu) == 0.0) continue;
        double d = std::arg(mu);
        while (d >= 0.0) d -= kPi;
        while (d < -kPi) d += kPi;
        dirs.push_back(d);
    }
    if (dirs.empty()) return -kPi / 2.0;
    std::sort(dirs.begin(), dirs.end());
    double best_gap = (dirs.front() + kPi) - dirs.back();
    double best = dirs.back() + 0.5 * best_gap;
    for (std::size_t i = 1; i < dirs.size(); ++i) {
        double gap = dirs[i] - dirs[i - 1];
        if (gap > best_gap) {
            best_gap = gap;
            best = dirs[i - 1] + 0.5 * gap;
        }
    }
    while (best >= 0.0) best -= kPi;
    while (best < -kPi) best += kPi;
    return best;
}

// Prefer an angle admissible for the eta identity (sector hypothesis); fall
// back to the largest direction gap.
double auto_theta(const std::vector<Cx>& spectrum) {
    try {
        return eta_identity_theta(spectrum);
    } catch (const NumericalRefusal&) {
        return largest_gap_theta(spectrum);
    }
}

// Two admissible angles: midpoints of the two largest direction gaps.
std::array<double, 2> two_admissible_thetas(const std::vector<Cx>& spectrum) {
    std::vector<double> dirs;
    for (const Cx& mu : spectrum) {
        if (std::abs(mu) == 0.0) continue;
        double d = std::arg(mu);
        while (d >= 0.0) d -= kPi;
        while (d < -kPi) d += kPi;
        dirs.push_back(d);
    }
    if (dirs.empty()) return {-kPi / 2.0, -kPi / 4.0};
    std::sort(dirs.begin(), dirs.end());
    std::vector<std::pair<double, double>> gaps; // (width, midpoint)
    gaps.emplace_back((dirs.front() + kPi) - dirs.back(),
                      dirs.back() + 0.5 * ((dirs.front() + kPi) - dirs.back()));
    for (std::size_t i = 1; i < dirs.size(); ++i)
        gaps.emplace_back(dirs[i] - dirs[i - 1], dirs[i - 1] + 0.5 * (dirs[i] - dirs[i - 1]));
    std::sort(gaps.begin(), gaps.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    auto fold = [](double t) {
        while (t >= 0.0) t -= kPi;
        while (t < -kPi) t += kPi;
        return t;
    };
    double t0 = fold(gaps[0].second);
    double t1 = gaps.size() > 1 ? fold(gaps[1].second) : fold(t0 + kPi / 2.0);
    return {t0, t1};
}

// ---------------------------------------------------------------------------
// Model construction from the config's "model" object.

Cx json_to_cx(const Json& v, const char* what) {
    if (v.is_number()) return Cx(v.get<double>(), 0.0);
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return Cx(v[0].get<double>(), v[1].get<double>());
    throw ConfigError(std::string(what) + ": expected a number or [re, im]");
}

Json cx_to_json(const Cx& z) {
    if (z.imag() == 0.0) return Json(z.real());
    return Json::array({z.real(), z.imag()});
}

struct BuiltModel {
    Z2Complex<NumPolicy> cx;
    Chirality<NumPolicy> gamma;
    bool is_torus = false;
    TorusConfig tcfg;
    ModeVec flux_harmonic{0, 0, 0};
    std::string type;
    Json echo; // effective model description for the report
};

TorusConfig torus_config_from_json(const Json& m) {
    TorusConfig cfg;
    cfg.K = m.value("K", 1l);
    if (m.contains("a")) {
        const Json& a = m.at("a");
        if (!a.is_array() || a.size() != 3)
            throw ConfigError("torus model: 'a' must be an array of 3 entries");
        for (int j = 0; j < 3; ++j)
            cfg.a[static_cast<std::size_t>(j)] = json_to_cx(a[static_cast<std::size_t>(j)], "torus a");
    }
    if (m.contains("h")) cfg.h = json_to_cx(m.at("h"), "torus h");
    if (m.contains("metric")) {
        const Json& g = m.at("metric");
        if (!g.is_array() || g.size() != 3)
            throw ConfigError("torus model: 'metric' must be an array of 3 entries");
        for (int j = 0; j < 3; ++j)
            cfg.metric[static_cast<std::size_t>(j)] = g[static_cast<std::size_t>(j)].get<double>();
    }
    cfg.rank = m.value("rank", 1);
    return cfg;
}

BuiltModel build_model(const RunConfig& rc) {
    if (!rc.model.is_object() || !rc.model.contains("type"))
        throw ConfigError("config must provide exactly one model object with a 'type'");
    const Json& m = rc.model;
    const std::string type = m.at("type").get<std::string>();
    BuiltModel out;
    out.type = type;

    if (type == "torus") {
        out.is_torus = true;
        out.tcfg = torus_config_from_json(m);
        if (m.contains("flux_harmonic")) {
            const Json& fh = m.at("flux_harmonic");
            if (!fh.is_array() || fh.size() != 3)
                throw ConfigError("torus model: 'flux_harmonic' must be an array of 3 integers");
            for (int j = 0; j < 3; ++j)
                out.flux_harmonic[static_cast<std::size_t>(j)] =
                    fh[static_cast<std::size_t>(j)].get<long>();
        }
        TorusModel tm = assemble_torus(out.tcfg, out.flux_harmonic);
        out.cx = tm.cx;
        out.gamma = tm.gamma;
        out.echo = Json{{"type", "torus"},
                        {"K", out.tcfg.K},
                        {"a", Json::array({cx_to_json(out.tcfg.a[0]), cx_to_json(out.tcfg.a[1]),
                                           cx_to_json(out.tcfg.a[2])})},
                        {"h", cx_to_json(out.tcfg.h)},
                        {"metric", out.tcfg.metric},
                        {"rank", out.tcfg.rank},
                        {"flux_harmonic", out.flux_harmonic}};
        return out;
    }

    if (type == "random") {
        if (!rc.seed_given && !m.contains("seed"))
            throw ConfigError("random model: a seed is required");
        std::uint64_t seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : rc.seed;
        std::size_t n0 = m.value("n0", std::size_t{3}), n1 = m.value("n1", std::size_t{3});
        std::size_t r0 = m.value("r0", std::size_t{1}), r1 = m.value("r1", std::size_t{1});
        bool with_metric = m.value("with_metric", true);
        std::string chi = m.value("chirality", with_metric ? "selfadjoint" : "generic");
        SplitMix64 rng(seed);
        out.cx = random_z2complex(rng, n0, n1, r0, r1, with_metric);
        if (chi == "selfadjoint") {
            if (!with_metric)
                throw ConfigError("random model: self-adjoint chirality needs with_metric");
            out.gamma = random_selfadjoint_chirality(rng, out.cx);
        } else if (chi == "generic") {
            out.gamma = random_chirality(rng, out.cx);
        } else {
            throw ConfigError("random model: chirality must be 'selfadjoint' or 'generic'");
        }
        out.echo = Json{{"type", "random"}, {"seed", seed},           {"n0", n0},
                        {"n1", n1},         {"r0", r0},               {"r1", r1},
                        {"with_metric", with_metric}, {"chirality", chi}};
        return out;
    }

    if (type == "normal_form") {
        ModelSpec ms;
        if (m.contains("a"))
            for (const auto& v : m.at("a")) ms.a.push_back(json_to_cx(v, "normal_form a"));
        if (m.contains("b"))
            for (const auto& v : m.at("b")) ms.b.push_back(json_to_cx(v, "normal_form b"));
        ms.h = m.value("h", std::size_t{0});
        bool conjugate = m.value("conjugate", true);
        bool with_metric = m.value("with_metric", false);
        if (conjugate && !rc.seed_given && !m.contains("seed"))
            throw ConfigError("normal_form model: a seed is required when conjugate is true");
        std::uint64_t seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : rc.seed;
        Model built = make_model(ms, seed, conjugate, with_metric);
        out.cx = built.cx;
        out.gamma = built.gamma;
        Json aj = Json::array(), bj = Json::array();
        for (const Cx& z : ms.a) aj.push_back(cx_to_json(z));
        for (const Cx& z : ms.b) bj.push_back(cx_to_json(z));
        out.echo = Json{{"type", "normal_form"}, {"a", aj},
                        {"b", bj},               {"h", ms.h},
                        {"conjugate", conjugate}, {"with_metric", with_metric},
                        {"seed", seed}};
        return out;
    }

    if (type == "file") {
        if (!m.contains("path")) throw ConfigError("file model: 'path' is required");
        std::string path = m.at("path").get<std::string>();
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open model file: " + path);
        out.cx = read_complex<NumPolicy>(in);
        std::string chi = m.value("chirality", "generic");
        if (chi == "selfadjoint") {
            if (!out.cx.has_metric)
                throw ConfigError("file model: self-adjoint chirality needs metrics in the file");
            if (!rc.seed_given && !m.contains("seed"))
                throw ConfigError("file model: a seed is required for the generated chirality");
            std::uint64_t seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : rc.seed;
            SplitMix64 rng(seed);
            out.gamma = random_selfadjoint_chirality(rng, out.cx);
            out.echo = Json{{"type", "file"}, {"path", path}, {"chirality", chi}, {"seed", seed}};
        } else if (chi == "generic") {
            if (!rc.seed_given && !m.contains("seed"))
                throw ConfigError("file model: a seed is required for the generated chirality");
            std::uint64_t seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : rc.seed;
            SplitMix64 rng(seed);
            out.gamma = random_chirality(rng, out.cx);
            out.echo = Json{{"type", "file"}, {"path", path}, {"chirality", chi}, {"seed", seed}};
        } else {
            throw ConfigError("file model: chirality must be 'selfadjoint' or 'generic'");
        }
        return out;
    }

    throw ConfigError("unknown model type: '" + type + "'");
}

// Resolve the one spectral cut and the angle for a built model.
struct ResolvedPolicy {
    double lambda = 0.0;
    double theta = -kPi / 2.0;
    bool lambda_auto = false;
    bool theta_auto = false;
};

ResolvedPolicy resolve_policy(const RunConfig& rc, const Z2Complex<NumPolicy>& cx,
                              const Chirality<NumPolicy>& gam) {
    ResolvedPolicy p;
    SignatureData probe = build_signature(cx, gam);
    if (!rc.lambdas.empty()) {
        p.lambda = rc.lambdas.front();
    } else {
        p.lambda = auto_lambda(probe);
        p.lambda_auto = true;
    }
    if (rc.theta) {
        p.theta = *rc.theta;
    } else {
        std::vector<double> cuts;
        if (p.lambda > 0.0) cuts.push_back(p.lambda);
        SignatureData sig = build_signature(cx, gam, cuts);
        std::size_t first = (p.lambda > 0.0) ? 1 : 0;
        p.theta = auto_theta(signature_spectrum_above(sig, first));
        p.theta_auto = true;
    }
    return p;
}

double torus_eta_trivial_or_config(const RunConfig& rc, const BuiltModel& bm) {
    if (rc.eta_trivial_given) return rc.eta_trivial;
    if (bm.is_torus) return eta_trivial(bm.tcfg);
    return 0.0;
}

// ---------------------------------------------------------------------------
// verify: exact identity suites and float spectral suites.

// All square shapes (n, n, r0, r1) with n <= nmax and r0 + r1 <= n, in
// ascending order, so the first failure is a minimal counterexample.
std::vector<std::array<std::size_t, 4>> square_shapes(std::size_t nmax) {
    std::vector<std::array<std::size_t, 4>> shapes;
    for (std::size_t n = 1; n <= nmax; ++n)
        for (std::size_t r0 = 0; r0 <= n; ++r0)
            for (std::size_t r1 = 0; r0 + r1 <= n; ++r1)
                shapes.push_back({n, n, r0, r1});
    return shapes;
}

std::string shape_str(const std::array<std::size_t, 4>& s) {
    std::ostringstream os;
    os << "n0=" << s[0] << " n1=" << s[1] << " r0=" << s[2] << " r1=" << s[3];
    return os.str();
}

Report cmd_verify(const RunConfig& rc) {
    Report rep;
    rep.command = "verify";
    rep.backend = rc.backend;
    rep.seed = rc.seed;
    const std::size_t count = rc.count ? rc.count : 200;
    const bool sign_bug = rc.fixture == "sign_bug";
    if (!rc.fixture.empty() && !sign_bug)
        throw ConfigError("unknown fixture: '" + rc.fixture + "'");

    // --- exact suite 1: the split-complex sign exponent vanishes.
    {
        SuiteRow row{"sign_F vanishes for p,q <= 8", true, 0.0, 0.0, ""};
        for (std::size_t p = 0; p <= 8 && row.pass; ++p)
            for (std::size_t q = 0; q <= 8; ++q)
                if (sign_F(p, q) != 0) {
                    row.pass = false;
                    row.residual = 1.0;
                    row.detail = "p=" + std::to_string(p) + " q=" + std::to_string(q);
                    break;
                }
        rep.suite.push_back(row);
    }

    // --- exact suite 2: fusion / direct-sum laws on every square shape pair
    // with dims <= 3 (one seeded instance per ordered pair).
    {
        logline("verify: exhaustive exact fusion suite");
        auto shapes = square_shapes(3);
        struct Cell {
            bool pass = true;
            std::string detail;
        };
        std::vector<Cell> cells(shapes.size() * shapes.size());
        parallel_indexed(rc.jobs, cells.size(), [&](std::size_t idx) {
            const auto& sx = shapes[idx / shapes.size()];
            const auto& sy = shapes[idx % shapes.size()];
            SplitMix64 rng(instance_seed(rc.seed, idx));
            Z2Complex<ExactPolicy> x = random_exact_z2complex(rng, sx[0], sx[1], sx[2], sx[3]);
            Z2Complex<ExactPolicy> y = random_exact_z2complex(rng, sy[0], sy[1], sy[2], sy[3]);
            Chirality<ExactPolicy> gx = random_exact_chirality(rng, x);
            Chirality<ExactPolicy> gy = random_exact_chirality(rng, y);
            GQ fusion = phi_fusion_ratio(x, y);
            GQ dsum = torsion_direct_sum_ratio(x, gx, y, gy);
            GQ want = GQ(1);
            if (sign_bug) {
                // Deliberately wrong expectation: flips the direct-sum law by
                // (-1)^{R(p)+R(p+q)} of the first summand's split ranks.
                std::size_t p = static_cast<std::size_t>(torsionlab::rank(x.d0));
                std::size_t q = static_cast<std::size_t>(torsionlab::rank(x.d1));
                if ((static_cast<std::size_t>(sign_R(p)) + static_cast<std::size_t>(sign_R(p + q))) % 2)
                    want = GQ(-1);
            }
            if (!(fusion == GQ(1))) {
                cells[idx].pass = false;
                cells[idx].detail = "fusion ratio != 1 at x(" + shape_str(sx) + ") y(" + shape_str(sy) + ")";
            } else if (!(dsum == want)) {
                cells[idx].pass = false;
                cells[idx].detail = "direct-sum ratio mismatch at x(" + shape_str(sx) + ") y(" +
                                    shape_str(sy) + ")";
            }
        });
        SuiteRow row{"exact fusion and direct-sum laws, all dims <= 3", true, 0.0, 0.0, ""};
        for (const Cell& c : cells)
            if (!c.pass) {
                row.pass = false;
                row.residual = 1.0;
                row.detail = c.detail; // first (minimal) counterexample
                break;
            }
        rep.suite.push_back(row);
    }

    // --- exact suite 3: seeded random instances over ascending shapes.
    {
        logline("verify: seeded exact instance suite (" + std::to_string(count) + ")");
        auto shapes = square_shapes(3);
        struct Cell {
            bool pass = true;
            std::string detail;
        };
        std::vector<Cell> cells(count);
        parallel_indexed(rc.jobs, count, [&](std::size_t i) {
            const auto& s = shapes[i % shapes.size()];
            SplitMix64 rng(instance_seed(rc.seed ^ 0xABCDu, i));
            Z2Complex<ExactPolicy> x = random_exact_z2complex(rng, s[0], s[1], s[2], s[3]);
            Z2Complex<ExactPolicy> y = random_exact_z2complex(rng, s[0], s[1], s[3], s[2]);
            Chirality<ExactPolicy> gx = random_exact_chirality(rng, x);
            Chirality<ExactPolicy> gy = random_exact_chirality(rng, y);
            if (!(phi_fusion_ratio(x, y) == GQ(1))) {
                cells[i].pass = false;
                cells[i].detail = "fusion ratio != 1 at " + shape_str(s);
                return;
            }
            GQ want = GQ(1);
            if (sign_bug) {
                std::size_t p = static_cast<std::size_t>(torsionlab::rank(x.d0));
                std::size_t q = static_cast<std::size_t>(torsionlab::rank(x.d1));
                if ((static_cast<std::size_t>(sign_R(p)) + static_cast<std::size_t>(sign_R(p + q))) % 2)
                    want = GQ(-1);
            }
            if (!(torsion_direct_sum_ratio(x, gx, y, gy) == want)) {
                cells[i].pass = false;
                cells[i].detail = "direct-sum ratio mismatch at " + shape_str(s);
            }
        });
        SuiteRow row{"exact seeded instances: fusion and direct-sum ratios are 1", true, 0.0,
                     0.0, ""};
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (!cells[i].pass) {
                row.pass = false;
                row.residual = 1.0;
                row.detail = cells[i].detail + " (instance " + std::to_string(i) + ")";
                break;
            }
        rep.suite.push_back(row);
    }

    rep.results["exact_instances"] = count;

    if (rc.backend == "exact") {
        rep.results["float_suites"] = "skipped (exact backend)";
    } else {
        const std::size_t fcount = std::max<std::size_t>(20, count / 10);
        rep.results["float_instances"] = fcount;

        // --- float suite: rho_Gamma equals the graded determinant when the
        // signature operator is invertible.
        {
            logline("verify: rho vs graded determinant");
            std::vector<double> res(fcount, 0.0);
            parallel_indexed(rc.jobs, fcount, [&](std::size_t i) {
                SplitMix64 rng(instance_seed(rc.seed ^ 0x11u, i));
                ModelSpec ms;
                std::size_t p = 1 + rng.next_below(4), q = 1 + rng.next_below(3);
                for (std::size_t j = 0; j < p; ++j)
                    ms.a.push_back(std::exp(Cx(rng.next_signed() * 0.5, rng.next_signed() * 1.4)));
                for (std::size_t j = 0; j < q; ++j)
                    ms.b.push_back(std::exp(Cx(rng.next_signed() * 0.5, rng.next_signed() * 1.4)));
                Model mod = make_model(ms, instance_seed(7, i));
                SignatureData sig = build_signature(mod.cx, mod.gamma);
                double theta = auto_theta(signature_spectrum_above(sig, 0));
                Cx det = graded_det_above(sig, 0, theta).to_complex();
                Cx rho = refined_torsion(mod.cx, mod.gamma).coeff;
                res[i] = std::abs(det - rho) / std::max(1.0, std::abs(rho));
            });
            double worst = *std::max_element(res.begin(), res.end());
            rep.suite.push_back(
                {"float: rho equals graded determinant (invertible models)", worst <= 1e-9,
                 worst, 1e-9, ""});
        }

        // --- float suite: rho_H is independent of the spectral cut.
        {
            logline("verify: lambda-split independence");
            std::vector<double> res(fcount, 0.0);
            parallel_indexed(rc.jobs, fcount, [&](std::size_t i) {
                SplitMix64 rng(instance_seed(rc.seed ^ 0x22u, i));
                Z2Complex<NumPolicy> cx = random_z2complex(rng, 4, 4, 2, 1, true);
                Chirality<NumPolicy> gam = random_selfadjoint_chirality(rng, cx);
                SignatureData sig = build_signature(cx, gam);
                std::vector<double> mods;
                for (int k = 0; k < 2; ++k)
                    for (const Cx& mu : sig.split[static_cast<std::size_t>(k)].windows[0].eigenvalues) {
                        double m = std::abs(mu);
                        if (m > 1e-8 * sig.spectral_radius) mods.push_back(m);
                    }
                std::sort(mods.begin(), mods.end());
                // Keep only well-separated moduli so midpoint cuts clear the
                // refusal guard against cutting through a cluster.
                mods.erase(std::unique(mods.begin(), mods.end(),
                                       [](double a, double b) { return b < a * (1.0 + 1e-3); }),
                           mods.end());
                if (mods.size() < 2) return;
                double theta = auto_theta(signature_spectrum_above(sig, 0));
                std::vector<Cx> vals;
                std::vector<double> cuts = {0.5 * mods[0], std::sqrt(mods[0] * mods[1])};
                if (mods.size() >= 3) cuts.push_back(std::sqrt(mods[1] * mods[2]));
                try {
                    for (double c : cuts)
                        vals.push_back(rho_h(cx, gam, c, theta).coeff.to_complex());
                } catch (const NumericalRefusal&) {
                    return; // a cut fell inside a cluster for this draw; skip it
                }
                double worst = 0.0;
                for (const Cx& v : vals)
                    worst = std::max(worst,
                                     std::abs(v - vals[0]) / std::max(1.0, std::abs(vals[0])));
                res[i] = worst;
            });
            double worst = *std::max_element(res.begin(), res.end());
            rep.suite.push_back({"float: rho_H independent of the spectral cut", worst <= 1e-8,
                                 worst, 1e-8, ""});
        }

        // --- float suite: the eta identity for the graded determinant.
        {
            logline("verify: eta identity");
            std::vector<double> res(fcount, 0.0);
            parallel_indexed(rc.jobs, fcount, [&](std::size_t i) {
                SplitMix64 rng(instance_seed(rc.seed ^ 0x33u, i));
                ModelSpec ms;
                std::size_t p = 1 + rng.next_below(3), q = 1 + rng.next_below(3);
                for (std::size_t j = 0; j < p; ++j)
                    ms.a.push_back(std::exp(Cx(rng.next_signed() * 0.4, rng.next_signed() * 1.2)));
                for (std::size_t j = 0; j < q; ++j)
                    ms.b.push_back(std::exp(Cx(rng.next_signed() * 0.4, rng.next_signed() * 1.2)));
                Model mod = make_model(ms, instance_seed(11, i));
                SignatureData sig = build_signature(mod.cx, mod.gamma);
                std::vector<Cx> spec = signature_spectrum_above(sig, 0);
                double theta;
                try {
                    theta = eta_identity_theta(spec);
                } catch (const NumericalRefusal&) {
                    return; // no admissible sector angle for this draw
                }
                EtaIdentity id = eta_identity_check(sig, 0, theta);
                res[i] = id.residual / std::max(1.0, id.scale);
            });
            double worst = *std::max_element(res.begin(), res.end());
            rep.suite.push_back({"float: eta identity for the graded determinant",
                                 worst <= 1e-9, worst, 1e-9, ""});
        }

        // --- float suite: the graded determinant does not depend on the
        // admissible angle.
        {
            logline("verify: theta independence");
            std::vector<double> res(fcount, 0.0);
            parallel_indexed(rc.jobs, fcount, [&](std::size_t i) {
                SplitMix64 rng(instance_seed(rc.seed ^ 0x44u, i));
                ModelSpec ms;
                std::size_t p = 1 + rng.next_below(3), q = 1 + rng.next_below(3);
                for (std::size_t j = 0; j < p; ++j)
                    ms.a.push_back(std::exp(Cx(rng.next_signed() * 0.5, rng.next_signed() * 1.5)));
                for (std::size_t j = 0; j < q; ++j)
                    ms.b.push_back(std::exp(Cx(rng.next_signed() * 0.5, rng.next_signed() * 1.5)));
                Model mod = make_model(ms, instance_seed(13, i));
                SignatureData sig = build_signature(mod.cx, mod.gamma);
                auto thetas = two_admissible_thetas(signature_spectrum_above(sig, 0));
                Cx d0 = graded_det_above(sig, 0, thetas[0]).to_complex();
                Cx d1 = graded_det_above(sig, 0, thetas[1]).to_complex();
                res[i] = std::abs(d0 - d1) / std::max(1.0, std::abs(d0));
            });
            double worst = *std::max_element(res.begin(), res.end());
            rep.suite.push_back({"float: graded determinant is angle independent",
                                 worst <= 1e-10, worst, 1e-10, ""});
        }

        // --- float suite: duality of refined torsion.
        {
            logline("verify: duality of refined torsion");
            std::vector<double> res(fcount, 0.0);
            parallel_indexed(rc.jobs, fcount, [&](std::size_t i) {
                SplitMix64 rng(instance_seed(rc.seed ^ 0x55u, i));
                std::size_t n = 3 + rng.next_below(2);
                std::size_t r0 = 1 + rng.next_below(2);
                std::size_t r1 = rng.next_below(n - r0 + 1);
                Z2Complex<NumPolicy> cx = random_z2complex(rng, n, n, r0, r1, true);
                Chirality<NumPolicy> gam = random_selfadjoint_chirality(rng, cx);
                Z2Complex<NumPolicy> dl = dual_complex(cx);
                Chirality<NumPolicy> gd = dual_chirality(cx, gam);
                Decomposition<NumPolicy> dec = decompose(cx), decd = decompose(dl);
                Cx lhs = refined_torsion(dl, gd, decd).coeff;
                Cx rhs =
                    alpha_on_cohomology(cx, dec, dl, decd, refined_torsion(cx, gam, dec)).coeff;
                res[i] = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
            });
            double worst = *std::max_element(res.begin(), res.end());
            rep.suite.push_back({"float: refined torsion duality rho_{Gamma*} = alpha(rho)",
                                 worst <= 1e-10, worst, 1e-10, ""});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// torsion: full report for one abstract model.

Report cmd_torsion(const RunConfig& rc) {
    Report rep;
    rep.command = "torsion";
    rep.backend = "float";
    rep.seed = rc.seed;
    if (rc.backend == "exact")
        throw ConfigError("command 'torsion' runs on the float backend");
    BuiltModel bm = build_model(rc);
    ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
    const double eta_triv = torus_eta_trivial_or_config(rc, bm);
    logline("torsion: model built, lambda=" + std::to_string(pol.lambda) +
            " theta=" + std::to_string(pol.theta));

    std::vector<double> cuts;
    if (pol.lambda > 0.0) cuts.push_back(pol.lambda);
    SignatureData sig = build_signature(bm.cx, bm.gamma, cuts);
    std::size_t first = (pol.lambda > 0.0) ? 1 : 0;

    rep.results["model"] = bm.echo;
    rep.results["dims"] = Json{{"n0", bm.cx.n0}, {"n1", bm.cx.n1}};
    rep.results["lambda"] = pol.lambda;
    rep.results["lambda_policy"] = pol.lambda_auto ? "auto" : "explicit";
    rep.results["theta"] = pol.theta;
    rep.results["theta_policy"] = pol.theta_auto ? "auto" : "explicit";
    rep.results["spectra"] = spectra_json(sig);
    rep.results["eta_above_lambda"] = eta_json(eta_above(sig, first));
    rep.results["xi_above_lambda"] = complex_json(xi_above(sig, first, pol.theta));
    rep.results["d_minus_alternating"] = d_minus_alternating(sig, first, sig.window_count());
    rep.results["eta_trivial"] = eta_triv;

    Decomposition<NumPolicy> dec = decompose(bm.cx);
    CohomologySpaces<NumPolicy> coh = cohomology(bm.cx, dec);
    rep.results["cohomology"] = Json{{"h0", coh.h0}, {"h1", coh.h1}};

    DetElement<NumPolicy> rho = refined_torsion(bm.cx, bm.gamma, dec);
    rep.results["rho_gamma"] = scalar_json(TorsionScalar::from_complex(rho.coeff));

    bool invertible = !window_contains_zero(sig, 0) || pol.lambda > 0.0;
    if (pol.lambda == 0.0 && !window_contains_zero(sig, 0))
        rep.results["graded_det"] =
            scalar_json(graded_det_above(sig, 0, pol.theta));
    RhoResult rh = rho_h(bm.cx, bm.gamma, pol.lambda, pol.theta);
    rep.results["rho_h"] = scalar_json(rh.coeff);
    RhoResult ran = rho_an(bm.cx, bm.gamma, pol.lambda, pol.theta, eta_triv,
                           static_cast<long>(rc.rank));
    rep.results["rho_an"] = scalar_json(ran.coeff);

    // Consistency rows.
    {
        double scale = std::max(1.0, bm.cx.d0.norm() * bm.cx.d1.norm());
        double r = std::max((bm.cx.d1 * bm.cx.d0).norm(), (bm.cx.d0 * bm.cx.d1).norm()) / scale;
        rep.suite.push_back({"d squared vanishes", r <= 1e-10, r, 1e-10, ""});
    }
    {
        CMat lhs = sig.b1, rhs = bm.gamma.g0 * sig.b0 * bm.gamma.g1;
        double scale = std::max(1.0, sig.b0.norm());
        double r = (lhs - rhs).norm() / scale;
        rep.suite.push_back({"signature operators are chirality conjugate", r <= 1e-10, r,
                             1e-10, ""});
    }
    if (invertible && coh.h0 == 0 && coh.h1 == 0 && pol.lambda == 0.0) {
        Cx det = graded_det_above(sig, 0, pol.theta).to_complex();
        double r = std::abs(det - rho.coeff) / std::max(1.0, std::abs(rho.coeff));
        rep.suite.push_back({"rho equals the graded determinant", r <= 1e-9, r, 1e-9, ""});
    }
    if (!rc.lambdas.empty() && rc.lambdas.size() >= 2) {
        std::vector<Cx> vals;
        for (double c : rc.lambdas) vals.push_back(rho_h(bm.cx, bm.gamma, c, pol.theta).coeff.to_complex());
        double worst = 0.0;
        for (const Cx& v : vals)
            worst = std::max(worst, std::abs(v - vals[0]) / std::max(1.0, std::abs(vals[0])));
        rep.suite.push_back({"rho_H agrees across the supplied cuts", worst <= 1e-8, worst,
                             1e-8, ""});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// torus: assembled and per-mode pipelines with the fusion cross-check.

Report cmd_torus(const RunConfig& rc) {
    Report rep;
    rep.command = "torus";
    rep.backend = "float";
    rep.seed = rc.seed;
    if (rc.backend == "exact")
        throw ConfigError("command 'torus' runs on the float backend");
    BuiltModel bm = build_model(rc);
    if (!bm.is_torus) throw ConfigError("command 'torus' needs a torus model");
    if (bm.flux_harmonic != ModeVec{0, 0, 0})
        throw ConfigError("command 'torus' aggregates constant-flux boxes only");
    const TorusConfig& cfg = bm.tcfg;
    const double eta_triv = torus_eta_trivial_or_config(rc, bm);
    ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
    logline("torus: K=" + std::to_string(cfg.K) + " lambda=" + std::to_string(pol.lambda) +
            " theta=" + std::to_string(pol.theta));

    std::vector<double> cuts;
    if (pol.lambda > 0.0) cuts.push_back(pol.lambda);
    SignatureData sig = build_signature(bm.cx, bm.gamma, cuts);
    std::size_t first = (pol.lambda > 0.0) ? 1 : 0;

    rep.results["model"] = bm.echo;
    rep.results["dims"] = Json{{"n0", bm.cx.n0}, {"n1", bm.cx.n1}};
    rep.results["lambda"] = pol.lambda;
    rep.results["theta"] = pol.theta;
    rep.results["eta_trivial"] = eta_triv;
    rep.results["eta_above_lambda"] = eta_json(eta_above(sig, first));
    rep.results["spectra"] = spectra_json(sig);

    Decomposition<NumPolicy> dec = decompose(bm.cx);
    CohomologySpaces<NumPolicy> coh = cohomology(bm.cx, dec);
    rep.results["cohomology"] = Json{{"h0", coh.h0}, {"h1", coh.h1}};

    RhoResult whole = rho_h(bm.cx, bm.gamma, pol.lambda, pol.theta);
    rep.results["rho_h"] = scalar_json(whole.coeff);
    RhoResult ran = rho_an(bm.cx, bm.gamma, pol.lambda, pol.theta, eta_triv,
                           static_cast<long>(cfg.rank));
    rep.results["rho_an"] = scalar_json(ran.coeff);

    // Per-mode pipeline (parallel across modes, ordered reduction).
    std::vector<ModeVec> modes = mode_list(cfg.K);
    Chirality<NumPolicy> mode_gamma = build_chirality(cfg.metric);
    struct ModeCell {
        ModeTorsion part;
        std::optional<Decomposition<NumPolicy>> dec; // present for non-acyclic modes
        std::size_t lex = 0;
        double lambda = 0.0;
    };
    std::vector<ModeCell> cells(modes.size());
    parallel_indexed(rc.jobs, modes.size(), [&](std::size_t i) {
        ModeComplex mc = build_mode_complex(modes[i], cfg);
        SignatureData ms = build_signature(mc.cx, mode_gamma);
        double lam = auto_lambda(ms);
        ModeCell& cell = cells[i];
        cell.lex = i;
        cell.lambda = lam;
        cell.part.k = modes[i];
        cell.part.rho = rho_h(mc.cx, mode_gamma, lam, pol.theta);
        if (cell.part.rho.h0 > 0 || cell.part.rho.h1 > 0) cell.dec = decompose(mc.cx);
    });

    std::vector<ModeTorsion> parts;
    parts.reserve(cells.size());
    std::size_t nontrivial_modes = 0;
    for (const ModeCell& c : cells) {
        parts.push_back(c.part);
        if (c.dec) ++nontrivial_modes;
    }
    TorusTorsion agg = aggregate(parts, cfg, eta_triv);
    rep.results["aggregate"] = Json{{"coeff", scalar_json(agg.coeff)},
                                    {"h0", agg.h0},
                                    {"h1", agg.h1},
                                    {"non_acyclic_modes", nontrivial_modes}};

    // Fusion cross-check: transport the per-mode cohomology frames into the
    // assembled frames and compare with the whole-complex rho_H plus the
    // global eta_trivial phase.
    {
        Cx conv(1.0, 0.0);
        std::array<std::vector<CMat>, 2> blocks;
        std::array<std::size_t, 2> hdim{0, 0};
        for (const ModeCell& c : cells)
            if (c.dec)
                for (int k = 0; k < 2; ++k) {
                    CMat em = CMat::Zero(bm.cx.dim(k), c.dec->H[static_cast<std::size_t>(k)].cols());
                    em.block(4 * static_cast<Eigen::Index>(c.lex), 0, 4,
                             c.dec->H[static_cast<std::size_t>(k)].cols()) =
                        c.dec->H[static_cast<std::size_t>(k)];
                    blocks[static_cast<std::size_t>(k)].push_back(em);
                    hdim[static_cast<std::size_t>(k)] +=
                        static_cast<std::size_t>(c.dec->H[static_cast<std::size_t>(k)].cols());
                }
        if (hdim[0] > 0 || hdim[1] > 0) {
            std::array<CMat, 2> embedded;
            for (int k = 0; k < 2; ++k) {
                embedded[static_cast<std::size_t>(k)] =
                    CMat::Zero(bm.cx.dim(k), static_cast<Eigen::Index>(hdim[static_cast<std::size_t>(k)]));
                Eigen::Index at = 0;
                for (const CMat& b : blocks[static_cast<std::size_t>(k)]) {
                    embedded[static_cast<std::size_t>(k)].block(0, at, bm.cx.dim(k), b.cols()) = b;
                    at += b.cols();
                }
            }
            CMat t0 = class_in_frame(dec, 0, embedded[0]);
            CMat t1 = class_in_frame(dec, 1, embedded[1]);
            conv = NumPolicy::det_ratio(t0, t1);
        }
        Cx fused = agg.coeff.to_complex() * conv;
        Cx want = ran.coeff.to_complex();
        double r = std::abs(fused - want) / std::max(1.0, std::abs(want));
        rep.results["fusion_check"] =
            Json{{"aggregated", scalar_json(agg.coeff)},
                 {"frame_factor", complex_json(conv)},
                 {"assembled", scalar_json(ran.coeff)}};
        rep.suite.push_back({"per-mode aggregate fuses to the assembled torsion", r <= 1e-8,
                             r, 1e-8, ""});
    }

    rep.suite.push_back({"aggregate cohomology matches the assembled complex",
                         agg.h0 == coh.h0 && agg.h1 == coh.h1,
                         std::abs(static_cast<double>(agg.h0) - static_cast<double>(coh.h0)) +
                             std::abs(static_cast<double>(agg.h1) - static_cast<double>(coh.h1)),
                         0.0, ""});
    {
        double scale = std::max(1.0, bm.cx.d0.norm() * bm.cx.d1.norm());
        double r = std::max((bm.cx.d1 * bm.cx.d0).norm(), (bm.cx.d0 * bm.cx.d1).norm()) / scale;
        rep.suite.push_back({"d squared vanishes", r <= 1e-12, r, 1e-12, ""});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// deform: metric grids on the torus, flux conjugations on abstract models.

Report cmd_deform(const RunConfig& rc) {
    Report rep;
    rep.command = "deform";
    rep.backend = "float";
    rep.seed = rc.seed;
    if (rc.backend == "exact")
        throw ConfigError("command 'deform' runs on the float backend");
    if (!rc.deform.is_object() || !rc.deform.contains("mode"))
        throw ConfigError("command 'deform' needs a deform object with a 'mode'");
    const std::string mode = rc.deform.at("mode").get<std::string>();
    rep.results["mode"] = mode;

    if (mode == "metric") {
        BuiltModel bm = build_model(rc);
        if (!bm.is_torus) throw ConfigError("deform mode 'metric' needs a torus model");
        const TorusConfig base = bm.tcfg;
        std::array<double, 3> rate{0.2, 0.05, 0.1};
        if (rc.deform.contains("rate")) {
            const Json& r = rc.deform.at("rate");
            if (!r.is_array() || r.size() != 3)
                throw ConfigError("deform rate must be an array of 3 entries");
            for (int j = 0; j < 3; ++j)
                rate[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(j)].get<double>();
        }
        const double t0 = rc.deform.value("t0", 0.0), t1 = rc.deform.value("t1", 1.0);
        const std::size_t grid = rc.deform.value("grid", std::size_t{9});
        if (grid < 2) throw ConfigError("deform grid needs at least 2 points");
        auto cfg_at = [&](double t) {
            TorusConfig c = base;
            for (int j = 0; j < 3; ++j)
                c.metric[static_cast<std::size_t>(j)] =
                    base.metric[static_cast<std::size_t>(j)] +
                    t * rate[static_cast<std::size_t>(j)];
            return c;
        };
        const double eta_triv = torus_eta_trivial_or_config(rc, bm);
        ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
        logline("deform metric: lambda=" + std::to_string(pol.lambda) +
                " theta=" + std::to_string(pol.theta));

        // One fixed decomposition: the differential is metric independent, so
        // the cohomology frames at the base parameter serve the whole family.
        Decomposition<NumPolicy> dec_base = decompose(bm.cx);

        struct Point {
            double t = 0.0;
            bool collision = false;
            std::string note;
            Cx phi{1.0, 0.0};
            Cx rho_an_fixed{1.0, 0.0};
            double eta = 0.0;
            long dminus = 0;
            std::array<std::size_t, 2> wdims{0, 0};
        };
        std::vector<Point> pts(grid);
        parallel_indexed(rc.jobs, grid, [&](std::size_t i) {
            Point& p = pts[i];
            p.t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(grid - 1);
            TorusModel tm = assemble_torus(cfg_at(p.t));
            std::vector<double> cuts;
            if (pol.lambda > 0.0) cuts.push_back(pol.lambda);
            SignatureData sig = build_signature(tm.cx, tm.gamma, cuts);
            std::size_t first = (pol.lambda > 0.0) ? 1 : 0;
            // Collision detection: an eigenvalue modulus too close to the cut.
            if (pol.lambda > 0.0) {
                double clearance = std::numeric_limits<double>::infinity();
                for (int k = 0; k < 2; ++k)
                    for (const auto& win : sig.split[static_cast<std::size_t>(k)].windows)
                        for (const Cx& mu : win.eigenvalues)
                            clearance = std::min(clearance, std::abs(std::abs(mu) - pol.lambda));
                if (clearance <= 1e-6 * std::max(1.0, sig.spectral_radius)) {
                    p.collision = true;
                    p.note = "cut within numerical clearance of an eigenvalue";
                    return;
                }
            }
            try {
                p.eta = eta_above(sig, first).eta();
                p.dminus = d_minus_alternating(sig, first, sig.window_count());
                for (int k = 0; k < 2; ++k)
                    p.wdims[static_cast<std::size_t>(k)] =
                        pol.lambda > 0.0
                            ? sig.split[static_cast<std::size_t>(k)].windows[0].dim()
                            : 0;
                Cx xi = xi_above(sig, first, pol.theta);
                if (pol.lambda > 0.0) {
                    WindowComplex sub = window_subcomplex(sig, 0);
                    Decomposition<NumPolicy> dec_sub = decompose(sub.cx);
                    DetElement<NumPolicy> rho_sub = refined_torsion(sub.cx, sub.gamma, dec_sub);
                    CMat f0 = class_in_frame(dec_base, 0, CMat(sub.w[0] * dec_sub.H[0]));
                    CMat f1 = class_in_frame(dec_base, 1, CMat(sub.w[1] * dec_sub.H[1]));
                    p.phi = std::exp(xi) * rho_sub.coeff * NumPolicy::det_ratio(f0, f1);
                } else {
                    p.phi = std::exp(xi);
                }
                RhoResult ran = rho_an(tm.cx, tm.gamma, pol.lambda, pol.theta, eta_triv,
                                       static_cast<long>(base.rank));
                Cx transport = (dec_base.H[0].cols() + dec_base.H[1].cols() > 0)
                                   ? frame_transport(dec_base, decompose(tm.cx))
                                   : Cx(1.0, 0.0);
                p.rho_an_fixed = ran.coeff.to_complex() * transport;
            } catch (const NumericalRefusal& e) {
                p.collision = true;
                p.note = e.what();
            }
        });

        // Segments between collisions; constancy asserted per segment.
        Json points = Json::array();
        for (const Point& p : pts) {
            Json row{{"t", p.t}, {"collision", p.collision}};
            if (p.collision) {
                row["note"] = p.note;
            } else {
                row["phi"] = complex_json(p.phi);
                row["rho_an_fixed_frame"] = complex_json(p.rho_an_fixed);
                row["eta"] = p.eta;
                row["d_minus_alternating"] = p.dminus;
                row["window_dims"] = p.wdims;
            }
            points.push_back(std::move(row));
        }
        rep.results["grid"] = std::move(points);
        rep.results["lambda"] = pol.lambda;
        rep.results["theta"] = pol.theta;

        std::size_t collisions = 0;
        double worst_phi = 0.0, worst_ran = 0.0;
        std::size_t segments = 0;
        std::size_t i = 0;
        while (i < pts.size()) {
            if (pts[i].collision) {
                ++collisions;
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < pts.size() && !pts[j].collision) ++j;
            ++segments;
            const Point& ref = pts[i];
            for (std::size_t k = i; k < j; ++k) {
                worst_phi = std::max(worst_phi, std::abs(pts[k].phi - ref.phi) /
                                                    std::max(1e-300, std::abs(ref.phi)));
                worst_ran = std::max(worst_ran,
                                     std::abs(pts[k].rho_an_fixed - ref.rho_an_fixed) /
                                         std::max(1e-300, std::abs(ref.rho_an_fixed)));
            }
            i = j;
        }
        rep.results["segments"] = segments;
        rep.results["collisions"] = collisions;
        // Informational eta-jump tracker: integer jumps of eta between
        // neighboring clean points.
        {
            Json jumps = Json::array();
            const Point* prev = nullptr;
            for (const Point& p : pts) {
                if (p.collision) {
                    prev = nullptr;
                    continue;
                }
                if (prev && std::abs(p.eta - prev->eta) > 0.25)
                    jumps.push_back(Json{{"t_from", prev->t},
                                         {"t_to", p.t},
                                         {"eta_from", prev->eta},
                                         {"eta_to", p.eta}});
                prev = &p;
            }
            rep.results["eta_jumps"] = std::move(jumps);
        }
        rep.suite.push_back({"exp(xi) * rho_window constant along the metric family",
                             worst_phi <= 1e-8, worst_phi, 1e-8,
                             collisions ? "asserted per segment between collisions" : ""});
        rep.suite.push_back({"rho_an constant in fixed frames along the metric family",
                             worst_ran <= 1e-8, worst_ran, 1e-8, ""});
        return rep;
    }

    if (mode == "flux") {
        BuiltModel bm = build_model(rc);
        const std::string beta_kind = rc.deform.value("beta", "supertraceless");
        const double trace_target = rc.deform.value("trace", 5.0);
        const double v0 = rc.deform.value("v0", 0.0), v1 = rc.deform.value("v1", 1.0);
        const std::size_t grid = rc.deform.value("grid", std::size_t{9});
        const double step = rc.deform.value("step", 1e-3);
        if (grid < 2) throw ConfigError("deform grid needs at least 2 points");

        ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
        logline("deform flux: lambda=" + std::to_string(pol.lambda) +
                " theta=" + std::to_string(pol.theta));

        SplitMix64 rng(instance_seed(rc.seed ^ 0x77u, 0));
        CMat beta0 = random_dense(rng, bm.cx.n0, bm.cx.n0, 0.5);
        CMat beta1 = random_dense(rng, bm.cx.n1, bm.cx.n1, 0.5);
        // Adjust the parity-0 trace so the supertrace hits the target.
        Cx target = (beta_kind == "trace") ? Cx(trace_target, 0.0) : Cx(0.0, 0.0);
        Cx shift = (target - (beta0.trace() - beta1.trace())) /
                   Cx(static_cast<double>(bm.cx.n0), 0.0);
        beta0 += shift * CMat::Identity(static_cast<Eigen::Index>(bm.cx.n0),
                                        static_cast<Eigen::Index>(bm.cx.n0));
        Cx strace = beta0.trace() - beta1.trace();
        rep.results["supertrace"] = complex_json(strace);
        rep.results["lambda"] = pol.lambda;
        rep.results["theta"] = pol.theta;

        Decomposition<NumPolicy> dec0 = decompose(bm.cx);
        struct Sample {
            double v = 0.0;
            bool refused = false;
            std::string note;
            Cx combined{1.0, 0.0};
            Cx xi{0.0, 0.0};
        };
        std::vector<Sample> samples(grid);
        parallel_indexed(rc.jobs, grid, [&](std::size_t i) {
            Sample& s = samples[i];
            s.v = v0 + (v1 - v0) * static_cast<double>(i) / static_cast<double>(grid - 1);
            try {
                FluxSample fs = flux_sample(bm.cx, bm.gamma, beta0, beta1, pol.lambda,
                                            pol.theta, s.v, dec0);
                s.combined = fs.combined.to_complex();
                s.xi = fs.xi;
            } catch (const NumericalRefusal& e) {
                s.refused = true;
                s.note = e.what();
            }
        });
        Json pts = Json::array();
        for (const Sample& s : samples) {
            Json row{{"v", s.v}, {"refused", s.refused}};
            if (s.refused)
                row["note"] = s.note;
            else {
                row["combined"] = complex_json(s.combined);
                row["xi"] = complex_json(s.xi);
            }
            pts.push_back(std::move(row));
        }
        rep.results["grid"] = std::move(pts);

        if (beta_kind == "supertraceless") {
            double worst = 0.0;
            const Sample* ref = nullptr;
            std::size_t refused = 0;
            for (const Sample& s : samples) {
                if (s.refused) {
                    ++refused;
                    continue;
                }
                if (!ref) ref = &s;
                worst = std::max(worst, std::abs(s.combined - ref->combined) /
                                            std::max(1e-300, std::abs(ref->combined)));
            }
            rep.results["refused_points"] = refused;
            rep.suite.push_back({"det(eps_v)^{-1} e^{xi} rho constant for supertraceless beta",
                                 ref != nullptr && worst <= 1e-7, worst, 1e-7, ""});
        } else if (beta_kind == "trace") {
            FluxVariation fv = flux_variation_check(bm.cx, bm.gamma, beta0, beta1, pol.lambda,
                                                    pol.theta, step);
            rep.results["variation"] = Json{
                {"dlog_combined", complex_json(fv.dlog_combined)},
                {"supertrace", complex_json(fv.supertrace)},
                {"residual_combined", fv.residual_combined},
                {"step", fv.h}};
            double tol = 1e-3 * std::max(1.0, std::abs(strace));
            rep.suite.push_back({"log-derivative drift equals minus the supertrace",
                                 fv.residual_combined <= tol, fv.residual_combined, tol, ""});
        } else {
            throw ConfigError("deform beta must be 'supertraceless' or 'trace'");
        }
        return rep;
    }

    throw ConfigError("deform mode must be 'metric' or 'flux'");
}

// ---------------------------------------------------------------------------
// dual: refined-torsion duality, the duality-phase chain, RS duality.

Report cmd_dual(const RunConfig& rc) {
    Report rep;
    rep.command = "dual";
    rep.backend = rc.backend;
    rep.seed = rc.seed;

    if (rc.backend == "exact") {
        // Exact duality on a random rational complex with metric.
        if (!rc.model.is_object() || rc.model.value("type", std::string{}) != "random")
            throw ConfigError("dual with the exact backend needs a random model");
        const Json& m = rc.model;
        if (!rc.seed_given && !m.contains("seed"))
            throw ConfigError("random model: a seed is required");
        std::uint64_t seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : rc.seed;
        std::size_t n0 = m.value("n0", std::size_t{3}), n1 = m.value("n1", std::size_t{3});
        std::size_t r0 = m.value("r0", std::size_t{1}), r1 = m.value("r1", std::size_t{1});
        SplitMix64 rng(seed);
        Z2Complex<ExactPolicy> cx = random_exact_z2complex(rng, n0, n1, r0, r1, true);
        Chirality<ExactPolicy> gam = random_exact_chirality(rng, cx);
        Z2Complex<ExactPolicy> dl = dual_complex(cx);
        Chirality<ExactPolicy> gd = dual_chirality(cx, gam);
        Decomposition<ExactPolicy> dec = decompose(cx), decd = decompose(dl);
        GQ lhs = refined_torsion(dl, gd, decd).coeff;
        GQ rhs = alpha_on_cohomology(cx, dec, dl, decd, refined_torsion(cx, gam, dec)).coeff;
        bool equal = lhs == rhs;
        rep.results["model"] = Json{{"type", "random"}, {"seed", seed}, {"n0", n0},
                                    {"n1", n1},         {"r0", r0},    {"r1", r1}};
        rep.results["rho_dual"] = complex_json(to_cx(lhs));
        rep.results["alpha_rho"] = complex_json(to_cx(rhs));
        rep.suite.push_back({"exact duality rho_{Gamma*} = alpha(rho)", equal,
                             equal ? 0.0 : 1.0, 0.0, ""});
        return rep;
    }

    BuiltModel bm = build_model(rc);
    if (!bm.cx.has_metric)
        throw ConfigError("command 'dual' needs a model with inner products");
    ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
    const double eta_triv = torus_eta_trivial_or_config(rc, bm);
    rep.results["model"] = bm.echo;
    rep.results["lambda"] = pol.lambda;
    rep.results["theta"] = pol.theta;

    // Refined-torsion duality.
    {
        Z2Complex<NumPolicy> dl = dual_complex(bm.cx);
        Chirality<NumPolicy> gd = dual_chirality(bm.cx, bm.gamma);
        Decomposition<NumPolicy> dec = decompose(bm.cx), decd = decompose(dl);
        Cx lhs = refined_torsion(dl, gd, decd).coeff;
        Cx rhs =
            alpha_on_cohomology(bm.cx, dec, dl, decd, refined_torsion(bm.cx, bm.gamma, dec)).coeff;
        double r = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        rep.results["rho_duality"] =
            Json{{"rho_dual", complex_json(lhs)}, {"alpha_rho", complex_json(rhs)}};
        rep.suite.push_back({"refined torsion duality rho_{Gamma*} = alpha(rho)", r <= 1e-9,
                             r, 1e-9, ""});
    }

    // Duality-phase chain for rho_an.
    {
        long rank = bm.is_torus ? bm.tcfg.rank : rc.rank;
        DualityChain ch = duality_chain_check(bm.cx, bm.gamma, pol.lambda, pol.theta, eta_triv,
                                              rank);
        rep.results["duality_chain"] = Json{
            {"rho_an", scalar_json(ch.rho.coeff)},
            {"rho_an_dual", scalar_json(ch.rho_dual.coeff)},
            {"alpha_rho_an", complex_json(ch.alpha_rho)},
            {"eta_above_lambda", ch.eta_window},
            {"d_minus", ch.d_minus},
            {"d_minus_dual", ch.d_minus_dual},
            {"theta", ch.theta},
            {"theta_dual", ch.theta_dual},
            {"residual", ch.residual},
            {"dminus_free_discrepancy", ch.theorem_discrepancy}};
        double r = ch.residual / ch.scale;
        rep.suite.push_back({"duality-phase chain for rho_an", r <= 1e-8, r, 1e-8, ""});
    }

    // Ray-Singer window-torsion duality.
    {
        RSDuality d = rs_duality_check(bm.cx, pol.lambda);
        rep.results["rs_duality"] = Json{{"log_primal", d.log_primal},
                                         {"log_dual", d.log_dual},
                                         {"residual", d.residual}};
        rep.suite.push_back({"Ray-Singer window torsion agrees with the dual", d.residual <= 1e-9,
                             d.residual, 1e-9, ""});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// rsnorm: the Ray-Singer metric self-test and the norm of rho_an.

Report cmd_rsnorm(const RunConfig& rc) {
    Report rep;
    rep.command = "rsnorm";
    rep.backend = "float";
    rep.seed = rc.seed;
    if (rc.backend == "exact")
        throw ConfigError("command 'rsnorm' runs on the float backend");
    BuiltModel bm = build_model(rc);
    if (!bm.cx.has_metric)
        throw ConfigError("command 'rsnorm' needs a model with inner products");
    ResolvedPolicy pol = resolve_policy(rc, bm.cx, bm.gamma);
    const double eta_triv = torus_eta_trivial_or_config(rc, bm);
    rep.results["model"] = bm.echo;
    rep.results["lambda"] = pol.lambda;
    rep.results["theta"] = pol.theta;

    // The canonical window element has Ray-Singer norm 1 by construction.
    {
        DetElement<NumPolicy> mw = mathai_wu_element(bm.cx);
        LaplacianData L = laplacian(bm.cx);
        Decomposition<NumPolicy> dec = decompose(bm.cx);
        RSNorm n = rs_metric_norm(L, dec, TorsionScalar::from_complex(mw.coeff), pol.lambda);
        double r = std::abs(n.value() - 1.0);
        rep.results["canonical_element_norm"] = n.value();
        rep.suite.push_back({"canonical window element has unit RS norm", r <= 1e-10, r,
                             1e-10, ""});
    }

    // Norm of rho_an against the predicted value.
    {
        long rank = bm.is_torus ? bm.tcfg.rank : rc.rank;
        RhoNormComparison cmp =
            rs_norm_of_rho_an(bm.cx, bm.gamma, pol.lambda, pol.theta, eta_triv, rank);
        bool hermitian = chirality_self_adjoint(bm.cx, bm.gamma, 1e-8);
        double tol = hermitian ? 1e-8 : 1e-7;
        double r = std::abs(cmp.norm - cmp.predicted) / std::max(1.0, cmp.predicted);
        rep.results["rho_an_norm"] = Json{{"norm", cmp.norm},
                                          {"predicted", cmp.predicted},
                                          {"hermitian", hermitian},
                                          {"eta", eta_json(cmp.eta)}};
        rep.suite.push_back({"RS norm of rho_an matches the prediction", r <= tol, r, tol, ""});
    }
    return rep;
}

// ---------------------------------------------------------------------------

Report dispatch(const RunConfig& rc) {
    logline("command: " + rc.command + " (backend " + rc.backend + ", seed " +
            std::to_string(rc.seed) + ")");
    Report rep;
    if (rc.command == "verify")
        rep = cmd_verify(rc);
    else if (rc.command == "torsion")
        rep = cmd_torsion(rc);
    else if (rc.command == "torus")
        rep = cmd_torus(rc);
    else if (rc.command == "deform")
        rep = cmd_deform(rc);
    else if (rc.command == "dual")
        rep = cmd_dual(rc);
    else if (rc.command == "rsnorm")
        rep = cmd_rsnorm(rc);
    else
        throw ConfigError("unknown command: '" + rc.command + "'");

    // Echo the effective configuration.
    Json inputs;
    inputs["command"] = rc.command;
    inputs["backend"] = rc.backend;
    inputs["seed"] = rc.seed;
    if (!rc.lambdas.empty()) inputs["lambda"] = rc.lambdas;
    if (rc.theta) inputs["theta"] = *rc.theta;
    else inputs["theta"] = "auto";
    if (rc.count) inputs["count"] = rc.count;
    if (!rc.fixture.empty()) inputs["fixture"] = rc.fixture;
    if (rc.eta_trivial_given) inputs["eta_trivial"] = rc.eta_trivial;
    if (!rc.model.is_null()) inputs["model"] = rc.model;
    if (!rc.deform.is_null()) inputs["deform"] = rc.deform;
    inputs["jobs"] = rc.jobs;
    rep.inputs = std::move(inputs);
    rep.seed = rc.seed;
    return rep;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-dimensional laboratory for refined torsion and eta invariants"};
    std::string config_path, command, backend, lambda_csv, theta_str, out_path, fixture;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::size_t> count;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--command", command, "verify|torsion|torus|deform|dual|rsnorm");
    app.add_option("--seed", seed, "base PRNG seed (splitmix64)");
    app.add_option("--backend", backend, "exact|float")->check(CLI::IsMember({"exact", "float"}));
    app.add_option("--lambda", lambda_csv, "comma-separated spectral cuts");
    app.add_option("--theta", theta_str, "'auto' or an Agmon angle in (-pi, 0)");
    app.add_option("--out", out_path, "write the report here instead of stdout");
    app.add_option("--jobs", jobs, "worker threads for instance loops");
    app.add_option("--count", count, "instance count for the verify suites");
    app.add_option("--fixture", fixture, "test hook: inject a known-bad expectation");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        RunConfig rc = resolve_config(config_path, command, seed, backend, lambda_csv,
                                      theta_str, out_path, jobs, count, fixture);
        Report rep = dispatch(rc);
        const std::string bytes = rep.to_string();
        if (!rc.out_path.empty()) {
            std::ofstream out(rc.out_path);
            if (!out) throw ConfigError("cannot open output file: " + rc.out_path);
            out << bytes;
        } else {
            std::cout << bytes;
        }
        logline(rep.all_pass() ? "all checks passed" : "a check failed");
        return rep.all_pass() ? 0 : 1;
    } catch (const NumericalRefusal& e) {
        std::cerr << "numerical refusal: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
