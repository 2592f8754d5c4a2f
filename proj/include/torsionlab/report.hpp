#pragma once
// Structured run reports.
//
// Reports are JSON documents with a fixed key order and no timestamps,
// hostnames, or other machine state, so a given (config, seed, version)
// triple reproduces the same bytes on every run.  Doubles go through the
// JSON library's shortest-round-trip formatter, which is deterministic for
// identical bit patterns.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "torsionlab/numeric.hpp"
#include "torsionlab/signature.hpp"

namespace torsionlab {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

inline Json complex_json(const Cx& z) {
    return Json{{"re", z.real()}, {"im", z.imag()}};
}

inline Json scalar_json(const TorsionScalar& s) {
    return Json{{"log_modulus", s.log_modulus}, {"phase", s.phase}};
}

inline Json eta_json(const EtaResult& e) {
    return Json{{"positive", e.positive}, {"negative", e.negative},
                {"m_plus", e.m_plus},     {"m_minus", e.m_minus},
                {"m_zero", e.m_zero},     {"eta0", e.eta0()},
                {"eta", e.eta()},         {"axis_warning", e.axis_warning}};
}

// Per-window spectrum summary of the squared signature operator: window
// bounds, dimension, and the modulus range of the eigenvalues it holds.
inline Json spectra_json(const SignatureData& sig) {
    Json out = Json::array();
    for (std::size_t w = 0; w < sig.window_count(); ++w) {
        Json row;
        const SpectralWindow& win = sig.split[0].windows[w];
        row["window"] = w;
        row["lo"] = win.lo;
        if (win.unbounded)
            row["hi"] = nullptr;
        else
            row["hi"] = win.hi;
        for (int k = 0; k < 2; ++k) {
            const SpectralWindow& wk = sig.split[static_cast<std::size_t>(k)].windows[w];
            Json side;
            side["dim"] = wk.dim();
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (const Cx& mu : wk.eigenvalues) {
                double m = std::abs(mu);
                lo = first ? m : std::min(lo, m);
                hi = first ? m : std::max(hi, m);
                first = false;
            }
            if (!first) {
                side["min_abs"] = lo;
                side["max_abs"] = hi;
            }
            row[k == 0 ? "even" : "odd"] = std::move(side);
        }
        out.push_back(std::move(row));
    }
    return out;
}

// One asserted check inside a command: a name, the worst residual observed,
// and whether it stayed within the pinned tolerance.
struct SuiteRow {
    std::string name;
    bool pass = false;
    double residual = 0.0;
    double tolerance = 0.0;
    std::string detail; // optional: counterexample or context
};

struct Report {
    std::string command;
    std::string backend = "float";
    std::uint64_t seed = 0;
    Json inputs;  // effective configuration echo
    Json results; // command-specific payload
    std::vector<SuiteRow> suite;

    bool all_pass() const {
        for (const SuiteRow& r : suite)
            if (!r.pass) return false;
        return true;
    }

    Json to_json() const {
        Json j;
        j["version"] = kToolVersion;
        j["command"] = command;
        j["backend"] = backend;
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["results"] = results;
        Json rows = Json::array();
        for (const SuiteRow& r : suite) {
            Json row{{"name", r.name},
                     {"pass", r.pass},
                     {"residual", r.residual},
                     {"tolerance", r.tolerance}};
            if (!r.detail.empty()) row["detail"] = r.detail;
            rows.push_back(std::move(row));
        }
        j["suite"] = std::move(rows);
        j["pass"] = all_pass();
        return j;
    }

    std::string to_string() const { return to_json().dump(2) + "\n"; }
};

} // namespace torsionlab
