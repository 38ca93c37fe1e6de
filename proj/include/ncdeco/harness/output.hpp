#pragma once

// Trace CSV and summary JSON writers, plus the trace reader used for round trips.

#include "ncdeco/diagnostics.hpp"
#include "ncdeco/harness/config.hpp"
#include "ncdeco/harness/scenario.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ncdeco {

inline constexpr const char* kTraceHeader = "t,coh_q_raw,coh_q_norm,coh_k_raw,coh_k_norm,purity,B";

/// tau rounded to 6 significant digits, or the string "none".
inline json render_tau(const std::optional<double>& tau) {
    if (!tau) return "none";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *tau);
    return std::stod(buf);
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("output", "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path);
    if (!out) throw Error("output", "cannot open '" + path.string() + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error("output", "write to '" + path.string() + "' failed");
}

inline const BasisTrace* find_basis(const CoherenceTrace& trace, const std::string& label) {
    for (const auto& b : trace.bases)
        if (b.label == label) return &b;
    return nullptr;
}

inline std::string cell(const BasisTrace* b, const std::vector<double> BasisTrace::*member, std::size_t i) {
    if (!b || i >= (b->*member).size()) return "nan";
    return fmt17((b->*member)[i]);
}

inline json coefficients_json(const EffectiveCoefficients& c) {
    return {{"c_qg", c.c_qg}, {"c_qf", c.c_qf}, {"c_kf", c.c_kf}, {"c_kg", c.c_kg}};
}

}  // namespace detail

inline void write_trace(const CoherenceTrace& trace, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << kTraceHeader << '\n';
    const auto* q = detail::find_basis(trace, "position");
    const auto* k = detail::find_basis(trace, "momentum");
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        out << detail::fmt17(trace.times[i]) << ',' << detail::cell(q, &BasisTrace::raw, i) << ','
            << detail::cell(q, &BasisTrace::norm, i) << ',' << detail::cell(k, &BasisTrace::raw, i) << ','
            << detail::cell(k, &BasisTrace::norm, i) << ','
            << (i < trace.purity.size() ? detail::fmt17(trace.purity[i]) : "nan") << ','
            << (i < trace.field.size() ? detail::fmt17(trace.field[i]) : "nan") << '\n';
    }
    detail::finish(out, path);
}

/// Reads a trace written by write_trace; bases are labelled position / momentum.
inline CoherenceTrace parse_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("output", "cannot open trace '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) {
        throw Error("output", "'" + path.string() + "' does not start with the trace header");
    }
    CoherenceTrace trace;
    trace.bases = {BasisTrace{"position", {}, {}}, BasisTrace{"momentum", {}, {}}};
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                v.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw Error("output", path.string() + ":" + std::to_string(row) + ": bad number '" + tok + "'");
            }
        }
        if (v.size() != 7) throw Error("output", path.string() + ":" + std::to_string(row) + ": expected 7 columns");
        trace.times.push_back(v[0]);
        trace.bases[0].raw.push_back(v[1]);
        trace.bases[0].norm.push_back(v[2]);
        trace.bases[1].raw.push_back(v[3]);
        trace.bases[1].norm.push_back(v[4]);
        trace.purity.push_back(v[5]);
        trace.field.push_back(v[6]);
    }
    return trace;
}

inline json summary_json(const ScenarioReport& rep, const std::string& trace_file) {
    json bases = json::object();
    for (const auto& b : rep.bases) {
        json entry = {{"tau_D", render_tau(b.estimate.tau_d)}, {"method", b.estimate.method}};
        if (!b.note.empty()) entry["note"] = b.note;
        bases[b.label] = entry;
    }
    json segments = json::array();
    for (const auto& s : rep.segments) {
        segments.push_back({{"t_start", s.t_start},
                            {"B", s.B},
                            {"coefficients", detail::coefficients_json(s.coefficients)},
                            {"pointer_residual", {{"position", s.residual_position}, {"momentum", s.residual_momentum}}}});
    }
    return {
        {"config", to_json(rep.config)},
        {"seed", rep.config.seed},
        {"trace_file", trace_file},
        {"samples", rep.trace.times.size()},
        {"decoherence", bases},
        {"segments", segments},
        {"macroscopic", {{"norm_main", rep.macroscopic.norm_main},
                         {"norm_residual", rep.macroscopic.norm_residual},
                         {"bin_width", rep.config.diagnostics.bin_width},
                         {"max_block_deviation", rep.sector_max_deviation},
                         {"degenerate_bins", rep.sector_degenerate_warning},
                         {"von_neumann_factor", 60}}},
        {"recurrence_time", rep.recurrence_time},
        {"time_scale", rep.time_scale},
        {"t_end_used", rep.t_end_used},
        {"dt_used", rep.dt_used},
        {"hygiene", {{"max_unitarity_error", rep.stats.max_unitarity_error},
                     {"max_norm_drift", rep.stats.max_norm_drift},
                     {"min_purity", rep.trace.times.empty() ? json(nullptr) : json(rep.hygiene.min_purity)},
                     {"max_purity", rep.trace.times.empty() ? json(nullptr) : json(rep.hygiene.max_purity)},
                     {"max_trace_error", rep.hygiene.max_trace_error}}},
        {"wall_seconds", rep.wall_seconds},
    };
}

inline void write_json(const json& j, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
    detail::finish(out, path);
}

struct EmittedFiles {
    std::filesystem::path trace;
    std::filesystem::path summary;
};

/// Writes <dir>/<prefix>_trace.csv and <dir>/<prefix>_summary.json.
inline EmittedFiles emit_results(const ScenarioReport& rep, const std::filesystem::path& dir) {
    EmittedFiles f{dir / (rep.config.output.prefix + "_trace.csv"), dir / (rep.config.output.prefix + "_summary.json")};
    write_trace(rep.trace, f.trace);
    write_json(summary_json(rep, f.trace.filename().string()), f.summary);
    return f;
}

inline json sweep_summary_json(const SweepReport& rep, const std::string& prefix) {
    json points = json::array();
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const auto& p = rep.points[i];
        points.push_back({{"B", p.config.schedule.segments.front().B},
                          {"tau_D_position", render_tau(p.tau("position"))},
                          {"tau_D_momentum", render_tau(p.tau("momentum"))},
                          {"summary_file", point_prefix(prefix, i) + "_summary.json"}});
    }
    json out = {{"points", points}, {"classification_status", rep.classification_status}, {"wall_seconds", rep.wall_seconds}};
    if (rep.classification) {
        out["classification"] = to_string(rep.classification->regime);
        out["rationale"] = rep.classification->rationale;
    } else {
        out["classification"] = "unavailable";
    }
    if (rep.crossover) {
        out["crossover"] = {{"B_star", rep.crossover->B_star},
                            {"bracket", {rep.crossover->bracket_low, rep.crossover->bracket_high}},
                            {"interpolated", rep.crossover->interpolated}};
    } else {
        out["crossover"] = "none";
    }
    return out;
}

inline std::filesystem::path emit_sweep(const SweepReport& rep, const std::string& prefix, const std::filesystem::path& dir) {
    for (const auto& p : rep.points) emit_results(p, dir);
    const auto path = dir / (prefix + "_sweep_summary.json");
    write_json(sweep_summary_json(rep, prefix), path);
    return path;
}

inline std::filesystem::path emit_reveal(const RevealReport& rep, const std::filesystem::path& dir) {
    emit_results(rep.main, dir);
    for (const auto& r : rep.theta_runs) emit_results(r, dir);
    json thetas = json::array();
    for (std::size_t i = 0; i < rep.thetas.size(); ++i) {
        thetas.push_back({{"theta", rep.thetas[i]},
                          {"B", rep.theta_runs[i].config.schedule.segments.front().B},
                          {"tau_D_position", render_tau(rep.tau_q[i])}});
    }
    const json out = {{"B", rep.B},
                      {"coefficients", detail::coefficients_json(rep.coefficients)},
                      {"g_channel_norm", rep.g_channel_norm},
                      {"g_scaling_change", rep.g_scaling_change},
                      {"tau_D_position", render_tau(rep.main.tau("position"))},
                      {"summary_file", rep.main.config.output.prefix + "_summary.json"},
                      {"theta_sweep", thetas}};
    const auto path = dir / (rep.main.config.output.prefix + "_reveal_summary.json");
    write_json(out, path);
    return path;
}

}  // namespace ncdeco
