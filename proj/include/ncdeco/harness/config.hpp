#pragma once

// Scenario configuration and its JSON form.

#include "ncdeco/core.hpp"
#include "ncdeco/model.hpp"
#include "ncdeco/operators.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace ncdeco {

using json = nlohmann::json;

enum class InitialKind { cat_pair, position_cat, momentum_cat, custom, random };

struct InitialStateSpec {
    InitialKind kind = InitialKind::cat_pair;
    std::array<int, 2> indices{0, 56};
    std::vector<cplx> amplitudes;  // custom system state in the number basis
    EnvInitial environment = EnvInitial::ground;
};

struct TimeSpec {
    double t_end = 50.0;
    double dt = 0.02;
    // Divide dt and t_end by max(1, ||H_int(B)|| / ||H_int(0)||).
    bool rescale_with_coupling = false;
};

struct DiagnosticsSpec {
    std::vector<std::string> bases{"position", "momentum"};
    double bin_width = 1.0;
};

struct OutputSpec {
    std::string directory = "out";
    std::string prefix = "run";
};

struct ScenarioConfig {
    HilbertSpec hilbert;
    NCParams params;
    CouplingMatrices couplings;
    FieldSchedule schedule;
    SystemHamiltonianSpec system;
    InitialStateSpec initial;
    TimeSpec time;
    DiagnosticsSpec diagnostics;
    OutputSpec output;
    std::vector<double> sweep_B;
    std::vector<double> reveal_thetas;
    std::uint64_t seed = 0;

    void validate() const {
        hilbert.validate();
        params.validate();
        try {
            couplings.validate();
            schedule.validate();
        } catch (const Error& e) {
            throw Error("config", e.what());
        }
        if (!(time.t_end > 0.0) || !std::isfinite(time.t_end)) throw Error("config", "time.t_end must be > 0");
        if (!(time.dt > 0.0)) throw Error("config", "time.dt must be > 0");
        if (time.dt > time.t_end / 10.0 * (1.0 + 1e-12)) throw Error("config", "time.dt must be <= t_end/10");
        if (time.rescale_with_coupling && schedule.segments.size() > 1) {
            throw Error("config", "time.rescale_with_coupling needs a single-segment field schedule");
        }
        const auto n = hilbert.system_dim();
        switch (initial.kind) {
            case InitialKind::cat_pair:
            case InitialKind::position_cat:
            case InitialKind::momentum_cat:
                for (int i : initial.indices)
                    if (i < 0 || i >= n) {
                        throw Error("config", "cat index " + std::to_string(i) + " outside [0, " +
                                                  std::to_string(n) + ")");
                    }
                if (initial.indices[0] == initial.indices[1]) throw Error("config", "cat indices must differ");
                break;
            case InitialKind::custom: {
                if (static_cast<std::int64_t>(initial.amplitudes.size()) != n) {
                    throw Error("config", "custom initial state needs " + std::to_string(n) + " amplitudes");
                }
                double norm2 = 0.0;
                for (const auto& a : initial.amplitudes) norm2 += std::norm(a);
                if (!(norm2 > 0.0)) throw Error("config", "custom initial state is zero");
                break;
            }
            case InitialKind::random: break;
        }
        if (diagnostics.bases.empty()) throw Error("config", "diagnostics.bases is empty");
        for (const auto& b : diagnostics.bases)
            if (b != "position" && b != "momentum") throw Error("config", "unknown basis '" + b + "'");
        if (!(diagnostics.bin_width > 0.0)) throw Error("config", "diagnostics.bin_width must be > 0");
        if (output.prefix.empty()) throw Error("config", "output.prefix is empty");
    }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw Error("config", where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw Error("config", "unknown key '" + key + "' in " + where);
    }
}

inline Eigen::Matrix2d read_matrix2(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw Error("config", what + " must be a 2x2 array");
    Eigen::Matrix2d m;
    for (int r = 0; r < 2; ++r) {
        if (!j[r].is_array() || j[r].size() != 2) throw Error("config", what + " must be a 2x2 array");
        for (int c = 0; c < 2; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline json write_matrix2(const Eigen::Matrix2d& m) {
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

inline const char* kind_name(InitialKind k) {
    switch (k) {
        case InitialKind::cat_pair: return "cat_pair";
        case InitialKind::position_cat: return "position_cat";
        case InitialKind::momentum_cat: return "momentum_cat";
        case InitialKind::custom: return "custom";
        case InitialKind::random: return "random";
    }
    return "cat_pair";
}

inline const char* kind_name(SystemKind k) {
    switch (k) {
        case SystemKind::none: return "none";
        case SystemKind::harmonic: return "harmonic";
        case SystemKind::free: return "free";
        case SystemKind::landau: return "landau";
    }
    return "harmonic";
}

inline const char* kind_name(EnvInitial k) {
    switch (k) {
        case EnvInitial::ground: return "ground";
        case EnvInitial::excited: return "excited";
        case EnvInitial::plus: return "plus";
    }
    return "ground";
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& j) {
    ScenarioConfig cfg;
    try {
        detail::reject_unknown(j,
                               {"hilbert", "nc_params", "couplings", "field_schedule", "system_hamiltonian",
                                "initial_state", "time", "diagnostics", "output", "sweep", "reveal", "seed"},
                               "config");
        if (j.contains("hilbert")) {
            const auto& h = j["hilbert"];
            detail::reject_unknown(h, {"d_axis", "env_banks", "max_composite_dim"}, "hilbert");
            cfg.hilbert.d_axis = h.value("d_axis", cfg.hilbert.d_axis);
            cfg.hilbert.max_composite_dim = h.value("max_composite_dim", cfg.hilbert.max_composite_dim);
            if (h.contains("env_banks")) {
                cfg.hilbert.env_banks.clear();
                for (const auto& b : h["env_banks"]) {
                    detail::reject_unknown(b, {"label", "qubits", "omega"}, "hilbert.env_banks[]");
                    const auto label = b.at("label").get<std::string>();
                    if (label.size() != 1) throw Error("config", "bank label must be 'C' or 'D'");
                    cfg.hilbert.env_banks.push_back({label[0], b.value("qubits", 2), b.value("omega", 1.0)});
                }
            }
        }
        if (j.contains("nc_params")) {
            const auto& p = j["nc_params"];
            detail::reject_unknown(p, {"theta", "sigma", "hbar", "e"}, "nc_params");
            cfg.params.theta = p.value("theta", 0.0);
            cfg.params.sigma = p.value("sigma", 0.0);
            cfg.params.hbar = p.value("hbar", 1.0);
            cfg.params.charge_e = p.value("e", 1.0);
        }
        if (!j.contains("couplings")) throw Error("config", "missing 'couplings'");
        {
            const auto& c = j["couplings"];
            detail::reject_unknown(c, {"g", "f"}, "couplings");
            if (c.contains("g")) cfg.couplings.g = detail::read_matrix2(c["g"], "couplings.g");
            if (c.contains("f")) cfg.couplings.f = detail::read_matrix2(c["f"], "couplings.f");
        }
        if (j.contains("field_schedule")) {
            const auto& fs = j["field_schedule"];
            cfg.schedule.segments.clear();
            if (fs.is_number()) {
                cfg.schedule = FieldSchedule::constant(fs.get<double>());
            } else {
                if (!fs.is_array()) throw Error("config", "field_schedule must be a number or a list of segments");
                for (const auto& s : fs) {
                    detail::reject_unknown(s, {"t_start", "B"}, "field_schedule[]");
                    cfg.schedule.segments.push_back({s.value("t_start", 0.0), s.at("B").get<double>()});
                }
            }
        }
        if (j.contains("system_hamiltonian")) {
            const auto& s = j["system_hamiltonian"];
            detail::reject_unknown(s, {"kind", "omega", "mass"}, "system_hamiltonian");
            const auto kind = s.value("kind", std::string("harmonic"));
            if (kind == "none") cfg.system.kind = SystemKind::none;
            else if (kind == "harmonic") cfg.system.kind = SystemKind::harmonic;
            else if (kind == "free") cfg.system.kind = SystemKind::free;
            else if (kind == "landau" || kind == "landau_toggle") cfg.system.kind = SystemKind::landau;
            else throw Error("config", "unknown system_hamiltonian.kind '" + kind + "'");
            cfg.system.omega = s.value("omega", 1.0);
            cfg.system.mass = s.value("mass", 1.0);
        }
        if (j.contains("initial_state")) {
            const auto& s = j["initial_state"];
            detail::reject_unknown(s, {"kind", "indices", "amplitudes", "environment"}, "initial_state");
            const auto kind = s.value("kind", std::string("cat_pair"));
            if (kind == "cat_pair") cfg.initial.kind = InitialKind::cat_pair;
            else if (kind == "position_cat") cfg.initial.kind = InitialKind::position_cat;
            else if (kind == "momentum_cat") cfg.initial.kind = InitialKind::momentum_cat;
            else if (kind == "custom") cfg.initial.kind = InitialKind::custom;
            else if (kind == "random") cfg.initial.kind = InitialKind::random;
            else throw Error("config", "unknown initial_state.kind '" + kind + "'");
            if (s.contains("indices")) {
                const auto& idx = s["indices"];
                if (!idx.is_array() || idx.size() != 2) throw Error("config", "initial_state.indices needs 2 entries");
                cfg.initial.indices = {idx[0].get<int>(), idx[1].get<int>()};
            }
            if (s.contains("amplitudes")) {
                for (const auto& a : s["amplitudes"]) {
                    if (a.is_number()) cfg.initial.amplitudes.emplace_back(a.get<double>(), 0.0);
                    else if (a.is_array() && a.size() == 2) cfg.initial.amplitudes.emplace_back(a[0].get<double>(), a[1].get<double>());
                    else throw Error("config", "amplitude must be a number or [re, im]");
                }
            }
            const auto env = s.value("environment", std::string("ground"));
            if (env == "ground") cfg.initial.environment = EnvInitial::ground;
            else if (env == "excited") cfg.initial.environment = EnvInitial::excited;
            else if (env == "plus") cfg.initial.environment = EnvInitial::plus;
            else throw Error("config", "unknown initial_state.environment '" + env + "'");
        }
        if (j.contains("time")) {
            const auto& t = j["time"];
            detail::reject_unknown(t, {"t_end", "dt", "rescale_with_coupling"}, "time");
            cfg.time.t_end = t.value("t_end", cfg.time.t_end);
            cfg.time.dt = t.value("dt", cfg.time.dt);
            cfg.time.rescale_with_coupling = t.value("rescale_with_coupling", false);
        }
        if (j.contains("diagnostics")) {
            const auto& d = j["diagnostics"];
            detail::reject_unknown(d, {"bases", "bin_width"}, "diagnostics");
            if (d.contains("bases")) cfg.diagnostics.bases = d["bases"].get<std::vector<std::string>>();
            cfg.diagnostics.bin_width = d.value("bin_width", cfg.diagnostics.bin_width);
        }
        if (j.contains("output")) {
            const auto& o = j["output"];
            detail::reject_unknown(o, {"dir", "prefix"}, "output");
            cfg.output.directory = o.value("dir", cfg.output.directory);
            cfg.output.prefix = o.value("prefix", cfg.output.prefix);
        }
        if (j.contains("sweep")) {
            detail::reject_unknown(j["sweep"], {"B_values"}, "sweep");
            cfg.sweep_B = j["sweep"].value("B_values", std::vector<double>{});
        }
        if (j.contains("reveal")) {
            detail::reject_unknown(j["reveal"], {"thetas"}, "reveal");
            cfg.reveal_thetas = j["reveal"].value("thetas", std::vector<double>{});
        }
        cfg.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw Error("config", e.what());
    }
    cfg.validate();
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config", "cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("config", path + ": " + e.what());
    }
    return parse_config(j);
}

inline json to_json(const ScenarioConfig& cfg) {
    json banks = json::array();
    for (const auto& b : cfg.hilbert.env_banks)
        banks.push_back({{"label", std::string(1, b.label)}, {"qubits", b.qubit_count}, {"omega", b.omega}});
    json segments = json::array();
    for (const auto& s : cfg.schedule.segments) segments.push_back({{"t_start", s.t_start}, {"B", s.B}});
    json initial = {{"kind", detail::kind_name(cfg.initial.kind)},
                    {"indices", cfg.initial.indices},
                    {"environment", detail::kind_name(cfg.initial.environment)}};
    if (!cfg.initial.amplitudes.empty()) {
        json amps = json::array();
        for (const auto& a : cfg.initial.amplitudes) amps.push_back({a.real(), a.imag()});
        initial["amplitudes"] = amps;
    }
    json out = {
        {"hilbert", {{"d_axis", cfg.hilbert.d_axis}, {"env_banks", banks}, {"max_composite_dim", cfg.hilbert.max_composite_dim}}},
        {"nc_params", {{"theta", cfg.params.theta}, {"sigma", cfg.params.sigma}, {"hbar", cfg.params.hbar}, {"e", cfg.params.charge_e}}},
        {"couplings", {{"g", detail::write_matrix2(cfg.couplings.g)}, {"f", detail::write_matrix2(cfg.couplings.f)}}},
        {"field_schedule", segments},
        {"system_hamiltonian", {{"kind", detail::kind_name(cfg.system.kind)}, {"omega", cfg.system.omega}, {"mass", cfg.system.mass}}},
        {"initial_state", initial},
        {"time", {{"t_end", cfg.time.t_end}, {"dt", cfg.time.dt}, {"rescale_with_coupling", cfg.time.rescale_with_coupling}}},
        {"diagnostics", {{"bases", cfg.diagnostics.bases}, {"bin_width", cfg.diagnostics.bin_width}}},
        {"output", {{"dir", cfg.output.directory}, {"prefix", cfg.output.prefix}}},
        {"seed", cfg.seed},
    };
    if (!cfg.sweep_B.empty()) out["sweep"] = {{"B_values", cfg.sweep_B}};
    if (!cfg.reveal_thetas.empty()) out["reveal"] = {{"thetas", cfg.reveal_thetas}};
    return out;
}

}  // namespace ncdeco
