#pragma once

// End-to-end scenario runs: single field schedule, B-sweeps with regime
// classification, and the run at B = 4/(e theta).

#include "ncdeco/diagnostics.hpp"
#include "ncdeco/dynamics.hpp"
#include "ncdeco/harness/config.hpp"
#include "ncdeco/model.hpp"
#include "ncdeco/operators.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ncdeco {

struct BasisReport {
    std::string label;
    DecoherenceEstimate estimate;
    std::string note;  // set when the basis carries no initial coherence
};

struct SegmentReport {
    double t_start = 0.0;
    double B = 0.0;
    EffectiveCoefficients coefficients;
    double residual_position = 0.0;
    double residual_momentum = 0.0;
};

/// Extremes of the reduced-state checks over all snapshots.
struct Hygiene {
    double min_purity = std::numeric_limits<double>::infinity();
    double max_purity = -std::numeric_limits<double>::infinity();
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;

    void record(const Matrix& rho) {
        const double p = rho.squaredNorm();
        min_purity = std::min(min_purity, p);
        max_purity = std::max(max_purity, p);
        max_trace_error = std::max(max_trace_error, std::abs(rho.trace() - cplx{1.0, 0.0}));
        max_hermiticity_error = std::max(max_hermiticity_error, hermiticity_error(rho));
    }

    void merge(const Hygiene& o) {
        min_purity = std::min(min_purity, o.min_purity);
        max_purity = std::max(max_purity, o.max_purity);
        max_trace_error = std::max(max_trace_error, o.max_trace_error);
        max_hermiticity_error = std::max(max_hermiticity_error, o.max_hermiticity_error);
    }
};

struct ScenarioReport {
    ScenarioConfig config;
    CoherenceTrace trace;
    std::vector<BasisReport> bases;
    std::vector<SegmentReport> segments;
    MacroscopicNorms macroscopic;
    double sector_max_deviation = 0.0;
    bool sector_degenerate_warning = false;
    double recurrence_time = 0.0;
    double time_scale = 1.0;  // dt and t_end were divided by this
    double t_end_used = 0.0;
    double dt_used = 0.0;
    EvolutionStats stats;
    Hygiene hygiene;
    double wall_seconds = 0.0;

    [[nodiscard]] const BasisReport* basis(const std::string& label) const {
        for (const auto& b : bases)
            if (b.label == label) return &b;
        return nullptr;
    }

    [[nodiscard]] std::optional<double> tau(const std::string& label) const {
        const auto* b = basis(label);
        return b ? b->estimate.tau_d : std::nullopt;
    }
};

/// Operators shared by every run with the same Hilbert space and parameters.
struct ModelContext {
    CanonicalOps ops;
    EnvSpec env;
    PointerBasisCandidate position;
    PointerBasisCandidate momentum;

    explicit ModelContext(const ScenarioConfig& cfg)
        : ops(build_canonical_ops(cfg.hilbert, cfg.params.hbar)),
          env(make_qubit_environment(cfg.hilbert, cfg.initial.environment)),
          position(make_position_basis(cfg.hilbert.d_axis, cfg.params.hbar)),
          momentum(make_momentum_basis(cfg.hilbert.d_axis, cfg.params.hbar)) {}
};

inline HamiltonianFactory make_hamiltonian_factory(const ScenarioConfig& cfg, const ModelContext& ctx) {
    return [&cfg, &ctx](double B) {
        const auto eff = build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, B);
        const auto hs = build_system_hamiltonian(cfg.system, ctx.ops, cfg.params, B);
        return assemble_total_hamiltonian(hs, ctx.env, eff);
    };
}

/// max(1, ||H_int(B)||_HS / ||H_int(0)||_HS) for the single segment field.
inline double coupling_time_scale(const ScenarioConfig& cfg, const ModelContext& ctx) {
    if (!cfg.time.rescale_with_coupling) return 1.0;
    const double B = cfg.schedule.segments.front().B;
    const double n0 = hs_norm(build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, 0.0).h_int_total.entries);
    const double nb = hs_norm(build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, B).h_int_total.entries);
    return n0 > 0.0 ? std::max(1.0, nb / n0) : 1.0;
}

namespace detail {

inline Vector cat_state(const PointerBasisCandidate& basis, const std::array<int, 2>& idx) {
    return (basis.vectors.col(idx[0]) + basis.vectors.col(idx[1])) / std::sqrt(2.0);
}

/// System initial states; two columns for cat_pair (position cat, momentum cat).
inline Matrix initial_system_states(const ScenarioConfig& cfg, const ModelContext& ctx) {
    const auto n = static_cast<Eigen::Index>(cfg.hilbert.system_dim());
    switch (cfg.initial.kind) {
        case InitialKind::cat_pair: {
            Matrix m(n, 2);
            m.col(0) = cat_state(ctx.position, cfg.initial.indices);
            m.col(1) = cat_state(ctx.momentum, cfg.initial.indices);
            return m;
        }
        case InitialKind::position_cat: return cat_state(ctx.position, cfg.initial.indices);
        case InitialKind::momentum_cat: return cat_state(ctx.momentum, cfg.initial.indices);
        case InitialKind::custom: {
            Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) v(i) = cfg.initial.amplitudes[static_cast<std::size_t>(i)];
            return v / v.norm();
        }
        case InitialKind::random: {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> gauss;
            Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx{gauss(rng), gauss(rng)};
            return v / v.norm();
        }
    }
    throw Error("harness", "unknown initial state kind");
}

}  // namespace detail

inline ScenarioReport run_scenario(const ScenarioConfig& cfg, const ModelContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ScenarioReport rep;
    rep.config = cfg;

    const auto ds = static_cast<Eigen::Index>(cfg.hilbert.system_dim());
    const auto de = ctx.env.dim();
    const auto factory = make_hamiltonian_factory(cfg, ctx);

    rep.time_scale = coupling_time_scale(cfg, ctx);
    rep.dt_used = cfg.time.dt / rep.time_scale;
    rep.t_end_used = cfg.time.t_end / rep.time_scale;

    const Matrix sys0 = detail::initial_system_states(cfg, ctx);
    Matrix initial(ds * de, sys0.cols());
    for (Eigen::Index c = 0; c < sys0.cols(); ++c) initial.col(c) = kron(sys0.col(c), ctx.env.initial_env_state);

    // Column that feeds each basis trace; purity follows column 0.
    const bool pair = cfg.initial.kind == InitialKind::cat_pair;
    std::vector<const PointerBasisCandidate*> bases;
    std::vector<Eigen::Index> source;
    for (const auto& label : cfg.diagnostics.bases) {
        const bool pos = label == "position";
        bases.push_back(pos ? &ctx.position : &ctx.momentum);
        source.push_back(pair && !pos ? 1 : 0);
        rep.trace.bases.push_back(BasisTrace{label, {}, {}});
    }

    const auto steps = static_cast<std::size_t>(std::floor(rep.t_end_used / rep.dt_used + 1e-9)) + 1;
    rep.trace.times.reserve(steps);
    rep.trace.purity.reserve(steps);
    rep.trace.field.reserve(steps);
    for (auto& b : rep.trace.bases) b.raw.reserve(steps);

    rep.stats = evolve_observed(
        initial, cfg.schedule, factory, rep.t_end_used, rep.dt_used, cfg.params.hbar,
        [&](std::int64_t, double t, double B, const Matrix& states) {
            rep.trace.times.push_back(t);
            rep.trace.field.push_back(B);
            for (Eigen::Index c = 0; c < states.cols(); ++c) {
                // Column-major map gives M(e, a) = psi[a*dE + e]; rho = M^T conj(M).
                const Eigen::Map<const Matrix> m(states.col(c).data(), de, ds);
                const Matrix a = m.transpose();
                const Matrix rho = a * a.adjoint();
                rep.hygiene.record(rho);
                if (c == 0) rep.trace.purity.push_back(rho.squaredNorm());
                for (std::size_t k = 0; k < bases.size(); ++k) {
                    if (source[k] != c) continue;
                    rep.trace.bases[k].raw.push_back(coherence_l1_factored(a, bases[k]->vectors));
                }
            }
        });
    rep.trace.normalize();

    for (const auto& bt : rep.trace.bases) {
        BasisReport br;
        br.label = bt.label;
        br.estimate.basis_label = bt.label;
        try {
            br.estimate = extract_decoherence_time(rep.trace, bt.label);
        } catch (const Error& e) {
            br.note = e.what();
        }
        rep.bases.push_back(std::move(br));
    }

    for (const auto& seg : cfg.schedule.segments) {
        if (seg.t_start > rep.t_end_used + 1e-12 && !rep.segments.empty()) break;
        SegmentReport sr;
        sr.t_start = seg.t_start;
        sr.B = seg.B;
        sr.coefficients = compute_effective_coefficients(cfg.params, seg.B);
        const auto eff = build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, seg.B);
        sr.residual_position = pointer_residual(eff.h_int_total, ctx.position, ds, de);
        sr.residual_momentum = pointer_residual(eff.h_int_total, ctx.momentum, ds, de);
        rep.segments.push_back(sr);
    }

    {
        const double B = cfg.schedule.segments.front().B;
        const auto eff = build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, B);
        std::array<SectorDecomposition, 2> sq, sk;
        for (int i = 0; i < 2; ++i) {
            sq[i] = coarse_grain_sectors(ctx.ops.q[i], cfg.diagnostics.bin_width);
            sk[i] = coarse_grain_sectors(ctx.ops.k[i], cfg.diagnostics.bin_width);
            for (const auto* s : {&sq[i], &sk[i]}) {
                rep.sector_max_deviation = std::max(rep.sector_max_deviation, s->max_block_deviation);
                rep.sector_degenerate_warning = rep.sector_degenerate_warning || s->degenerate_warning;
            }
        }
        rep.macroscopic = macroscopic_decomposition(eff, sq, sk);
    }
    rep.recurrence_time = recurrence_time_estimate(ctx.env, cfg.params.hbar);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

inline ScenarioReport run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const ModelContext ctx(cfg);
    return run_scenario(cfg, ctx);
}

struct SweepReport {
    std::vector<ScenarioReport> points;  // ascending in the order of the requested values
    std::optional<RegimeClassification> classification;
    std::string classification_status = "unavailable";
    std::optional<Crossover> crossover;
    double wall_seconds = 0.0;

    [[nodiscard]] std::vector<SweepPoint> sweep_points() const {
        std::vector<SweepPoint> out;
        for (const auto& p : points) {
            SweepPoint sp;
            sp.B = p.config.schedule.segments.front().B;
            if (const auto* b = p.basis("position")) sp.position = b->estimate;
            if (const auto* b = p.basis("momentum")) sp.momentum = b->estimate;
            out.push_back(sp);
        }
        return out;
    }
};

inline std::string point_prefix(const std::string& prefix, std::size_t i) {
    return prefix + "_p" + std::to_string(i);
}

inline RegimeThresholds default_thresholds(const ScenarioConfig& cfg) {
    RegimeThresholds th;
    th.charge_e = cfg.params.charge_e;
    th.field_scale = cfg.couplings.field_scale();
    return th;
}

/// One constant-field run per value, `workers` at a time, then classification.
inline SweepReport run_sweep(const ScenarioConfig& base, const std::vector<double>& values, int workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    if (values.empty()) throw Error("harness", "sweep needs at least one field value");
    base.validate();
    const ModelContext ctx(base);

    std::vector<ScenarioConfig> cfgs;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ScenarioConfig c = base;
        c.schedule = FieldSchedule::constant(values[i]);
        c.output.prefix = point_prefix(base.output.prefix, i);
        c.validate();
        cfgs.push_back(std::move(c));
    }

    SweepReport rep;
    rep.points.resize(values.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) {
            try {
                rep.points[i] = run_scenario(cfgs[i], ctx);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(cfgs.size())));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const auto points = rep.sweep_points();
    try {
        rep.classification = classify_regime(points, default_thresholds(base));
        rep.classification_status = "ok";
    } catch (const ClassificationUnavailable& e) {
        rep.classification_status = std::string("unavailable: ") + e.what();
    }
    rep.crossover = find_crossover(points);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct RevealReport {
    double B = 0.0;
    EffectiveCoefficients coefficients;
    double g_channel_norm = 0.0;      // ||E_i from g alone||_2 at the reveal field
    double g_scaling_change = 0.0;    // ||E_i(10 g) - E_i(g)||_2
    ScenarioReport main;
    std::vector<double> thetas;
    std::vector<std::optional<double>> tau_q;
    std::vector<ScenarioReport> theta_runs;
};

namespace detail {

inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline ScenarioConfig at_reveal_field(ScenarioConfig cfg) {
    if (cfg.params.theta == 0.0) throw Error("harness", "reveal needs theta != 0 (B = 4/(e theta) is undefined)");
    if (cfg.couplings.g.isZero(0.0) || cfg.couplings.f.isZero(0.0)) {
        throw Error("harness", "reveal needs both g and f nonzero");
    }
    cfg.schedule = FieldSchedule::constant(reveal_field(cfg.params));
    return cfg;
}

}  // namespace detail

inline RevealReport run_nc_reveal(const ScenarioConfig& base, int workers = 1) {
    const ScenarioConfig cfg = detail::at_reveal_field(base);
    cfg.validate();
    const ModelContext ctx(cfg);
    RevealReport rep;
    rep.B = cfg.schedule.segments.front().B;
    rep.coefficients = compute_effective_coefficients(cfg.params, rep.B);
    if (rep.coefficients.c_qg != 0.0) {
        throw Error("harness", "c_qg = " + std::to_string(rep.coefficients.c_qg) + " at the reveal field");
    }

    CouplingMatrices g_only{cfg.couplings.g, Eigen::Matrix2d::Zero()};
    CouplingMatrices scaled{10.0 * cfg.couplings.g, cfg.couplings.f};
    const auto eff_g = build_effective_interaction(ctx.ops, g_only, ctx.env, cfg.params, rep.B);
    const auto eff = build_effective_interaction(ctx.ops, cfg.couplings, ctx.env, cfg.params, rep.B);
    const auto eff_s = build_effective_interaction(ctx.ops, scaled, ctx.env, cfg.params, rep.B);
    for (int i = 0; i < 2; ++i) {
        rep.g_channel_norm = std::max(rep.g_channel_norm, detail::spectral_norm(eff_g.e_ops[i].entries));
        rep.g_scaling_change = std::max(rep.g_scaling_change,
                                        detail::spectral_norm(eff_s.e_ops[i].entries - eff.e_ops[i].entries));
    }

    rep.main = run_scenario(cfg, ctx);

    rep.thetas = cfg.reveal_thetas;
    std::vector<ScenarioConfig> cfgs;
    for (std::size_t i = 0; i < rep.thetas.size(); ++i) {
        ScenarioConfig c = base;
        c.params.theta = rep.thetas[i];
        c = detail::at_reveal_field(c);
        c.output.prefix = base.output.prefix + "_theta" + std::to_string(i);
        cfgs.push_back(std::move(c));
    }
    rep.theta_runs.resize(cfgs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) {
            try {
                rep.theta_runs[i] = run_scenario(cfgs[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(cfgs.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    for (const auto& r : rep.theta_runs) rep.tau_q.push_back(r.tau("position"));
    return rep;
}

}  // namespace ncdeco
