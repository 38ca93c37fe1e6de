// Command-line entry point: run | sweep | reveal | selftest.

#include "ncdeco/ncdeco.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Options {
    std::string config;
    std::string out;
    int workers = 1;
    std::optional<std::uint64_t> seed;
};

ncdeco::ScenarioConfig load(const Options& o) {
    auto cfg = ncdeco::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.output.directory = o.out;
    return cfg;
}

std::string tau_text(const std::optional<double>& t) {
    if (!t) return "none";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *t);
    return buf;
}

int cmd_run(const Options& o) {
    const auto cfg = load(o);
    const auto rep = ncdeco::run_scenario(cfg);
    const auto files = ncdeco::emit_results(rep, cfg.output.directory);
    for (const auto& b : rep.bases)
        std::cout << "tau_D[" << b.label << "] = " << tau_text(b.estimate.tau_d)
                  << (b.note.empty() ? "" : "  (" + b.note + ")") << '\n';
    std::cout << "summary: " << files.summary.string() << '\n';
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto cfg = load(o);
    if (cfg.sweep_B.empty()) throw ncdeco::Error("config", "sweep.B_values is missing or empty");
    const auto rep = ncdeco::run_sweep(cfg, cfg.sweep_B, o.workers);
    const auto path = ncdeco::emit_sweep(rep, cfg.output.prefix, cfg.output.directory);
    for (const auto& p : rep.points) {
        std::cout << "B = " << p.config.schedule.segments.front().B << ": tau_q = " << tau_text(p.tau("position"))
                  << ", tau_k = " << tau_text(p.tau("momentum")) << '\n';
    }
    std::cout << "classification: "
              << (rep.classification ? ncdeco::to_string(rep.classification->regime) : rep.classification_status)
              << '\n';
    if (rep.crossover) std::cout << "crossover B* = " << rep.crossover->B_star << '\n';
    std::cout << "summary: " << path.string() << '\n';
    return 0;
}

int cmd_reveal(const Options& o) {
    const auto cfg = load(o);
    const auto rep = ncdeco::run_nc_reveal(cfg, o.workers);
    const auto path = ncdeco::emit_reveal(rep, cfg.output.directory);
    std::cout << "B = " << rep.B << ", c_qg = " << rep.coefficients.c_qg
              << ", tau_q = " << tau_text(rep.main.tau("position")) << '\n';
    for (std::size_t i = 0; i < rep.thetas.size(); ++i)
        std::cout << "theta = " << rep.thetas[i] << ": tau_q = " << tau_text(rep.tau_q[i]) << '\n';
    std::cout << "summary: " << path.string() << '\n';
    return 0;
}

int cmd_selftest(const Options& o) {
    const auto results = ncdeco::run_selftest(o.seed.value_or(0));
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decoherence in a noncommutative plane under a perpendicular magnetic field"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", o.config, "scenario JSON file");
        if (needs_config) c->required();
        sub->add_option("--out", o.out, "output directory (overrides output.dir)");
        sub->add_option("--workers", o.workers, "concurrent scenario runs")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "seed for random states (overrides config)");
    };
    auto* run = app.add_subcommand("run", "single scenario");
    auto* sweep = app.add_subcommand("sweep", "B-sweep with regime classification");
    auto* reveal = app.add_subcommand("reveal", "scenario at B = 4/(e theta)");
    auto* selftest = app.add_subcommand("selftest", "invariant checks");
    add_common(run, true);
    add_common(sweep, true);
    add_common(reveal, true);
    add_common(selftest, false);

    CLI11_PARSE(app, argc, argv);
    for (auto* sub : {run, sweep, reveal, selftest})
        if (sub->parsed() && sub->count("--seed")) o.seed = seed;

    try {
        if (run->parsed()) return cmd_run(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (reveal->parsed()) return cmd_reveal(o);
        return cmd_selftest(o);
    } catch (const ncdeco::Error& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
