#pragma once

// Fast invariant checks run by `ncdeco selftest`.

#include "ncdeco/diagnostics.hpp"
#include "ncdeco/dynamics.hpp"
#include "ncdeco/model.hpp"
#include "ncdeco/operators.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ncdeco {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx{g(rng), g(rng)};
    return (0.5 * (m + m.adjoint())).eval();
}

inline Vector random_state(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx{g(rng), g(rng)};
    return v / v.norm();
}

}  // namespace detail

inline std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
    std::vector<SelftestResult> out;
    auto check = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        try {
            auto [ok, detail] = fn();
            out.push_back({name, ok, detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };
    std::mt19937_64 rng(seed);

    check("nc_commutators", [] {
        HilbertSpec spec;
        const auto ops = build_canonical_ops(spec, 1.0);
        const NCParams p{0.1, 0.05, 1.0, 1.0};
        const auto nc = bopp_shift(ops, p);
        const Matrix id = identity(ops.q[0].dim());
        auto err = [&](const Matrix& c, const Matrix& expect) {
            return max_abs(low_lying_block(c - expect, spec.d_axis, 6));
        };
        double worst = 0.0;
        worst = std::max(worst, err(commutator(nc.x[0].entries, nc.x[1].entries), I_unit * p.theta * id));
        worst = std::max(worst, err(commutator(nc.p[0].entries, nc.p[1].entries), I_unit * p.sigma * id));
        for (int a = 0; a < 2; ++a)
            worst = std::max(worst, err(commutator(nc.x[a].entries, nc.p[a].entries),
                                        I_unit * (1.0 + p.theta * p.sigma / 4.0) * id));
        return std::make_pair(worst < 1e-9, "max deviation " + std::to_string(worst));
    });

    check("reveal_field_zeroes_c_qg", [] {
        double worst = 0.0;
        for (double th : {0.05, 0.1, 0.2, 0.037, 1e-3}) {
            const NCParams p{th, 0.0, 1.0, 1.0};
            worst = std::max(worst, std::abs(compute_effective_coefficients(p, reveal_field(p)).c_qg));
        }
        return std::make_pair(worst == 0.0, "max |c_qg| " + std::to_string(worst));
    });

    check("propagator_unitary", [&] {
        const Matrix h = detail::random_hermitian(32, rng);
        const auto prop = make_propagator(make_operator(h, true), 0.3, 1.0);
        return std::make_pair(prop.unitarity_error < 1e-10, "unitarity error " + std::to_string(prop.unitarity_error));
    });

    check("reduce_system_trace_purity", [&] {
        const CompositeState s{detail::random_state(16, rng), 0.0};
        const auto r = reduce_system(s, 4, 4);
        const double tr_err = std::abs(r.rho.trace() - cplx{1.0, 0.0});
        const double p = purity(r);
        const bool ok = tr_err < 1e-12 && p >= 0.25 - 1e-10 && p <= 1.0 + 1e-10 && is_hermitian(r.rho, 1e-12);
        return std::make_pair(ok, "trace error " + std::to_string(tr_err) + ", purity " + std::to_string(p));
    });

    check("l1_plus_state", [] {
        ReducedState r{Matrix::Constant(2, 2, cplx{0.5, 0.0}), 0.0};
        const PointerBasisCandidate b{BasisLabel::custom, identity(2)};
        const double c = coherence_l1(r, b);
        return std::make_pair(std::abs(c - 1.0) < 1e-15, "l1 = " + std::to_string(c));
    });

    check("pointer_residual_exact_basis", [] {
        HilbertSpec spec;
        const auto ops = build_canonical_ops(spec, 1.0);
        const Matrix h = kron(ops.q[0].entries, pauli::x());
        const auto rq = pointer_residual(make_operator(h, true), make_position_basis(spec.d_axis, 1.0), 64, 2);
        const auto rk = pointer_residual(make_operator(h, true), make_momentum_basis(spec.d_axis, 1.0), 64, 2);
        return std::make_pair(rq < 1e-12 && rk > 0.9, "R_q " + std::to_string(rq) + ", R_k " + std::to_string(rk));
    });

    check("tau_exponential", [] {
        CoherenceTrace t;
        t.bases = {BasisTrace{"position", {}, {}}};
        for (int i = 0; i <= 1000; ++i) {
            t.times.push_back(i * 0.01);
            t.bases[0].raw.push_back(std::exp(-i * 0.01 / 2.0));
        }
        t.normalize();
        const auto e = extract_decoherence_time(t, "position");
        const bool ok = e.tau_d && std::abs(*e.tau_d - 2.0) < 0.01;
        return std::make_pair(ok, e.tau_d ? "tau " + std::to_string(*e.tau_d) : std::string("tau none"));
    });

    return out;
}

}  // namespace ncdeco
