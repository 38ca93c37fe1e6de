#pragma once

// Composite Hamiltonian H = H_S + H_E + H_int with the linear system-environment
// coupling g_ij x_i C_j + f_pq p_p D_q, rewritten in canonical variables and
// minimally coupled to a perpendicular field in the symmetric gauge.

#include "ncdeco/core.hpp"
#include "ncdeco/operators.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ncdeco {

struct CouplingMatrices {
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();

    void validate() const {
        if (!g.allFinite() || !f.allFinite()) throw Error("model", "coupling matrices must be finite");
        if (g.isZero(0.0) && f.isZero(0.0)) {
            throw Error("model", "g = 0 and f = 0: no interaction, nothing can decohere");
        }
    }

    /// Scale used for the weak/strong field thresholds: max|f| when the momentum
    /// channel exists, otherwise max|g|.
    [[nodiscard]] double field_scale() const {
        const double fmax = f.cwiseAbs().maxCoeff();
        return fmax > 0.0 ? fmax : g.cwiseAbs().maxCoeff();
    }
};

struct EnvSpec {
    std::array<OperatorMatrix, 2> c_ops;
    std::array<OperatorMatrix, 2> d_ops;
    OperatorMatrix h_env;
    Vector initial_env_state;

    [[nodiscard]] Eigen::Index dim() const { return h_env.dim(); }

    void validate() const {
        const auto n = dim();
        auto check = [n](const OperatorMatrix& op, const char* name) {
            if (op.dim() != n) throw Error("model", std::string(name) + " has wrong environment dimension");
            if (!is_hermitian(op.entries)) {
                throw Error("model", std::string(name) + " is not Hermitian (deviation " +
                                         std::to_string(hermiticity_error(op.entries)) + ")");
            }
        };
        check(c_ops[0], "C_1");
        check(c_ops[1], "C_2");
        check(d_ops[0], "D_1");
        check(d_ops[1], "D_2");
        check(h_env, "H_E");
        if (initial_env_state.size() != n) throw Error("model", "initial environment state has wrong length");
        if (std::abs(initial_env_state.norm() - 1.0) > 1e-12) {
            throw Error("model", "initial environment state is not normalized");
        }
        // Gram matrix of {C_1, C_2, D_1, D_2} under the Hilbert-Schmidt inner product.
        const std::array<const Matrix*, 4> ops{&c_ops[0].entries, &c_ops[1].entries, &d_ops[0].entries,
                                               &d_ops[1].entries};
        Matrix gram(4, 4);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) gram(a, b) = (ops[a]->adjoint() * *ops[b]).trace();
        const auto ev = hermitian_eigensystem(gram, "model").values;
        if (ev.minCoeff() <= 1e-10 * std::max(1.0, ev.maxCoeff())) {
            throw Error("model", "environment observables {C_j, D_q} are linearly dependent");
        }
    }
};

enum class EnvInitial { ground, excited, plus };

namespace pauli {

inline Matrix x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }

/// `single` acting on qubit `j` of `n` (qubit 0 is the leftmost tensor factor).
inline Matrix on_qubit(const Matrix& single, int j, int n) {
    Matrix out = Matrix::Identity(1, 1);
    for (int i = 0; i < n; ++i) out = kron(out, i == j ? single : identity(2));
    return out;
}

}  // namespace pauli

/// Qubit-bank environment: C_j (D_q) is the sum of Pauli-x over the j-th half of
/// the C (D) bank, H_E = sum_i (omega_i/2) Z_i. Single-qubit basis |0> is Z=+1.
inline EnvSpec make_qubit_environment(const HilbertSpec& spec, EnvInitial init = EnvInitial::ground) {
    spec.validate();
    const int n = spec.env_qubits();
    const auto dim = spec.env_dim();
    std::array<std::vector<int>, 2> c_halves, d_halves;
    Matrix h_env = Matrix::Zero(dim, dim);
    int qubit = 0;
    for (const auto& bank : spec.env_banks) {
        if (bank.qubit_count % 2 != 0) {
            throw Error("model", std::string("bank ") + bank.label + " needs an even qubit count");
        }
        const int half = bank.qubit_count / 2;
        auto& halves = bank.label == 'C' ? c_halves : d_halves;
        for (int i = 0; i < bank.qubit_count; ++i, ++qubit) {
            halves[i < half ? 0 : 1].push_back(qubit);
            h_env += (bank.omega / 2.0) * pauli::on_qubit(pauli::z(), qubit, n);
        }
    }
    auto sum_x = [&](const std::vector<int>& qubits, const char* name) {
        if (qubits.empty()) throw Error("model", std::string("environment has no qubits for ") + name);
        Matrix m = Matrix::Zero(dim, dim);
        for (int j : qubits) m += pauli::on_qubit(pauli::x(), j, n);
        return make_operator(std::move(m), true, "model");
    };
    EnvSpec env;
    env.c_ops = {sum_x(c_halves[0], "C_1"), sum_x(c_halves[1], "C_2")};
    env.d_ops = {sum_x(d_halves[0], "D_1"), sum_x(d_halves[1], "D_2")};
    env.h_env = make_operator(std::move(h_env), true, "model");

    Vector one(2);
    switch (init) {
        case EnvInitial::ground: one << 0, 1; break;
        case EnvInitial::excited: one << 1, 0; break;
        case EnvInitial::plus: one << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0); break;
    }
    Vector state = Vector::Ones(1);
    for (int i = 0; i < n; ++i) state = kron(state, one);
    env.initial_env_state = state;
    env.validate();
    return env;
}

struct FieldSegment {
    double t_start = 0.0;
    double B = 0.0;
};

struct FieldSchedule {
    std::vector<FieldSegment> segments{{0.0, 0.0}};

    static FieldSchedule constant(double B) { return FieldSchedule{{{0.0, B}}}; }

    void validate() const {
        if (segments.empty()) throw Error("model", "field schedule is empty");
        if (segments.front().t_start != 0.0) throw Error("model", "field schedule must start at t = 0");
        for (std::size_t i = 1; i < segments.size(); ++i) {
            if (!(segments[i].t_start > segments[i - 1].t_start)) {
                throw Error("model", "field schedule start times must be strictly increasing");
            }
        }
        for (const auto& s : segments)
            if (!std::isfinite(s.B)) throw Error("model", "field value must be finite");
    }

    [[nodiscard]] double field_at(double t) const {
        double b = segments.front().B;
        for (const auto& s : segments)
            if (s.t_start <= t) b = s.B;
        return b;
    }
};

struct EffectiveCoefficients {
    double c_qg = 1.0;  // g-term on q
    double c_qf = 0.0;  // f-term on q
    double c_kf = 1.0;  // f-term on k
    double c_kg = 0.0;  // g-term on k
};

/// Field at which the g-channel on q vanishes, B = 4/(e theta).
inline double reveal_field(const NCParams& params) {
    if (params.theta == 0.0 || params.charge_e == 0.0) {
        throw Error("model", "reveal field 4/(e theta) is undefined for theta = 0 or e = 0");
    }
    return 4.0 / (params.charge_e * params.theta);
}

inline EffectiveCoefficients compute_effective_coefficients(const NCParams& params, double B) {
    const double e = params.charge_e;
    EffectiveCoefficients c;
    // 1 - e B theta/4 need not round to 0 for any double B, so the reveal
    // field itself is mapped to an exact zero.
    const bool at_reveal = params.theta != 0.0 && e != 0.0 && B == 4.0 / (e * params.theta);
    c.c_qg = at_reveal ? 0.0 : 1.0 - e * B * params.theta / 4.0;
    c.c_qf = -(e * B / 2.0 - params.sigma / 2.0);
    c.c_kf = 1.0;
    c.c_kg = -params.theta / 2.0;
    return c;
}

struct EffectiveInteraction {
    std::array<OperatorMatrix, 2> e_ops;  // coefficient of q_i
    std::array<OperatorMatrix, 2> f_ops;  // coefficient of k_i
    OperatorMatrix h_int_total;
};

namespace detail {

inline void check_dims(Eigen::Index sys, const std::array<OperatorMatrix, 2>& a,
                       const std::array<OperatorMatrix, 2>& b, const EnvSpec& env) {
    for (int i = 0; i < 2; ++i) {
        if (a[i].dim() != sys || b[i].dim() != sys) {
            throw Error("model", "system operators have mismatched dimensions");
        }
        if (env.c_ops[i].dim() != env.dim() || env.d_ops[i].dim() != env.dim()) {
            throw Error("model", "environment operators have mismatched dimensions");
        }
    }
}

}  // namespace detail

/// sum_ij g_ij x_i (x) C_j + sum_pq f_pq p_p (x) D_q, system (x) environment ordering.
inline OperatorMatrix build_bare_interaction(const PhaseSpaceOps& ops, const CouplingMatrices& couplings,
                                             const EnvSpec& env) {
    couplings.validate();
    const auto ns = ops.x[0].dim();
    detail::check_dims(ns, ops.x, ops.p, env);
    const auto ne = env.dim();
    Matrix h = Matrix::Zero(ns * ne, ns * ne);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            if (couplings.g(i, j) != 0.0) h += couplings.g(i, j) * kron(ops.x[i].entries, env.c_ops[j].entries);
            if (couplings.f(i, j) != 0.0) h += couplings.f(i, j) * kron(ops.p[i].entries, env.d_ops[j].entries);
        }
    }
    return make_operator(std::move(h), true, "model");
}

/// Interaction in canonical variables with the field folded in:
/// H_int = sum_i q_i (x) E_i + k_i (x) F_i.
inline EffectiveInteraction build_effective_interaction(const CanonicalOps& ops, const CouplingMatrices& couplings,
                                                        const EnvSpec& env, const NCParams& params, double B) {
    couplings.validate();
    params.validate();
    const auto ns = ops.q[0].dim();
    detail::check_dims(ns, ops.q, ops.k, env);
    const auto ne = env.dim();
    const auto c = compute_effective_coefficients(params, B);
    const auto& g = couplings.g;
    const auto& f = couplings.f;

    EffectiveInteraction out;
    Matrix h = Matrix::Zero(ns * ne, ns * ne);
    for (int i = 0; i < 2; ++i) {
        Matrix e_op = Matrix::Zero(ne, ne);
        Matrix f_op = Matrix::Zero(ne, ne);
        for (int j = 0; j < 2; ++j) {
            e_op += c.c_qg * g(i, j) * env.c_ops[j].entries;
            f_op += c.c_kf * f(i, j) * env.d_ops[j].entries;
        }
        for (int p = 0; p < 2; ++p) {
            const double eps = epsilon(p, i);
            if (eps == 0.0) continue;
            for (int q = 0; q < 2; ++q) {
                e_op += c.c_qf * f(p, q) * eps * env.d_ops[q].entries;
                f_op += c.c_kg * eps * g(p, q) * env.c_ops[q].entries;
            }
        }
        h += kron(ops.q[i].entries, e_op) + kron(ops.k[i].entries, f_op);
        out.e_ops[i] = make_operator(std::move(e_op), true, "model");
        out.f_ops[i] = make_operator(std::move(f_op), true, "model");
    }
    out.h_int_total = make_operator(std::move(h), true, "model");
    return out;
}

enum class SystemKind { none, harmonic, free, landau };

struct SystemHamiltonianSpec {
    SystemKind kind = SystemKind::harmonic;
    double omega = 1.0;
    double mass = 1.0;
};

/// H_S on the d_axis^2 space. `landau` adds minimal coupling k_i -> k_i - e A_i
/// (A_i = (B/2) eps_ij q_j) to the kinetic term and keeps the trap at `omega`.
inline OperatorMatrix build_system_hamiltonian(const SystemHamiltonianSpec& spec, const CanonicalOps& ops,
                                               const NCParams& params, double B) {
    const auto n = ops.q[0].dim();
    if (spec.kind == SystemKind::none) return make_operator(Matrix::Zero(n, n), true, "model");
    if (!(spec.mass > 0.0)) throw Error("model", "system mass must be positive");
    Matrix h = Matrix::Zero(n, n);
    for (int i = 0; i < 2; ++i) {
        Matrix kin = ops.k[i].entries;
        if (spec.kind == SystemKind::landau) {
            for (int j = 0; j < 2; ++j) {
                const double eps = epsilon(i, j);
                if (eps != 0.0) kin -= params.charge_e * (B / 2.0) * eps * ops.q[j].entries;
            }
        }
        h += kin * kin / (2.0 * spec.mass);
        if (spec.kind != SystemKind::free) {
            h += 0.5 * spec.mass * spec.omega * spec.omega * ops.q[i].entries * ops.q[i].entries;
        }
    }
    // Products of Hermitian matrices are Hermitian only up to rounding.
    h = (0.5 * (h + h.adjoint())).eval();
    return make_operator(std::move(h), true, "model");
}

/// H = H_S (x) 1 + 1 (x) H_E + H_int.
inline OperatorMatrix assemble_total_hamiltonian(const OperatorMatrix& h_sys, const EnvSpec& env,
                                                 const EffectiveInteraction& eff) {
    const auto ns = h_sys.dim();
    const auto ne = env.dim();
    if (eff.h_int_total.dim() != ns * ne) {
        throw Error("model", "interaction dimension " + std::to_string(eff.h_int_total.dim()) +
                                 " does not match system x environment " + std::to_string(ns * ne));
    }
    Matrix h = eff.h_int_total.entries;
    h += kron(h_sys.entries, identity(ne));
    h += kron(identity(ns), env.h_env.entries);
    return make_operator(std::move(h), true, "model");
}

}  // namespace ncdeco
