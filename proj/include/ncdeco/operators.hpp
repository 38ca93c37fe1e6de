#pragma once

// Truncated Fock-space representation of the canonical pair (q, k) on a 2D
// plane and the Bopp shift to the noncommutative pair (x, p).

#include "ncdeco/core.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ncdeco {

struct EnvBank {
    char label = 'C';      // 'C' or 'D'
    int qubit_count = 2;
    double omega = 1.0;    // level splitting of each qubit in this bank
};

struct HilbertSpec {
    int d_axis = 8;
    std::vector<EnvBank> env_banks{{'C', 2, 1.0}, {'D', 2, 1.0}};
    std::int64_t max_composite_dim = 4096;

    [[nodiscard]] std::int64_t system_dim() const {
        return static_cast<std::int64_t>(d_axis) * d_axis;
    }

    [[nodiscard]] int env_qubits() const {
        int n = 0;
        for (const auto& b : env_banks) n += b.qubit_count;
        return n;
    }

    [[nodiscard]] std::int64_t env_dim() const {
        const int n = env_qubits();
        if (n >= 62) return std::numeric_limits<std::int64_t>::max();
        return std::int64_t{1} << n;
    }

    /// d_axis^2 * 2^qubits, saturating at int64 max instead of overflowing.
    [[nodiscard]] std::int64_t composite_dim() const {
        const auto s = system_dim();
        const auto e = env_dim();
        if (e != 0 && s > std::numeric_limits<std::int64_t>::max() / e) {
            return std::numeric_limits<std::int64_t>::max();
        }
        return s * e;
    }

    void validate() const {
        if (d_axis < 4) {
            throw Error("operators", "d_axis must be >= 4 (got " + std::to_string(d_axis) + ")");
        }
        for (const auto& b : env_banks) {
            if (b.label != 'C' && b.label != 'D') {
                throw Error("operators", std::string("unknown environment bank label '") + b.label + "'");
            }
            if (b.qubit_count <= 0) throw Error("operators", "bank qubit_count must be positive");
        }
        const auto dim = composite_dim();
        if (dim > max_composite_dim) {
            throw Error("operators", "composite dimension " + std::to_string(system_dim()) + " x " +
                                         std::to_string(env_dim()) + " = " +
                                         (dim == std::numeric_limits<std::int64_t>::max()
                                              ? std::string("overflow")
                                              : std::to_string(dim)) +
                                         " exceeds cap " + std::to_string(max_composite_dim));
        }
    }
};

struct NCParams {
    double theta = 0.0;
    double sigma = 0.0;
    double hbar = 1.0;
    double charge_e = 1.0;

    void validate() const {
        if (!(hbar > 0.0)) throw Error("operators", "hbar must be positive");
        if (!std::isfinite(theta) || !std::isfinite(sigma) || !std::isfinite(charge_e)) {
            throw Error("operators", "noncommutativity parameters must be finite");
        }
    }
};

/// Levi-Civita symbol on two indices (0-based), epsilon(0,1) = +1.
constexpr double epsilon(int a, int b) { return a < b ? 1.0 : (a == b ? 0.0 : -1.0); }

namespace fock {

/// Truncated annihilation operator on span{|0>, ..., |d-1>}.
inline Matrix annihilation(int d) {
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline Matrix position(int d, double hbar) {
    const Matrix a = annihilation(d);
    return std::sqrt(hbar / 2.0) * (a + a.adjoint());
}

inline Matrix momentum(int d, double hbar) {
    const Matrix a = annihilation(d);
    return I_unit * std::sqrt(hbar / 2.0) * (a.adjoint() - a);
}

}  // namespace fock

/// Canonical q_a, k_a on the d_axis^2 system space (axis 0 is the left tensor factor).
struct CanonicalOps {
    std::array<OperatorMatrix, 2> q;
    std::array<OperatorMatrix, 2> k;
    int d_axis = 0;
};

/// Noncommutative coordinates x_a, p_a.
struct PhaseSpaceOps {
    std::array<OperatorMatrix, 2> x;
    std::array<OperatorMatrix, 2> p;
};

inline CanonicalOps build_canonical_ops(const HilbertSpec& spec, double hbar) {
    spec.validate();
    if (!(hbar > 0.0)) throw Error("operators", "hbar must be positive");
    const int d = spec.d_axis;
    const Matrix q1 = fock::position(d, hbar);
    const Matrix k1 = fock::momentum(d, hbar);
    const Matrix id = identity(d);
    CanonicalOps ops;
    ops.d_axis = d;
    ops.q[0] = make_operator(kron(q1, id), true);
    ops.q[1] = make_operator(kron(id, q1), true);
    ops.k[0] = make_operator(kron(k1, id), true);
    ops.k[1] = make_operator(kron(id, k1), true);
    return ops;
}

/// x_a = q_a - (theta/2) eps_ab k_b,  p_a = k_a + (sigma/2) eps_ab q_b.
inline PhaseSpaceOps bopp_shift(const CanonicalOps& ops, const NCParams& params) {
    params.validate();
    const auto n = ops.q[0].dim();
    for (int a = 0; a < 2; ++a) {
        if (ops.q[a].dim() != n || ops.k[a].dim() != n) {
            throw Error("operators", "bopp_shift: canonical operators have mismatched dimensions");
        }
    }
    PhaseSpaceOps out;
    for (int a = 0; a < 2; ++a) {
        Matrix x = ops.q[a].entries;
        Matrix p = ops.k[a].entries;
        for (int b = 0; b < 2; ++b) {
            const double e = epsilon(a, b);
            if (e == 0.0) continue;
            x -= (params.theta / 2.0) * e * ops.k[b].entries;
            p += (params.sigma / 2.0) * e * ops.q[b].entries;
        }
        out.x[a] = make_operator(std::move(x), true);
        out.p[a] = make_operator(std::move(p), true);
    }
    return out;
}

/// Full eigendecomposition of a Hermitian operator (eigenvalues ascending).
/// Applied to a single-axis q the columns are the truncated |q> states; on k
/// they are the truncated |k> states.
inline Eigensystem position_eigenbasis(const OperatorMatrix& op) {
    if (!is_hermitian(op.entries)) {
        throw Error("operators", "eigenbasis requested for a non-Hermitian operator (deviation " +
                                     std::to_string(hermiticity_error(op.entries)) + ")");
    }
    return hermitian_eigensystem(op.entries, "operators");
}

inline Eigensystem momentum_eigenbasis(const OperatorMatrix& op) { return position_eigenbasis(op); }

/// Restriction of an operator on the d_axis^2 space to basis states whose
/// per-axis occupation numbers are both below `cutoff`.
inline Matrix low_lying_block(const Matrix& m, int d_axis, int cutoff) {
    std::vector<Eigen::Index> idx;
    for (int n1 = 0; n1 < cutoff; ++n1)
        for (int n2 = 0; n2 < cutoff; ++n2) idx.push_back(static_cast<Eigen::Index>(n1) * d_axis + n2);
    Matrix out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(idx[r], idx[c]);
    return out;
}

}  // namespace ncdeco
