#pragma once

// Pure-state evolution of the composite system under piecewise-constant
// Hamiltonians and the partial trace over the environment.

#include "ncdeco/core.hpp"
#include "ncdeco/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ncdeco {

struct CompositeState {
    Vector amplitudes;
    double t = 0.0;
};

struct Propagator {
    OperatorMatrix u;
    double dt = 0.0;
    double unitarity_error = 0.0;  // max |U^dagger U - 1|
};

struct ReducedState {
    Matrix rho;
    double t = 0.0;
};

inline constexpr double kUnitarityTolerance = 1e-10;
inline constexpr double kNormAbortTolerance = 1e-8;

/// Spectral form of a segment Hamiltonian: U(tau) = V exp(-i w tau / hbar) V^dagger.
class SegmentSpectrum {
public:
    SegmentSpectrum(const OperatorMatrix& h, double hbar) : hbar_(hbar) {
        if (!is_hermitian(h.entries)) {
            throw Error("dynamics", "segment Hamiltonian is not Hermitian (deviation " +
                                        std::to_string(hermiticity_error(h.entries)) + ")");
        }
        if (!(hbar > 0.0)) throw Error("dynamics", "hbar must be positive");
        eig_ = hermitian_eigensystem(h.entries, "dynamics");
    }

    [[nodiscard]] const Eigensystem& eigensystem() const { return eig_; }
    [[nodiscard]] Eigen::Index dim() const { return eig_.values.size(); }

    [[nodiscard]] Vector phases(double tau) const {
        Vector out(dim());
        for (Eigen::Index j = 0; j < dim(); ++j) out(j) = std::polar(1.0, -eig_.values(j) * tau / hbar_);
        return out;
    }

    [[nodiscard]] Matrix unitary(double tau) const {
        return eig_.vectors * phases(tau).asDiagonal() * eig_.vectors.adjoint();
    }

private:
    Eigensystem eig_;
    double hbar_;
};

inline Propagator propagator_from_spectrum(const SegmentSpectrum& spectrum, double dt) {
    Propagator p;
    p.dt = dt;
    p.u = OperatorMatrix{spectrum.unitary(dt), false};
    p.unitarity_error = max_abs(p.u.entries.adjoint() * p.u.entries - identity(p.u.dim()));
    if (!(p.unitarity_error < kUnitarityTolerance)) {
        const auto& w = spectrum.eigensystem().values;
        throw Error("dynamics", "propagator unitarity error " + std::to_string(p.unitarity_error) +
                                    " (spectrum [" + std::to_string(w.minCoeff()) + ", " +
                                    std::to_string(w.maxCoeff()) + "], dt " + std::to_string(dt) + ")");
    }
    return p;
}

/// exp(-i h dt / hbar) through the Hermitian eigendecomposition of h.
inline Propagator make_propagator(const OperatorMatrix& h, double dt, double hbar) {
    if (!(dt > 0.0)) throw Error("dynamics", "propagator step dt must be positive");
    return propagator_from_spectrum(SegmentSpectrum(h, hbar), dt);
}

/// rho_S[a][b] = sum_e psi[a,e] conj(psi[b,e]), with composite index a*dim_E + e.
inline ReducedState reduce_system(const CompositeState& state, Eigen::Index dim_s, Eigen::Index dim_e) {
    if (dim_s <= 0 || dim_e <= 0 || state.amplitudes.size() != dim_s * dim_e) {
        throw Error("dynamics", "state length " + std::to_string(state.amplitudes.size()) +
                                    " does not match dim_S x dim_E = " + std::to_string(dim_s) + " x " +
                                    std::to_string(dim_e));
    }
    // Column-major map: m(e, a) = psi[a*dim_E + e].
    const Eigen::Map<const Matrix> m(state.amplitudes.data(), dim_e, dim_s);
    ReducedState out;
    out.rho = m.transpose() * m.conjugate();
    out.t = state.t;
    return out;
}

inline double purity(const ReducedState& r) { return r.rho.squaredNorm(); }

/// Function that yields the full Hamiltonian for a field value.
using HamiltonianFactory = std::function<OperatorMatrix(double B)>;

struct EvolutionStats {
    double max_unitarity_error = 0.0;
    double max_norm_drift = 0.0;
    int segments = 0;
    std::int64_t snapshots = 0;

    void merge(const EvolutionStats& o) {
        max_unitarity_error = std::max(max_unitarity_error, o.max_unitarity_error);
        max_norm_drift = std::max(max_norm_drift, o.max_norm_drift);
        segments += o.segments;
        snapshots += o.snapshots;
    }
};

/// Snapshot grid for [0, t_end] at cadence dt, plus the grid index of every
/// field-segment boundary that falls inside it.
struct TimeGrid {
    std::int64_t steps = 0;  // snapshots are n*dt for n = 0..steps
    std::vector<std::int64_t> boundaries;  // grid index where each segment starts
    std::vector<double> fields;

    TimeGrid(const FieldSchedule& schedule, double t_end, double dt) {
        schedule.validate();
        if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error("dynamics", "t_end must be >= 0");
        if (!(dt > 0.0)) throw Error("dynamics", "snapshot cadence dt must be positive");
        steps = static_cast<std::int64_t>(std::floor(t_end / dt + 1e-9));
        for (const auto& seg : schedule.segments) {
            const auto n = static_cast<std::int64_t>(std::llround(seg.t_start / dt));
            if (std::abs(static_cast<double>(n) * dt - seg.t_start) > 1e-9) {
                throw Error("dynamics", "segment start " + std::to_string(seg.t_start) +
                                            " is not a multiple of dt = " + std::to_string(dt));
            }
            if (n > steps && !boundaries.empty()) break;
            boundaries.push_back(n);
            fields.push_back(seg.B);
        }
    }
};

/// Evolves several initial states (columns of `initial`) through the schedule.
/// `observer(n, t, B, states)` is called for every snapshot n = 0..steps with
/// the composite states as columns. Within a segment the state at offset tau is
/// V exp(-i w tau/hbar) V^dagger psi(t_segment), evaluated in blocks.
template <class Observer>
EvolutionStats evolve_observed(const Matrix& initial, const FieldSchedule& schedule,
                               const HamiltonianFactory& hamiltonian, double t_end, double dt, double hbar,
                               Observer&& observer) {
    const TimeGrid grid(schedule, t_end, dt);
    EvolutionStats stats;
    const auto cols = initial.cols();
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double drift = std::abs(initial.col(c).norm() - 1.0);
        if (drift > kNormAbortTolerance) {
            throw Error("dynamics", "initial state " + std::to_string(c) + " is not normalized (|norm-1| = " +
                                        std::to_string(drift) + ")");
        }
    }

    auto emit = [&](std::int64_t n, const Matrix& states) {
        for (Eigen::Index c = 0; c < states.cols(); ++c) {
            const double drift = std::abs(states.col(c).norm() - 1.0);
            stats.max_norm_drift = std::max(stats.max_norm_drift, drift);
            if (drift > kNormAbortTolerance) {
                throw Error("dynamics", "norm drift " + std::to_string(drift) + " at t = " +
                                            std::to_string(static_cast<double>(n) * dt));
            }
        }
        const double t = static_cast<double>(n) * dt;
        observer(n, t, schedule.field_at(t), states);
        ++stats.snapshots;
    };

    Matrix current = initial;
    emit(0, current);
    constexpr std::int64_t kBlock = 128;
    for (std::size_t s = 0; s < grid.boundaries.size(); ++s) {
        const std::int64_t n_begin = grid.boundaries[s];
        const std::int64_t n_end =
            s + 1 < grid.boundaries.size() ? std::min(grid.boundaries[s + 1], grid.steps) : grid.steps;
        if (n_begin >= n_end) continue;

        const OperatorMatrix h = hamiltonian(grid.fields[s]);
        if (h.dim() != initial.rows()) {
            throw Error("dynamics", "Hamiltonian dimension " + std::to_string(h.dim()) +
                                        " does not match state length " + std::to_string(initial.rows()));
        }
        const SegmentSpectrum spectrum(h, hbar);
        const Propagator prop = propagator_from_spectrum(spectrum, dt);
        stats.max_unitarity_error = std::max(stats.max_unitarity_error, prop.unitarity_error);
        ++stats.segments;

        const Matrix& vecs = spectrum.eigensystem().vectors;
        const RealVector& w = spectrum.eigensystem().values;
        const Matrix coeffs = vecs.adjoint() * current;
        const auto dim = w.size();
        for (std::int64_t b0 = n_begin + 1; b0 <= n_end; b0 += kBlock) {
            const std::int64_t b1 = std::min(n_end, b0 + kBlock - 1);
            const auto nb = static_cast<Eigen::Index>(b1 - b0 + 1);
            Matrix phased(dim, nb * cols);
            for (Eigen::Index i = 0; i < nb; ++i) {
                const double tau = static_cast<double>(b0 - n_begin + i) * dt;
                for (Eigen::Index j = 0; j < dim; ++j) {
                    const cplx ph = std::polar(1.0, -w(j) * tau / hbar);
                    for (Eigen::Index c = 0; c < cols; ++c) phased(j, i * cols + c) = ph * coeffs(j, c);
                }
            }
            const Matrix block = vecs * phased;
            for (Eigen::Index i = 0; i < nb; ++i) {
                current = block.middleCols(i * cols, cols);
                emit(b0 + i, current);
            }
        }
    }
    return stats;
}

/// Snapshots of a single state every dt from t = 0 to t_end.
inline std::vector<CompositeState> evolve(const CompositeState& state, const FieldSchedule& schedule,
                                          const HamiltonianFactory& hamiltonian, double t_end, double dt,
                                          double hbar, EvolutionStats* stats_out = nullptr) {
    if (state.t != 0.0) throw Error("dynamics", "evolution starts at t = 0");
    std::vector<CompositeState> out;
    Matrix init = state.amplitudes;
    const auto stats = evolve_observed(init, schedule, hamiltonian, t_end, dt, hbar,
                                       [&](std::int64_t, double t, double, const Matrix& states) {
                                           out.push_back(CompositeState{states.col(0), t});
                                       });
    if (stats_out) *stats_out = stats;
    return out;
}

}  // namespace ncdeco
