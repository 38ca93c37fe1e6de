#pragma once

// Decoherence measures: l1 coherence in candidate pointer bases, 1/e decoherence
// times, the off-diagonal weight of H_int in a basis, coarse-grained sector
// observables and the field-sweep regime classifier.

#include "ncdeco/core.hpp"
#include "ncdeco/dynamics.hpp"
#include "ncdeco/model.hpp"
#include "ncdeco/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ncdeco {

enum class BasisLabel { position, momentum, coarse_grained, custom };

inline std::string to_string(BasisLabel b) {
    switch (b) {
        case BasisLabel::position: return "position";
        case BasisLabel::momentum: return "momentum";
        case BasisLabel::coarse_grained: return "coarse_grained";
        case BasisLabel::custom: return "custom";
    }
    return "custom";
}

struct PointerBasisCandidate {
    BasisLabel label = BasisLabel::custom;
    Matrix vectors;  // orthonormal columns

    void validate() const {
        if (vectors.rows() != vectors.cols()) throw Error("diagnostics", "basis must span the system space");
        const double err = max_abs(vectors.adjoint() * vectors - identity(vectors.cols()));
        if (!(err < 1e-10)) {
            throw Error("diagnostics", "basis Gram matrix deviates from identity by " + std::to_string(err));
        }
    }
};

namespace detail {

inline PointerBasisCandidate product_basis(const Matrix& single_axis, BasisLabel label) {
    PointerBasisCandidate b{label, kron(single_axis, single_axis)};
    b.validate();
    return b;
}

}  // namespace detail

/// Joint eigenbasis of (q_1, q_2): column n1*d + n2 is |q1_{n1}> (x) |q2_{n2}>,
/// per-axis eigenvalues ascending.
inline PointerBasisCandidate make_position_basis(int d_axis, double hbar) {
    const auto eig = position_eigenbasis(make_operator(fock::position(d_axis, hbar), true));
    return detail::product_basis(eig.vectors, BasisLabel::position);
}

inline PointerBasisCandidate make_momentum_basis(int d_axis, double hbar) {
    const auto eig = momentum_eigenbasis(make_operator(fock::momentum(d_axis, hbar), true));
    return detail::product_basis(eig.vectors, BasisLabel::momentum);
}

inline double offdiag_l1(const Matrix& m) {
    return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
}

/// sum_{m != m'} |<m|rho|m'>|.
inline double coherence_l1(const ReducedState& rho, const PointerBasisCandidate& basis) {
    if (basis.vectors.rows() != rho.rho.rows()) {
        throw Error("diagnostics", "basis dimension does not match the reduced state");
    }
    return offdiag_l1(basis.vectors.adjoint() * rho.rho * basis.vectors);
}

/// Same measure from a factor A with rho = A A^dagger (A is dim_S x dim_E).
inline double coherence_l1_factored(const Matrix& factor, const Matrix& basis_vectors) {
    const Matrix b = basis_vectors.adjoint() * factor;
    return offdiag_l1(b * b.adjoint());
}

struct BasisTrace {
    std::string label;
    std::vector<double> raw;
    std::vector<double> norm;
};

struct CoherenceTrace {
    std::vector<double> times;
    std::vector<BasisTrace> bases;
    std::vector<double> purity;
    std::vector<double> field;

    [[nodiscard]] const BasisTrace& basis(const std::string& label) const {
        for (const auto& b : bases)
            if (b.label == label) return b;
        throw Error("diagnostics", "trace has no basis '" + label + "'");
    }

    /// Fills norm = raw / raw(0); all zeros when raw(0) vanishes.
    void normalize() {
        for (auto& b : bases) {
            b.norm.assign(b.raw.size(), 0.0);
            if (b.raw.empty() || !(b.raw.front() > kNoCoherence)) continue;
            for (std::size_t i = 0; i < b.raw.size(); ++i) b.norm[i] = b.raw[i] / b.raw.front();
        }
    }

    static constexpr double kNoCoherence = 1e-14;
};

struct DecoherenceEstimate {
    std::optional<double> tau_d;
    std::string method = "first 1/e crossing of normalized l1 coherence, linear interpolation";
    std::string basis_label;
};

/// First time the normalized series drops to 1/e, linearly interpolated
/// between adjacent samples; nullopt if it never does.
inline std::optional<double> first_inverse_e_crossing(const std::vector<double>& times,
                                                      const std::vector<double>& norm) {
    const double level = std::exp(-1.0);
    for (std::size_t i = 1; i < norm.size() && i < times.size(); ++i) {
        if (norm[i] <= level) {
            const double a = norm[i - 1], b = norm[i];
            if (a <= level) return times[i - 1];
            return times[i - 1] + (a - level) / (a - b) * (times[i] - times[i - 1]);
        }
    }
    return std::nullopt;
}

inline DecoherenceEstimate extract_decoherence_time(const CoherenceTrace& trace, const std::string& basis_label) {
    const auto& b = trace.basis(basis_label);
    if (trace.times.size() < 2 || b.raw.size() < 2) {
        throw Error("diagnostics", "decoherence time needs at least 2 samples");
    }
    if (!(b.raw.front() > CoherenceTrace::kNoCoherence)) {
        throw Error("diagnostics", "no initial coherence in the " + basis_label + " basis");
    }
    DecoherenceEstimate est;
    est.basis_label = basis_label;
    est.tau_d = first_inverse_e_crossing(trace.times, b.norm);
    return est;
}

/// Off-diagonal Hilbert-Schmidt weight of H_int in a system basis:
/// sum_{m != m'} ||<m|H|m'>||^2 / sum_{m,m'} ||<m|H|m'>||^2, blocks acting on E.
inline double pointer_residual(const OperatorMatrix& h_int, const PointerBasisCandidate& basis,
                               Eigen::Index dim_s, Eigen::Index dim_e) {
    if (h_int.dim() != dim_s * dim_e || basis.vectors.rows() != dim_s) {
        throw Error("diagnostics", "pointer_residual: dimension mismatch");
    }
    const double total = h_int.entries.squaredNorm();
    if (!(total > 0.0)) throw Error("diagnostics", "pointer_residual: H_int is zero");
    // Only the diagonal blocks are needed: for each environment pair (e, e') the
    // system matrix H^{ee'}(a, b) = H(a*dE+e, b*dE+e') contributes
    // sum_m |(U^dagger H^{ee'} U)_{mm}|^2. All pairs are stacked into one GEMM.
    const Matrix& h = h_int.entries;
    const Matrix& u = basis.vectors;
    Matrix stacked(dim_s * dim_e * dim_e, dim_s);
    for (Eigen::Index b = 0; b < dim_s; ++b)
        for (Eigen::Index ep = 0; ep < dim_e; ++ep)
            for (Eigen::Index a = 0; a < dim_s; ++a)
                for (Eigen::Index e = 0; e < dim_e; ++e)
                    stacked((e * dim_e + ep) * dim_s + a, b) = h(a * dim_e + e, b * dim_e + ep);
    const Matrix hu = stacked * u;
    double diag = 0.0;
    for (Eigen::Index pair = 0; pair < dim_e * dim_e; ++pair) {
        const auto blk = hu.middleRows(pair * dim_s, dim_s);
        for (Eigen::Index m = 0; m < dim_s; ++m) diag += std::norm(u.col(m).dot(blk.col(m)));
    }
    return std::clamp((total - diag) / total, 0.0, 1.0);
}

struct SectorDecomposition {
    std::vector<Matrix> projectors;
    std::vector<double> labels;           // bin centers
    std::vector<double> sector_spread;    // max |eigenvalue - center| within each sector
    Matrix observable;                    // sum_n labels[n] P_n
    double bin_width = 0.0;
    double max_block_deviation = 0.0;     // max_n ||(A - Lambda) P_n||_2
    bool degenerate_warning = false;      // bin narrower than the smallest eigenvalue gap
    double von_neumann_factor = 60.0;     // recorded, not enforced
};

/// Bins the spectrum of a Hermitian operator into intervals of width
/// `bin_width` starting at the smallest eigenvalue (the top interval is closed).
inline SectorDecomposition coarse_grain_sectors(const OperatorMatrix& op, double bin_width) {
    if (!(bin_width > 0.0)) throw Error("diagnostics", "bin_width must be positive");
    const auto eig = position_eigenbasis(op);
    const auto& w = eig.values;
    const auto n = w.size();
    const double lo = w.minCoeff();
    const double range = w.maxCoeff() - lo;
    const auto bins = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(range / bin_width)));

    SectorDecomposition out;
    out.bin_width = bin_width;
    std::map<std::int64_t, std::vector<Eigen::Index>> members;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto k = static_cast<std::int64_t>(std::floor((w(i) - lo) / bin_width));
        members[std::clamp<std::int64_t>(k, 0, bins - 1)].push_back(i);
    }
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i < n; ++i) {
        const double gap = w(i) - w(i - 1);
        if (gap > 1e-10) min_gap = std::min(min_gap, gap);
    }
    out.degenerate_warning = bin_width < min_gap;

    out.observable = Matrix::Zero(n, n);
    for (const auto& [k, idx] : members) {
        const double center = lo + (static_cast<double>(k) + 0.5) * bin_width;
        Matrix vecs(n, static_cast<Eigen::Index>(idx.size()));
        double spread = 0.0;
        for (std::size_t c = 0; c < idx.size(); ++c) {
            vecs.col(static_cast<Eigen::Index>(c)) = eig.vectors.col(idx[c]);
            spread = std::max(spread, std::abs(w(idx[c]) - center));
        }
        Matrix p = vecs * vecs.adjoint();
        out.observable += center * p;
        out.labels.push_back(center);
        out.sector_spread.push_back(spread);
        out.projectors.push_back(std::move(p));
    }
    for (const auto& p : out.projectors) {
        const Matrix block = (op.entries - out.observable) * p;
        const double norm2 = block.rows() ? Eigen::JacobiSVD<Matrix>(block).singularValues()(0) : 0.0;
        out.max_block_deviation = std::max(out.max_block_deviation, norm2);
    }
    return out;
}

struct MacroscopicNorms {
    double norm_main = 0.0;      // ||H_int - H'||_HS
    double norm_residual = 0.0;  // ||H'||_HS
};

/// Replaces q_i by the binned xi_i and k_i by pi_i in sum_i q_i E_i + k_i F_i and
/// reports the Hilbert-Schmidt norms of the binned part and of the remainder H'.
inline MacroscopicNorms macroscopic_decomposition(const EffectiveInteraction& eff,
                                                  const std::array<SectorDecomposition, 2>& sectors_q,
                                                  const std::array<SectorDecomposition, 2>& sectors_k) {
    const auto ne = eff.e_ops[0].dim();
    const auto ns = sectors_q[0].observable.rows();
    if (eff.h_int_total.dim() != ns * ne) throw Error("diagnostics", "macroscopic_decomposition: dimension mismatch");
    Matrix main = Matrix::Zero(ns * ne, ns * ne);
    for (int i = 0; i < 2; ++i) {
        if (sectors_q[i].observable.rows() != ns || sectors_k[i].observable.rows() != ns) {
            throw Error("diagnostics", "macroscopic_decomposition: sector dimension mismatch");
        }
        main += kron(sectors_q[i].observable, eff.e_ops[i].entries);
        main += kron(sectors_k[i].observable, eff.f_ops[i].entries);
    }
    MacroscopicNorms out;
    out.norm_main = hs_norm(main);
    out.norm_residual = hs_norm(eff.h_int_total.entries - main);
    return out;
}

/// First coherence revival of a finite environment, pi / (largest gap between
/// adjacent distinct levels of H_E).
inline double recurrence_time_estimate(const EnvSpec& env, double hbar = 1.0) {
    const auto w = hermitian_eigensystem(env.h_env.entries, "diagnostics").values;
    double gap = 0.0;
    for (Eigen::Index i = 1; i < w.size(); ++i) gap = std::max(gap, w(i) - w(i - 1));
    if (!(gap > 1e-12)) return std::numeric_limits<double>::infinity();
    return M_PI * hbar / gap;
}

enum class Regime { model_general_13, model_momentum_28, model_coordinate_24, undecohered_18, ambiguous };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::model_general_13: return "model_general_13";
        case Regime::model_momentum_28: return "model_momentum_28";
        case Regime::model_coordinate_24: return "model_coordinate_24";
        case Regime::undecohered_18: return "undecohered_18";
        case Regime::ambiguous: return "ambiguous";
    }
    return "ambiguous";
}

struct SweepPoint {
    double B = 0.0;
    DecoherenceEstimate position;
    DecoherenceEstimate momentum;
};

struct RegimeThresholds {
    double charge_e = 1.0;
    double field_scale = 1.0;      // coupling scale the field is compared with
    double weak_fraction = 0.01;   // weak: e|B|/2 <= weak_fraction * scale
    double strong_multiple = 100;  // strong: e|B|/2 >= strong_multiple * scale
    double pointer_factor = 10;    // tau separation that singles out a pointer basis
    double slope_tolerance = 0.25; // allowed deviation of d log tau / d log B from -1
};

struct RegimeClassification {
    Regime regime = Regime::ambiguous;
    std::string rationale;
};

/// Raised when a sweep lacks a weak-field or a strong-field point.
class ClassificationUnavailable : public Error {
public:
    explicit ClassificationUnavailable(const std::string& what) : Error("diagnostics", what) {}
};

namespace detail {

inline double tau_or_inf(const DecoherenceEstimate& e) {
    return e.tau_d ? *e.tau_d : std::numeric_limits<double>::infinity();
}

/// `mine` is a pointer basis: it decoheres and the other basis is >= factor slower.
inline bool is_pointer(const DecoherenceEstimate& mine, const DecoherenceEstimate& other, double factor) {
    if (!mine.tau_d) return false;
    return tau_or_inf(other) >= factor * *mine.tau_d;
}

}  // namespace detail

inline RegimeClassification classify_regime(std::vector<SweepPoint> sweep, const RegimeThresholds& th) {
    if (sweep.empty()) throw ClassificationUnavailable("empty sweep");
    std::sort(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) { return a.B < b.B; });
    auto drive = [&](double B) { return std::abs(th.charge_e * B) / 2.0; };
    auto weak = [&](double B) { return drive(B) <= th.weak_fraction * th.field_scale; };
    auto strong = [&](double B) { return drive(B) >= th.strong_multiple * th.field_scale; };
    if (std::none_of(sweep.begin(), sweep.end(), [&](const auto& p) { return weak(p.B); }) ||
        std::none_of(sweep.begin(), sweep.end(), [&](const auto& p) { return strong(p.B); })) {
        throw ClassificationUnavailable("sweep needs at least one weak-field and one strong-field point");
    }

    bool any_decay = false, q_everywhere = true, q_weak = false, q_strong = false, k_weak = false;
    for (const auto& p : sweep) {
        any_decay = any_decay || p.position.tau_d || p.momentum.tau_d;
        const bool qp = detail::is_pointer(p.position, p.momentum, th.pointer_factor);
        const bool kp = detail::is_pointer(p.momentum, p.position, th.pointer_factor);
        q_everywhere = q_everywhere && qp;
        if (weak(p.B)) {
            q_weak = q_weak || qp;
            k_weak = k_weak || kp;
        }
        if (strong(p.B)) q_strong = q_strong || qp;
    }

    if (!any_decay) return {Regime::undecohered_18, "no 1/e crossing in either basis at any field"};
    if (q_everywhere) return {Regime::model_coordinate_24, "position basis is the pointer basis at every field"};
    if (k_weak && q_strong) {
        return {Regime::model_momentum_28, "momentum pointer basis at weak field, position pointer basis at strong field"};
    }
    if (q_strong && !q_weak && !k_weak) {
        // tau_q ~ 1/B over the strong side of the sweep.
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : sweep) {
            if (p.B != 0.0 && drive(p.B) >= th.strong_multiple * th.field_scale / 10.0 &&
                detail::is_pointer(p.position, p.momentum, th.pointer_factor)) {
                pts.emplace_back(std::log(std::abs(p.B)), std::log(*p.position.tau_d));
            }
        }
        if (pts.size() >= 2) {
            double mx = 0, my = 0;
            for (const auto& [x, y] : pts) { mx += x; my += y; }
            mx /= static_cast<double>(pts.size());
            my /= static_cast<double>(pts.size());
            double sxy = 0, sxx = 0;
            for (const auto& [x, y] : pts) { sxy += (x - mx) * (y - my); sxx += (x - mx) * (x - mx); }
            const double slope = sxx > 0 ? sxy / sxx : 0.0;
            if (std::abs(slope + 1.0) > th.slope_tolerance) {
                return {Regime::ambiguous, "position pointer basis at strong field but tau_q ~ B^" +
                                               std::to_string(slope) + " instead of B^-1"};
            }
            return {Regime::model_general_13,
                    "position pointer basis only at strong field, tau_q ~ B^" + std::to_string(slope)};
        }
        return {Regime::model_general_13, "position pointer basis only at strong field"};
    }
    return {Regime::ambiguous, "no basis is singled out consistently across the sweep"};
}

/// Field where the faster-decohering basis switches from momentum to position.
struct Crossover {
    double B_star = 0.0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    bool interpolated = false;
};

inline std::optional<Crossover> find_crossover(std::vector<SweepPoint> sweep) {
    std::sort(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) { return a.B < b.B; });
    auto pref = [](const SweepPoint& p) {
        const double tq = detail::tau_or_inf(p.position), tk = detail::tau_or_inf(p.momentum);
        if (std::isinf(tq) && std::isinf(tk)) return 0;
        return tk < tq ? 1 : (tq < tk ? -1 : 0);
    };
    std::optional<std::size_t> last_k;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const int s = pref(sweep[i]);
        if (s > 0) last_k = i;
        if (s < 0 && last_k) {
            const auto& lo = sweep[*last_k];
            const auto& hi = sweep[i];
            Crossover c;
            c.bracket_low = lo.B;
            c.bracket_high = hi.B;
            if (lo.B > 0 && lo.position.tau_d && lo.momentum.tau_d && hi.position.tau_d && hi.momentum.tau_d) {
                const double d0 = std::log(*lo.position.tau_d / *lo.momentum.tau_d);
                const double d1 = std::log(*hi.position.tau_d / *hi.momentum.tau_d);
                const double x0 = std::log(lo.B), x1 = std::log(hi.B);
                c.B_star = std::exp(x0 + d0 / (d0 - d1) * (x1 - x0));
                c.interpolated = true;
            } else if (lo.B > 0) {
                c.B_star = std::sqrt(lo.B * hi.B);
            } else {
                c.B_star = hi.B / 10.0;
            }
            return c;
        }
    }
    return std::nullopt;
}

}  // namespace ncdeco
