#include "ncdeco/diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles/oracles.hpp"

using namespace ncdeco;

namespace {

CoherenceTrace synthetic(const std::function<double(double)>& f, double dt, int n) {
    CoherenceTrace t;
    t.bases = {BasisTrace{"position", {}, {}}};
    for (int i = 0; i <= n; ++i) {
        t.times.push_back(i * dt);
        t.bases[0].raw.push_back(0.8 * f(i * dt));
    }
    t.normalize();
    return t;
}

SweepPoint point(double B, std::optional<double> tq, std::optional<double> tk) {
    SweepPoint p;
    p.B = B;
    p.position.tau_d = tq;
    p.momentum.tau_d = tk;
    return p;
}

}  // namespace

TEST(Coherence, DiagonalStateHasNone) {
    ReducedState r{Matrix(Eigen::Vector3cd(0.2, 0.3, 0.5).asDiagonal()), 0.0};
    EXPECT_EQ(coherence_l1(r, PointerBasisCandidate{BasisLabel::custom, identity(3)}), 0.0);
}

TEST(Coherence, PlusStateHasOne) {
    ReducedState r{Matrix::Constant(2, 2, cplx{0.5, 0.0}), 0.0};
    EXPECT_NEAR(coherence_l1(r, PointerBasisCandidate{BasisLabel::custom, identity(2)}), 1.0, 1e-15);
}

TEST(Coherence, MatchesBruteForceAndIsCovariant) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20; ++i) {
        const Vector psi = oracle::random_state(4, rng);
        const Matrix u = oracle::random_unitary(4, rng);
        const ReducedState r{psi * psi.adjoint(), 0.0};
        const PointerBasisCandidate b{BasisLabel::custom, u};
        const double c = coherence_l1(r, b);
        EXPECT_NEAR(c, oracle::l1(r.rho, u), 1e-12);
        // Relabel basis vectors.
        Matrix perm = u;
        perm.col(0).swap(perm.col(3));
        EXPECT_NEAR(coherence_l1(r, PointerBasisCandidate{BasisLabel::custom, perm}), c, 1e-12);
        // Rotate state and basis together.
        const Matrix w = oracle::random_unitary(4, rng);
        const ReducedState rr{w * r.rho * w.adjoint(), 0.0};
        EXPECT_NEAR(coherence_l1(rr, PointerBasisCandidate{BasisLabel::custom, w * u}), c, 1e-10);
        // Factored form.
        EXPECT_NEAR(coherence_l1_factored(psi, u), c, 1e-12);
    }
}

TEST(Coherence, BasisValidation) {
    Matrix m = identity(3);
    m(0, 1) = 0.1;
    EXPECT_THROW((PointerBasisCandidate{BasisLabel::custom, m}.validate()), Error);
    EXPECT_NO_THROW(make_position_basis(8, 1.0).validate());
}

TEST(Tau, ExponentialDecay) {
    const auto t = synthetic([](double x) { return std::exp(-x / 2.0); }, 0.01, 1000);
    const auto e = extract_decoherence_time(t, "position");
    ASSERT_TRUE(e.tau_d);
    EXPECT_NEAR(*e.tau_d, 2.0, 0.01);
    EXPECT_EQ(e.basis_label, "position");
}

TEST(Tau, GaussianDecay) {
    const auto t = synthetic([](double x) { return std::exp(-(x / 3.0) * (x / 3.0)); }, 0.01, 1000);
    const auto e = extract_decoherence_time(t, "position");
    ASSERT_TRUE(e.tau_d);
    EXPECT_NEAR(*e.tau_d, 3.0, 0.02);
}

TEST(Tau, ConstantTraceIsNone) {
    const auto t = synthetic([](double) { return 1.0; }, 0.1, 50);
    EXPECT_FALSE(extract_decoherence_time(t, "position").tau_d);
}

TEST(Tau, InterpolatedCrossingHitsInverseE) {
    const auto t = synthetic([](double x) { return 1.0 - x; }, 0.25, 4);
    const auto e = extract_decoherence_time(t, "position");
    ASSERT_TRUE(e.tau_d);
    EXPECT_NEAR(*e.tau_d, 1.0 - std::exp(-1.0), 1e-15);
}

TEST(Tau, TimeRescalingScalesTau) {
    const auto f = [](double x) { return std::exp(-x / 2.0) * (1.0 + 0.1 * std::cos(5 * x)); };
    const auto a = extract_decoherence_time(synthetic(f, 0.01, 1000), "position");
    CoherenceTrace scaled = synthetic(f, 0.01, 1000);
    for (auto& x : scaled.times) x *= 3.0;
    const auto b = extract_decoherence_time(scaled, "position");
    ASSERT_TRUE(a.tau_d && b.tau_d);
    EXPECT_NEAR(*b.tau_d, 3.0 * *a.tau_d, 1e-12);
}

TEST(Tau, Errors) {
    auto t = synthetic([](double) { return 0.0; }, 0.1, 5);
    EXPECT_THROW(extract_decoherence_time(t, "position"), Error);
    auto one = synthetic([](double) { return 1.0; }, 0.1, 0);
    EXPECT_THROW(extract_decoherence_time(one, "position"), Error);
    EXPECT_THROW(extract_decoherence_time(synthetic([](double) { return 1.0; }, 0.1, 5), "momentum"), Error);
}

class Residual : public ::testing::Test {
protected:
    HilbertSpec spec;
    CanonicalOps ops = build_canonical_ops(spec, 1.0);
    PointerBasisCandidate pos = make_position_basis(8, 1.0);
    PointerBasisCandidate mom = make_momentum_basis(8, 1.0);
    Matrix c = pauli::x();
};

TEST_F(Residual, ExactPointerBasis) {
    const auto h = make_operator(kron(ops.q[0].entries, c), true);
    EXPECT_LT(pointer_residual(h, pos, 64, 2), 1e-12);
    EXPECT_GT(pointer_residual(h, mom, 64, 2), 0.9);
}

TEST_F(Residual, MatchesDirectBlockComputation) {
    std::mt19937_64 rng(12);
    const Matrix h = oracle::random_hermitian(64 * 4, rng);
    for (const auto* b : {&pos, &mom}) {
        EXPECT_NEAR(pointer_residual(make_operator(h, true), *b, 64, 4), oracle::pointer_residual(h, b->vectors, 64, 4),
                    1e-12);
    }
}

TEST_F(Residual, ContinuousInMixing) {
    const Matrix hq = kron(ops.q[0].entries, c);
    const Matrix hk = kron(ops.k[1].entries, pauli::z());
    double prev = 1.0;
    for (double a : {1.0, 0.3, 0.1, 0.03, 0.01, 0.0}) {
        const Matrix h = hq + a * hk;
        const double r = pointer_residual(make_operator(h, true), pos, 64, 2);
        EXPECT_NEAR(r, oracle::pointer_residual(h, pos.vectors, 64, 2), 1e-12);
        EXPECT_LE(r, prev + 1e-15);
        prev = r;
    }
    EXPECT_LT(prev, 1e-12);
}

TEST_F(Residual, ScaleAndPermutationInvariant) {
    std::mt19937_64 rng(13);
    const Matrix h = oracle::random_hermitian(128, rng);
    const double r = pointer_residual(make_operator(h, true), mom, 64, 2);
    EXPECT_NEAR(pointer_residual(make_operator((-3.5 * h).eval(), true), mom, 64, 2), r, 1e-12);
    Matrix perm = mom.vectors;
    std::mt19937_64 shuffle_rng(1);
    std::vector<int> order(64);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int i = 0; i < 64; ++i) perm.col(i) = mom.vectors.col(order[i]);
    EXPECT_NEAR(pointer_residual(make_operator(h, true), PointerBasisCandidate{BasisLabel::custom, perm}, 64, 2), r,
                1e-12);
}

TEST_F(Residual, RejectsZeroInteraction) {
    EXPECT_THROW(pointer_residual(make_operator(Matrix::Zero(128, 128), true), pos, 64, 2), Error);
}

TEST(Sectors, ProjectorsResolveIdentity) {
    HilbertSpec spec;
    const auto ops = build_canonical_ops(spec, 1.0);
    for (double w : {0.05, 0.5, 1.0, 3.0, 100.0}) {
        const auto s = coarse_grain_sectors(ops.k[0], w);
        Matrix sum = Matrix::Zero(64, 64);
        for (std::size_t n = 0; n < s.projectors.size(); ++n) {
            sum += s.projectors[n];
            for (std::size_t m = 0; m < s.projectors.size(); ++m)
                if (m != n) {
                    EXPECT_LT(max_abs(s.projectors[n] * s.projectors[m]), 1e-10);
                }
        }
        EXPECT_LT(max_abs(sum - identity(64)), 1e-10) << w;
    }
}

TEST(Sectors, FineBinsReproduceOperator) {
    const auto q = make_operator(fock::position(8, 1.0), true);
    const double w = 1e-3;
    const auto s = coarse_grain_sectors(q, w);
    EXPECT_EQ(s.projectors.size(), 8u);
    EXPECT_TRUE(s.degenerate_warning);
    EXPECT_LE(max_abs(s.observable - q.entries), w / 2.0 + 1e-12);
}

TEST(Sectors, WideBinIsSingleSector) {
    const auto q = make_operator(fock::position(8, 1.0), true);
    const auto s = coarse_grain_sectors(q, 100.0);
    ASSERT_EQ(s.projectors.size(), 1u);
    EXPECT_LT(max_abs(s.observable - s.labels[0] * identity(8)), 1e-12);
}

TEST(Sectors, BlockDeviationBoundedByHalfBin) {
    HilbertSpec spec;
    const auto ops = build_canonical_ops(spec, 1.0);
    const auto s = coarse_grain_sectors(ops.q[0], 1.0);
    for (std::size_t n = 0; n < s.projectors.size(); ++n) {
        const Matrix block = (ops.q[0].entries - s.observable) * s.projectors[n];
        const double norm = Eigen::JacobiSVD<Matrix>(block).singularValues()(0);
        EXPECT_LE(norm, 0.5 + 1e-10);
        EXPECT_LE(norm, s.max_block_deviation + 1e-12);
    }
    EXPECT_EQ(s.von_neumann_factor, 60.0);
    EXPECT_THROW(coarse_grain_sectors(ops.q[0], 0.0), Error);
}

class Macro : public ::testing::Test {
protected:
    HilbertSpec spec;
    CanonicalOps ops = build_canonical_ops(spec, 1.0);
    EnvSpec env = make_qubit_environment(spec);
    CouplingMatrices c{Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()};
    NCParams p{0.05, 0.05, 1.0, 1.0};

    MacroscopicNorms run(double w, const CouplingMatrices& cc) const {
        const auto eff = build_effective_interaction(ops, cc, env, p, 2.0);
        std::array<SectorDecomposition, 2> sq, sk;
        for (int i = 0; i < 2; ++i) {
            sq[i] = coarse_grain_sectors(ops.q[i], w);
            sk[i] = coarse_grain_sectors(ops.k[i], w);
        }
        return macroscopic_decomposition(eff, sq, sk);
    }
};

TEST_F(Macro, FineBinsLeaveNoResidual) {
    const auto m = run(1e-6, c);
    EXPECT_LT(m.norm_residual, 1e-4 * m.norm_main);
}

TEST_F(Macro, ResidualShrinksWithRefinement) {
    double prev = std::numeric_limits<double>::infinity();
    for (double w : {2.0, 1.0, 0.5, 0.25, 0.1}) {
        const auto m = run(w, c);
        if (w == 1.0) {
            EXPECT_LT(m.norm_residual / m.norm_main, 0.5);
        }
        EXPECT_LT(m.norm_residual / m.norm_main, prev) << w;
        prev = m.norm_residual / m.norm_main;
    }
}

TEST_F(Macro, LinearInCouplings) {
    const auto a = run(1.0, c);
    const CouplingMatrices scaled{2.5 * c.g, 2.5 * c.f};
    const auto b = run(1.0, scaled);
    EXPECT_NEAR(b.norm_main, 2.5 * a.norm_main, 1e-10 * a.norm_main);
    EXPECT_NEAR(b.norm_residual, 2.5 * a.norm_residual, 1e-10 * a.norm_main);
}

TEST(Classify, GeneralModel) {
    std::vector<SweepPoint> s{point(0, std::nullopt, std::nullopt), point(0.01, std::nullopt, std::nullopt),
                              point(100, 1.0 / 100, std::nullopt), point(300, 1.0 / 300, std::nullopt),
                              point(1000, 1.0 / 1000, std::nullopt)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::model_general_13);
}

TEST(Classify, MomentumModel) {
    std::vector<SweepPoint> s{point(0, std::nullopt, 0.2), point(0.01, std::nullopt, 0.2), point(1, 3.0, 0.5),
                              point(1000, 0.001, std::nullopt)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::model_momentum_28);
}

TEST(Classify, CoordinateModel) {
    std::vector<SweepPoint> s{point(0, 0.2, std::nullopt), point(10, 0.21, std::nullopt),
                              point(1000, 0.19, std::nullopt)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::model_coordinate_24);
}

TEST(Classify, Undecohered) {
    std::vector<SweepPoint> s{point(0, std::nullopt, std::nullopt), point(1000, std::nullopt, std::nullopt)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::undecohered_18);
}

TEST(Classify, AmbiguousWhenRatesComparable) {
    std::vector<SweepPoint> s{point(0, 0.2, 0.3), point(10, 0.2, 0.3), point(1000, 0.2, 0.25)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::ambiguous);
}

TEST(Classify, AmbiguousWhenStrongFieldSlopeWrong) {
    std::vector<SweepPoint> s{point(0, std::nullopt, std::nullopt), point(200, 0.01, std::nullopt),
                              point(2000, 0.01, std::nullopt)};
    EXPECT_EQ(classify_regime(s, RegimeThresholds{}).regime, Regime::ambiguous);
}

TEST(Classify, NeedsWeakAndStrongPoints) {
    std::vector<SweepPoint> s{point(1, 0.2, std::nullopt), point(10, 0.2, std::nullopt)};
    EXPECT_THROW(classify_regime(s, RegimeThresholds{}), ClassificationUnavailable);
}

TEST(Crossover, InterpolatesInLogField) {
    std::vector<SweepPoint> s{point(0, std::nullopt, 0.2), point(1, 1.0, 0.1), point(100, 0.1, 1.0)};
    const auto c = find_crossover(s);
    ASSERT_TRUE(c);
    EXPECT_TRUE(c->interpolated);
    EXPECT_NEAR(c->B_star, 10.0, 1e-9);
    EXPECT_FALSE(find_crossover({point(0, 0.1, std::nullopt), point(10, 0.1, std::nullopt)}));
}

TEST(Recurrence, QubitEnvironment) {
    HilbertSpec spec;
    EXPECT_NEAR(recurrence_time_estimate(make_qubit_environment(spec)), M_PI, 1e-12);
}
