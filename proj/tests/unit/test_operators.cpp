#include "ncdeco/operators.hpp"

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"

using namespace ncdeco;

namespace {

double block_err(const Matrix& c, const Matrix& expect, int d) {
    return max_abs(low_lying_block(c - expect, d, 6));
}

}  // namespace

TEST(Fock, CanonicalCommutatorBelowCutoff) {
    const int d = 8;
    const Matrix q = fock::position(d, 1.0);
    const Matrix k = fock::momentum(d, 1.0);
    const Matrix c = commutator(q, k);
    for (int n = 0; n < d - 1; ++n) EXPECT_NEAR(std::abs(c(n, n) - I_unit), 0.0, 1e-12) << n;
    // Truncation shows up only in the last level.
    EXPECT_NEAR(c(d - 1, d - 1).imag(), -(d - 1.0), 1e-12);
}

TEST(Fock, PositionAndMomentumHermitian) {
    EXPECT_TRUE(is_hermitian(fock::position(8, 0.7)));
    EXPECT_TRUE(is_hermitian(fock::momentum(8, 0.7)));
}

TEST(Operators, HilbertSpecDimensions) {
    HilbertSpec spec;
    EXPECT_EQ(spec.system_dim(), 64);
    EXPECT_EQ(spec.env_dim(), 16);
    EXPECT_EQ(spec.composite_dim(), 1024);
}

TEST(Operators, RejectsSmallAxis) {
    HilbertSpec spec;
    spec.d_axis = 3;
    EXPECT_THROW(spec.validate(), Error);
}

TEST(Operators, RefusesOversizedComposite) {
    HilbertSpec spec;
    spec.d_axis = 64;
    spec.env_banks = {{'C', 10, 1.0}, {'D', 10, 1.0}};
    try {
        spec.validate();
        FAIL() << "expected refusal";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("exceeds cap"), std::string::npos);
        EXPECT_EQ(e.stage(), "operators");
    }
}

TEST(Operators, CompositeDimSaturatesInsteadOfOverflowing) {
    HilbertSpec spec;
    spec.env_banks = {{'C', 40, 1.0}, {'D', 40, 1.0}};
    EXPECT_EQ(spec.composite_dim(), std::numeric_limits<std::int64_t>::max());
    EXPECT_THROW(spec.validate(), Error);
}

TEST(Operators, BoppShiftAtZeroIsIdentityMap) {
    HilbertSpec spec;
    const auto ops = build_canonical_ops(spec, 1.0);
    const auto nc = bopp_shift(ops, NCParams{});
    for (int a = 0; a < 2; ++a) {
        EXPECT_EQ(max_abs(nc.x[a].entries - ops.q[a].entries), 0.0);
        EXPECT_EQ(max_abs(nc.p[a].entries - ops.k[a].entries), 0.0);
    }
}

TEST(Operators, NoncommutativeAlgebraOnLowLyingBlock) {
    HilbertSpec spec;
    const auto ops = build_canonical_ops(spec, 1.0);
    const Matrix id = identity(ops.q[0].dim());
    for (double th : {0.0, 0.01, 0.1})
        for (double sg : {0.0, 0.01, 0.1}) {
            const NCParams p{th, sg, 1.0, 1.0};
            const auto nc = bopp_shift(ops, p);
            const std::array<const Matrix*, 4> v{&nc.x[0].entries, &nc.x[1].entries, &nc.p[0].entries,
                                                 &nc.p[1].entries};
            // Expected [v_a, v_b] / i
            Eigen::Matrix4d expect = Eigen::Matrix4d::Zero();
            expect(0, 1) = th;
            expect(1, 0) = -th;
            expect(2, 3) = sg;
            expect(3, 2) = -sg;
            const double mixed = 1.0 + th * sg / 4.0;
            expect(0, 2) = expect(1, 3) = mixed;
            expect(2, 0) = expect(3, 1) = -mixed;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    EXPECT_LT(block_err(commutator(*v[a], *v[b]), I_unit * expect(a, b) * id, spec.d_axis), 1e-9)
                        << "theta " << th << " sigma " << sg << " pair " << a << b;
        }
}

TEST(Operators, CommutatorScalesWithHbar) {
    HilbertSpec spec;
    const double hbar = 0.5;
    const auto ops = build_canonical_ops(spec, hbar);
    const auto nc = bopp_shift(ops, NCParams{0.1, 0.0, hbar, 1.0});
    const Matrix id = identity(ops.q[0].dim());
    // [x1, x2] = i hbar theta in the hbar-scaled Fock representation.
    EXPECT_LT(block_err(commutator(nc.x[0].entries, nc.x[1].entries), I_unit * hbar * 0.1 * id, spec.d_axis), 1e-9);
}

TEST(Operators, EigenbasisRejectsNonHermitian) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    EXPECT_THROW(position_eigenbasis(OperatorMatrix{m, false}), Error);
}

TEST(Operators, PositionEigenbasisDiagonalizes) {
    const auto q = make_operator(fock::position(8, 1.0), true);
    const auto eig = position_eigenbasis(q);
    const Matrix d = eig.vectors.adjoint() * q.entries * eig.vectors;
    EXPECT_LT(max_abs(d - Matrix(eig.values.cast<cplx>().asDiagonal())), 1e-12);
    for (Eigen::Index i = 1; i < eig.values.size(); ++i) EXPECT_LT(eig.values(i - 1), eig.values(i));
}

TEST(Linalg, ZheevrAccurateAtCompositeSize) {
    std::mt19937_64 rng(11);
    const Matrix h = oracle::random_hermitian(1024, rng);
    const auto eig = hermitian_eigensystem(h);
    const Matrix& v = eig.vectors;
    const double residual = max_abs(h * v - v * eig.values.cast<cplx>().asDiagonal());
    const double orth = max_abs(v.adjoint() * v - identity(1024));
    EXPECT_LT(residual, 1e-10);
    EXPECT_LT(orth, 1e-12);
}

TEST(Linalg, EigensolverRejectsNonFinite) {
    Matrix m = Matrix::Identity(3, 3);
    m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(hermitian_eigensystem(m), Error);
}
