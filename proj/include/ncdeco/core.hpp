#pragma once

// Shared numeric types, error type and the dense Hermitian eigensolver backend.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef NCDECO_HAVE_LAPACKE
#include <lapacke.h>
#endif

namespace ncdeco {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};

/// Error raised by every module. `stage` names the pipeline stage that failed
/// (operators, model, dynamics, diagnostics, config, output, ...).
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// A dense operator with an optional Hermiticity promise that is checked on
/// construction through `make_operator`.
struct OperatorMatrix {
    Matrix entries;
    bool hermitian_hint = false;

    [[nodiscard]] Eigen::Index dim() const { return entries.rows(); }
};

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_error(const Matrix& m) {
    return max_abs(m - m.adjoint());
}

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
    return m.rows() == m.cols() && hermiticity_error(m) < tol;
}

inline OperatorMatrix make_operator(Matrix m, bool hermitian, const std::string& stage = "operators") {
    if (m.rows() != m.cols()) {
        throw Error(stage, "operator matrix is not square (" + std::to_string(m.rows()) + "x" +
                               std::to_string(m.cols()) + ")");
    }
    if (hermitian && !is_hermitian(m)) {
        throw Error(stage, "operator flagged Hermitian deviates by " +
                               std::to_string(hermiticity_error(m)));
    }
    return OperatorMatrix{std::move(m), hermitian};
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline double hs_norm(const Matrix& m) { return m.norm(); }

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
struct Eigensystem {
    RealVector values;
    Matrix vectors;
};

/// Dense Hermitian eigendecomposition. Uses LAPACK zheevr when available
/// (the divide-and-conquer driver in some OpenBLAS builds is unreliable above
/// n ~ 1000), otherwise Eigen's tridiagonal QR solver.
inline Eigensystem hermitian_eigensystem(const Matrix& h, const std::string& stage = "linalg") {
    const auto n = h.rows();
    if (n != h.cols()) throw Error(stage, "eigendecomposition of a non-square matrix");
    if (!h.allFinite()) throw Error(stage, "eigendecomposition input contains non-finite entries");
    Eigensystem out;
    if (n == 0) return out;
#ifdef NCDECO_HAVE_LAPACKE
    Matrix a = h;
    out.values.resize(n);
    out.vectors.resize(n, n);
    std::vector<lapack_int> support(static_cast<std::size_t>(2 * n));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_zheevr(
        LAPACK_COL_MAJOR, 'V', 'A', 'L', static_cast<lapack_int>(n),
        reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(n), 0.0, 0.0, 0, 0,
        0.0, &found, out.values.data(), reinterpret_cast<lapack_complex_double*>(out.vectors.data()),
        static_cast<lapack_int>(n), support.data());
    if (info != 0 || found != n) {
        throw Error(stage, "zheevr failed (info=" + std::to_string(info) + ", found " +
                               std::to_string(found) + " of " + std::to_string(n) +
                               " eigenpairs, hermiticity error " + std::to_string(hermiticity_error(h)) + ")");
    }
#else
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success) {
        throw Error(stage, "SelfAdjointEigenSolver did not converge (n=" + std::to_string(n) +
                               ", hermiticity error " + std::to_string(hermiticity_error(h)) + ")");
    }
    out.values = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
#endif
    return out;
}

}  // namespace ncdeco
