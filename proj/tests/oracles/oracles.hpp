#pragma once

// Independent reference implementations. None of these call into the library's
// construction code beyond the raw q, k, C, D matrices.

#include "ncdeco/ncdeco.hpp"

#include <cmath>
#include <random>

namespace oracle {

using ncdeco::cplx;
using ncdeco::Matrix;
using ncdeco::Vector;

/// exp(a) by scaling and squaring with a Taylor series.
inline Matrix expm(const Matrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Matrix s = a / std::pow(2.0, squarings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k < 30; ++k) {
        term = (term * s / static_cast<double>(k)).eval();
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
    return sum;
}

/// Full |psi><psi| on the composite space, then contraction over the environment index.
inline Matrix partial_trace(const Vector& psi, Eigen::Index ds, Eigen::Index de) {
    const Matrix full = psi * psi.adjoint();
    Matrix rho = Matrix::Zero(ds, ds);
    for (Eigen::Index a = 0; a < ds; ++a)
        for (Eigen::Index b = 0; b < ds; ++b)
            for (Eigen::Index e = 0; e < de; ++e) rho(a, b) += full(a * de + e, b * de + e);
    return rho;
}

inline double eps(int a, int b) {
    if (a == b) return 0.0;
    return (a == 0 && b == 1) ? 1.0 : -1.0;
}

/// Interaction obtained by writing x, p through q, k, then k_l -> k_l - e (B/2) eps_lm q_m:
/// g_ij (q_i - theta/2 eps_il (k_l - eB/2 eps_lm q_m)) C_j
///   + f_ij (k_i - eB/2 eps_im q_m + sigma/2 eps_im q_m) D_j.
inline Matrix substituted_interaction(const ncdeco::CanonicalOps& ops, const ncdeco::CouplingMatrices& c,
                                      const ncdeco::EnvSpec& env, const ncdeco::NCParams& p, double B) {
    const auto ns = ops.q[0].dim();
    const auto ne = env.dim();
    const double eb2 = p.charge_e * B / 2.0;
    Matrix h = Matrix::Zero(ns * ne, ns * ne);
    for (int i = 0; i < 2; ++i) {
        Matrix x = ops.q[i].entries;
        for (int l = 0; l < 2; ++l) {
            Matrix kin = ops.k[l].entries;
            for (int m = 0; m < 2; ++m) kin -= eb2 * eps(l, m) * ops.q[m].entries;
            x -= (p.theta / 2.0) * eps(i, l) * kin;
        }
        Matrix mom = ops.k[i].entries;
        for (int m = 0; m < 2; ++m) {
            mom -= eb2 * eps(i, m) * ops.q[m].entries;
            mom += (p.sigma / 2.0) * eps(i, m) * ops.q[m].entries;
        }
        for (int j = 0; j < 2; ++j) {
            h += c.g(i, j) * Eigen::kroneckerProduct(x, env.c_ops[j].entries).eval();
            h += c.f(i, j) * Eigen::kroneckerProduct(mom, env.d_ops[j].entries).eval();
        }
    }
    return h;
}

/// Pointer residual by explicit block extraction: <m|H|m'> = sum_ab conj(U_am) U_bm' H_ab.
inline double pointer_residual(const Matrix& h, const Matrix& u, Eigen::Index ds, Eigen::Index de) {
    const Matrix big = Eigen::kroneckerProduct(u, Matrix::Identity(de, de)).eval();
    const Matrix r = big.adjoint() * h * big;
    double off = 0.0, all = 0.0;
    for (Eigen::Index m = 0; m < ds; ++m)
        for (Eigen::Index mp = 0; mp < ds; ++mp) {
            const double w = r.block(m * de, mp * de, de, de).squaredNorm();
            all += w;
            if (m != mp) off += w;
        }
    return off / all;
}

/// Double sum over off-diagonal elements after an explicit basis change.
inline double l1(const Matrix& rho, const Matrix& u) {
    const Matrix r = u.adjoint() * rho * u;
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.cols(); ++j)
            if (i != j) s += std::abs(r(i, j));
    return s;
}

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx{g(rng), g(rng)};
    return (0.5 * (m + m.adjoint())).eval();
}

inline Matrix random_unitary(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx{g(rng), g(rng)};
    Eigen::HouseholderQR<Matrix> qr(m);
    return qr.householderQ() * Matrix::Identity(n, n);
}

inline Vector random_state(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx{g(rng), g(rng)};
    return v / v.norm();
}

}  // namespace oracle
