#pragma once

// Independent oracles and fixtures shared by the test binaries. Nothing here
// calls the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dosres/model.hpp"

namespace dosres::testing {

inline Matrix E1() {
    Matrix m(2, 2);
    m << -3, -1, 12, 2;
    return m;
}

inline Matrix E2() {
    Matrix m(2, 2);
    m << -3, 1, -12, 2;
    return m;
}

/// Closed loops as displayed for the motivating example.
inline Matrix displayed_Ac() {
    Matrix A(6, 6);
    const Matrix e1 = E1(), e2 = E2();
    A << e1, e2, -e1, e1, e2, -2 * e1, -e1, e2, 2 * e1;
    return A;
}

inline Matrix displayed_Ad() {
    Matrix A = Matrix::Zero(6, 6);
    A.block(0, 0, 2, 2) = E1();
    A.block(2, 2, 2, 2) = E2();
    A.block(4, 4, 2, 2) = 2 * E1();
    return A;
}

inline Matrix displayed_Aa() {
    Matrix A = displayed_Ac();
    A.block(2, 4, 2, 2).setZero();
    return A;
}

/// Roots of a 2x2 block's characteristic polynomial by the quadratic formula.
inline std::pair<std::complex<double>, std::complex<double>> quadratic_eigs(const Matrix& M) {
    const double tr = M.trace(), det = M.determinant();
    const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4 * det));
    return {(tr + disc) / 2.0, (tr - disc) / 2.0};
}

/// Masked closed loop built entry by entry, without any block assembly helpers.
inline Matrix masked_closed_loop(const BlockSystem& sys, const Matrix& alpha) {
    const int N = sys.subsystems();
    const int n = sys.states();
    Matrix out = Matrix::Zero(n, n);
    int r = 0;
    for (int i = 0; i < N; ++i) {
        int c = 0;
        for (int j = 0; j < N; ++j) {
            Matrix blk = sys.A_blocks[i][j] + alpha(i, j) * sys.B_blocks[i] * sys.K_blocks[i][j];
            for (int p = 0; p < sys.state_dims[i]; ++p)
                for (int q = 0; q < sys.state_dims[j]; ++q) out(r + p, c + q) = blk(p, q);
            c += sys.state_dims[j];
        }
        r += sys.state_dims[i];
    }
    return out;
}

/// Solution X of A^T X + X A = -I by a Kronecker-product linear solve.
inline Matrix lyapunov_solution(const Matrix& A) {
    const Eigen::Index n = A.rows();
    Matrix L = Matrix::Zero(n * n, n * n);
    const Matrix At = A.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            // column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X
            for (Eigen::Index k = 0; k < n; ++k) {
                L(j * n + i, j * n + k) += At(i, k);
                L(j * n + i, k * n + i) += A(k, j);
            }
    Vector rhs = -Matrix::Identity(n, n).reshaped();
    Vector x = L.fullPivLu().solve(rhs);
    Matrix X = x.reshaped(n, n);
    return 0.5 * (X + X.transpose());
}

/**
 * Closed form of the capped Lyapunov value for a Hurwitz matrix:
 * g = -lambda_P / lambda_max(X), X solving A^T X + X A = -I.
 * (Any feasible P with A^T P + P A <= t I, t < 0, satisfies P >= -t X.)
 */
inline double g_closed_form(const Matrix& A, double lambda_P) {
    const Matrix X = lyapunov_solution(A);
    Eigen::SelfAdjointEigenSolver<Matrix> es(X, Eigen::EigenvaluesOnly);
    return -lambda_P / es.eigenvalues().maxCoeff();
}

/// Top two eigenvalues of the Lyapunov solution; g is differentiable where they differ.
inline double lyapunov_top_gap(const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(lyapunov_solution(A), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const Eigen::Index n = ev.size();
    return n < 2 ? 1.0 : (ev(n - 1) - ev(n - 2)) / std::abs(ev(n - 1));
}

/// Spectral abscissa from a full complex eigendecomposition of the same matrix.
inline double abscissa_oracle(const Matrix& M) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M.cast<std::complex<double>>());
    return es.eigenvalues().real().maxCoeff();
}

/// Block-formula gradient entry ((P W)_{[j,i]} ... ) written out directly:
/// eta_ij = sum over the (i,j) block of (W P)_{ba} (B_i K_ij)_{ab}.
inline Matrix gradient_block_formula(const BlockSystem& sys, const Matrix& P, const Matrix& W) {
    const int N = sys.subsystems();
    Matrix eta = Matrix::Zero(N, N);
    const Matrix WP = W * P;
    for (int i = 0; i < N; ++i) {
        if (sys.input_dims[i] == 0) continue;
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            const Matrix Q = sys.B_blocks[i] * sys.K_blocks[i][j];
            const Matrix WPji = WP.block(sys.state_offset(j), sys.state_offset(i), sys.state_dims[j], sys.state_dims[i]);
            eta(i, j) = (WPji * Q).trace();
        }
    }
    return eta;
}

/// ((P x)_i)^T B_i K_ij x_j.
inline Matrix gradient_vector_formula(const BlockSystem& sys, const Matrix& P, const Vector& x) {
    const int N = sys.subsystems();
    Matrix eta = Matrix::Zero(N, N);
    const Vector Px = P * x;
    for (int i = 0; i < N; ++i) {
        if (sys.input_dims[i] == 0) continue;
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            const Vector pxi = Px.segment(sys.state_offset(i), sys.state_dims[i]);
            const Vector xj = x.segment(sys.state_offset(j), sys.state_dims[j]);
            eta(i, j) = pxi.dot(sys.B_blocks[i] * sys.K_blocks[i][j] * xj);
        }
    }
    return eta;
}

/// Random small system with Gaussian blocks (not shifted).
inline BlockSystem gaussian_system(std::mt19937_64& rng, const std::vector<int>& n_dims, const std::vector<int>& m_dims,
                                   double k_scale = 1.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    BlockSystem sys = BlockSystem::zeros(n_dims, m_dims);
    auto fill = [&](Matrix& M, double s) {
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = s * nd(rng);
    };
    const auto N = n_dims.size();
    for (std::size_t i = 0; i < N; ++i) {
        fill(sys.B_blocks[i], 1.0);
        for (std::size_t j = 0; j < N; ++j) {
            fill(sys.A_blocks[i][j], i == j ? 1.0 : 0.3);
            fill(sys.K_blocks[i][j], k_scale);
        }
    }
    return sys;
}

inline Matrix random_relaxed(std::mt19937_64& rng, int N) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix a(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) a(i, j) = i == j ? 1.0 : u(rng);
    return a;
}

inline Matrix random_pure(std::mt19937_64& rng, int N) {
    std::bernoulli_distribution b(0.5);
    Matrix a(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) a(i, j) = i == j ? 1.0 : (b(rng) ? 1.0 : 0.0);
    return a;
}

/// Ten subsystems, m_i = 1 for the first nine, no control on the tenth.
inline BlockSystem ten_bus_shape() {
    std::vector<int> n(10, 2), m(10, 1);
    m[9] = 0;
    BlockSystem sys = BlockSystem::zeros(n, m);
    for (int i = 0; i < 10; ++i) sys.A_blocks[i][i] = -Matrix::Identity(2, 2);
    return sys;
}

/// A = -I with zero gain on the given partition.
inline BlockSystem stable_diagonal(const std::vector<int>& n_dims, const std::vector<int>& m_dims) {
    BlockSystem sys = BlockSystem::zeros(n_dims, m_dims);
    for (std::size_t i = 0; i < n_dims.size(); ++i)
        sys.A_blocks[i][i] = -Matrix::Identity(n_dims[i], n_dims[i]);
    return sys;
}

}  // namespace dosres::testing
