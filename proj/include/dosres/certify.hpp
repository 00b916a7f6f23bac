#pragma once

// Lyapunov certificates for post-attack closed loops.
//
// g(alpha) = min { t : A(alpha)^T P + P A(alpha) <= t I,  0 <= P <= lambda_P I }
//
// and the pairwise common-Lyapunov feasibility test used for the convexity
// argument on segments between pure strategies.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dosres/model.hpp"
#include "dosres/sdp.hpp"
#include "dosres/spectra.hpp"

namespace dosres {

struct SdpSettings {
    double lambda_P = 1.0;
    double tol_feas = 1e-8;
    double tol_gap = 1e-7;
    int max_sdp_iters = 200;

    void check() const {
        if (!(lambda_P > 0 && tol_feas > 0 && tol_gap > 0 && max_sdp_iters > 0))
            throw std::invalid_argument("SdpSettings: all fields must be positive");
    }
};

struct LyapunovSolution {
    double t_star = 0.0;
    Matrix P_star;
    double feas_residual = 0.0;
    double gap_estimate = 0.0;
    int iterations = 0;
    // Trace-one PSD multiplier of the eigenvalue constraint. At the optimum
    // A^T P + P A = t I, so the top eigenvector is not unique; this matrix is
    // the direction that makes tr(W (A^T P + P A)) differentiable in alpha.
    Matrix multiplier;
};

namespace detail {

// Basis of symmetric n x n matrices: E_kk, then E_kl + E_lk for k < l.
inline std::vector<Matrix> symmetric_basis(int n) {
    std::vector<Matrix> basis;
    basis.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
    for (int k = 0; k < n; ++k) {
        Matrix E = Matrix::Zero(n, n);
        E(k, k) = 1.0;
        basis.push_back(std::move(E));
    }
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
            Matrix E = Matrix::Zero(n, n);
            E(k, l) = E(l, k) = 1.0;
            basis.push_back(std::move(E));
        }
    return basis;
}

// Trace-free symmetric basis: E_kk - E_nn for k < n, then off-diagonal pairs.
inline std::vector<Matrix> trace_free_basis(int n) {
    std::vector<Matrix> basis;
    for (int k = 0; k + 1 < n; ++k) {
        Matrix E = Matrix::Zero(n, n);
        E(k, k) = 1.0;
        E(n - 1, n - 1) = -1.0;
        basis.push_back(std::move(E));
    }
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
            Matrix E = Matrix::Zero(n, n);
            E(k, l) = E(l, k) = 1.0;
            basis.push_back(std::move(E));
        }
    return basis;
}

// The primal residual enters the optimality bound through |y^T r_p|, so it
// is held to the gap tolerance; tol_feas governs the returned certificate.
inline IpmOptions ipm_options(const SdpSettings& s) {
    return IpmOptions{s.tol_gap, std::max(s.tol_feas, s.tol_gap), s.max_sdp_iters};
}

}  // namespace detail

/// Residual of (t, P) against the capped Lyapunov constraints, by direct eigenvalue evaluation.
inline double lyapunov_residual(const Matrix& A, const Matrix& P, double t, double lambda_P) {
    const Vector pe = eigenvalues_sym(P);
    const double lmax_s = max_eigpair_sym(lyapunov_operator(A, P)).value;
    return std::max({0.0, lmax_s - t, -pe(0), pe(pe.size() - 1) - lambda_P});
}

/// g evaluated for an explicit closed-loop matrix.
inline LyapunovSolution solve_g(const Matrix& A, const SdpSettings& settings) {
    settings.check();
    const auto n = static_cast<int>(A.rows());
    const double cap = settings.lambda_P;
    const auto basis = detail::symmetric_basis(n);

    // Variables: y = (t, p_1, ..., p_q). Blocks: tI - (A^T P + P A), P, cap I - P.
    LmiProblem prob;
    prob.block_sizes = {n, n, n};
    prob.C = {Matrix::Zero(n, n), Matrix::Zero(n, n), cap * Matrix::Identity(n, n)};
    prob.F.resize(basis.size() + 1, std::vector<Matrix>(3));
    prob.F[0][0] = -Matrix::Identity(n, n);
    for (std::size_t q = 0; q < basis.size(); ++q) {
        prob.F[q + 1][0] = lyapunov_operator(A, basis[q]);
        prob.F[q + 1][1] = -basis[q];
        prob.F[q + 1][2] = basis[q];
    }
    prob.b = Vector::Zero(prob.variables());
    prob.b(0) = -1.0;

    Vector y0 = Vector::Zero(prob.variables());
    const Matrix S0 = lyapunov_operator(A, 0.5 * cap * Matrix::Identity(n, n));
    y0(0) = max_eigpair_sym(S0).value + 1.0 + 0.1 * S0.norm();
    for (int k = 0; k < n; ++k) y0(1 + k) = 0.5 * cap;

    // Strictly feasible primal start: tr X0 = 1 and X1 - X2 = A X0 + X0 A^T.
    const Matrix D = detail::sym(A + A.transpose()) / n;
    const double shift = std::max(0.0, -eigenvalues_sym(D)(0)) + 1.0;
    const std::vector<Matrix> X0{Matrix::Identity(n, n) / n, D + shift * Matrix::Identity(n, n),
                                 shift * Matrix::Identity(n, n)};

    // t and P scale with the cap, so the gap is measured in units of lambda_P.
    IpmOptions opt = detail::ipm_options(settings);
    opt.tol_gap *= cap;
    opt.tol_feas *= std::max(1.0, cap);
    const IpmResult r = solve_lmi(prob, y0, opt, X0);

    LyapunovSolution sol;
    sol.t_star = r.y(0);
    sol.P_star = Matrix::Zero(n, n);
    for (std::size_t q = 0; q < basis.size(); ++q) sol.P_star += r.y(static_cast<Eigen::Index>(q) + 1) * basis[q];
    sol.gap_estimate = std::max(r.complementarity, std::abs(r.primal_objective - r.dual_objective)) / cap;
    sol.feas_residual = lyapunov_residual(A, sol.P_star, sol.t_star, cap);
    sol.iterations = r.iterations;
    sol.multiplier = r.X[0];
    return sol;
}

/// g(alpha): optimal value and certificate of the capped Lyapunov SDP for A(alpha).
inline LyapunovSolution solve_g(const BlockSystem& sys, const RelaxedStrategy& alpha, const SdpSettings& settings = {}) {
    validate(sys);
    return solve_g(closed_loop(sys, alpha), settings);
}

struct CommonLyapunovResult {
    std::optional<Matrix> P;  // empty when infeasible
    double margin = 0.0;      // optimal s in A_k^T P + P A_k <= s I

    [[nodiscard]] bool feasible() const { return P.has_value(); }
};

/// Infeasibility is declared when the best achievable margin exceeds this.
inline constexpr double kInfeasibilityTol = 1e-7;

/**
 * Common Lyapunov matrix for a family of closed loops under the
 * normalization trace(P) = 1.
 *
 * Solves min s s.t. A_k^T P + P A_k <= s I for every k, P >= 0, trace P = 1.
 * With trace P = 1 and P >= 0 the cap P <= lambda_P I holds automatically
 * for lambda_P >= 1, so it is not imposed as a separate block.
 */
inline CommonLyapunovResult common_lyapunov(const std::vector<Matrix>& loops, const SdpSettings& settings = {}) {
    settings.check();
    if (settings.lambda_P < 1.0) throw std::invalid_argument("common_lyapunov requires lambda_P >= 1");
    if (loops.empty()) throw std::invalid_argument("common_lyapunov: no closed loops given");
    const auto n = static_cast<int>(loops.front().rows());
    const auto basis = detail::trace_free_basis(n);
    const Matrix P0 = Matrix::Identity(n, n) / n;
    const std::size_t nl = loops.size();

    LmiProblem prob;
    prob.block_sizes.assign(nl + 1, n);
    prob.C.resize(nl + 1);
    for (std::size_t k = 0; k < nl; ++k) prob.C[k] = -lyapunov_operator(loops[k], P0);
    prob.C[nl] = P0;
    prob.F.resize(basis.size() + 1, std::vector<Matrix>(nl + 1));
    for (std::size_t k = 0; k < nl; ++k) prob.F[0][k] = -Matrix::Identity(n, n);
    for (std::size_t q = 0; q < basis.size(); ++q) {
        for (std::size_t k = 0; k < nl; ++k) prob.F[q + 1][k] = lyapunov_operator(loops[k], basis[q]);
        prob.F[q + 1][nl] = -basis[q];
    }
    prob.b = Vector::Zero(prob.variables());
    prob.b(0) = -1.0;

    Vector y0 = Vector::Zero(prob.variables());
    double s0 = 0.0;
    for (const auto& A : loops) s0 = std::max(s0, max_eigpair_sym(lyapunov_operator(A, P0)).value);
    y0(0) = s0 + 1.0;

    // Strictly feasible primal start: loop blocks I / (n nl), P block matching
    // the trace-free part of sum_k (A_k X_k + X_k A_k^T), shifted to be definite.
    std::vector<Matrix> X0(nl + 1);
    Matrix D = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < nl; ++k) {
        X0[k] = Matrix::Identity(n, n) / (static_cast<double>(n) * static_cast<double>(nl));
        D += detail::sym(loops[k] * X0[k] + X0[k] * loops[k].transpose());
    }
    D -= D.trace() / n * Matrix::Identity(n, n);
    X0[nl] = D + (std::max(0.0, -eigenvalues_sym(D)(0)) + 1.0) * Matrix::Identity(n, n);

    const IpmResult r = solve_lmi(prob, y0, detail::ipm_options(settings), X0);

    CommonLyapunovResult out;
    out.margin = r.y(0);
    if (out.margin > kInfeasibilityTol) return out;
    Matrix P = P0;
    for (std::size_t q = 0; q < basis.size(); ++q) P += r.y(static_cast<Eigen::Index>(q) + 1) * basis[q];
    out.P = detail::sym(P);
    return out;
}

inline CommonLyapunovResult common_lyapunov(const BlockSystem& sys, const AttackStrategy& a1, const AttackStrategy& a2,
                                            const SdpSettings& settings = {}) {
    validate(sys);
    return common_lyapunov(std::vector<Matrix>{closed_loop(sys, a1), closed_loop(sys, a2)}, settings);
}

/// Solver failure on a specific strategy pair (indices into the supplied list).
class PairSolverError : public SolverError {
public:
    PairSolverError(std::size_t first, std::size_t second, const std::string& what)
        : SolverError("pair (" + std::to_string(first) + ", " + std::to_string(second) + "): " + what),
          first_(first), second_(second) {}

    [[nodiscard]] std::size_t first() const { return first_; }
    [[nodiscard]] std::size_t second() const { return second_; }

private:
    std::size_t first_;
    std::size_t second_;
};

struct Assumption1Result {
    std::optional<std::pair<std::size_t, std::size_t>> failing_pair;

    [[nodiscard]] bool holds() const { return !failing_pair.has_value(); }
};

/// Pairwise common-Lyapunov check over a list of pure strategies. A single
/// strategy is paired with itself.
inline Assumption1Result assumption1_check(const BlockSystem& sys, const std::vector<AttackStrategy>& strategies,
                                           const SdpSettings& settings = {}) {
    if (strategies.empty()) throw std::invalid_argument("assumption1_check: empty strategy list");
    validate(sys);
    std::vector<Matrix> loops;
    loops.reserve(strategies.size());
    for (const auto& s : strategies) loops.push_back(closed_loop(sys, s));

    auto run = [&](std::size_t i, std::size_t j) {
        try {
            return common_lyapunov(std::vector<Matrix>{loops[i], loops[j]}, settings).feasible();
        } catch (const SolverError& e) {
            throw PairSolverError(i, j, e.what());
        }
    };
    if (strategies.size() == 1) {
        if (!run(0, 0)) return {std::make_pair(std::size_t{0}, std::size_t{0})};
        return {};
    }
    for (std::size_t i = 0; i < strategies.size(); ++i)
        for (std::size_t j = i + 1; j < strategies.size(); ++j)
            if (!run(i, j)) return {std::make_pair(i, j)};
    return {};
}

}  // namespace dosres
