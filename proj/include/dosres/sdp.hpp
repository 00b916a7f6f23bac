#pragma once

// Primal-dual interior-point solver for small dense block-diagonal LMIs.
//
//   maximize    b^T y
//   subject to  Z(y) = C - sum_i y_i F_i  >= 0      (block diagonal)
//
// paired with the primal  minimize <C,X>  s.t.  <F_i,X> = b_i,  X >= 0.
//
// The dual iterate starts strictly feasible and stays feasible, so every
// returned y carries a valid certificate; the primal side is an infeasible
// start driven to feasibility. Search direction is HKM with a Mehrotra
// predictor-corrector step.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dosres/model.hpp"

namespace dosres {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One LMI problem in the form above. An empty F[i][b] stands for a zero block.
struct LmiProblem {
    std::vector<int> block_sizes;
    std::vector<Matrix> C;
    std::vector<std::vector<Matrix>> F;
    Vector b;

    [[nodiscard]] int variables() const { return static_cast<int>(F.size()); }

    [[nodiscard]] std::vector<Matrix> slack(const Vector& y) const {
        std::vector<Matrix> Z = C;
        for (int i = 0; i < variables(); ++i)
            for (std::size_t k = 0; k < block_sizes.size(); ++k)
                if (F[i][k].size() != 0) Z[k] -= y(i) * F[i][k];
        return Z;
    }
};

struct IpmOptions {
    double tol_gap = 1e-9;
    double tol_feas = 1e-9;
    int max_iters = 200;
};

struct IpmResult {
    Vector y;
    std::vector<Matrix> X;
    std::vector<Matrix> Z;
    double dual_objective = 0.0;
    double primal_objective = 0.0;
    double complementarity = 0.0;  // <X,Z>
    double primal_residual = 0.0;  // ||b - A(X)||
    int iterations = 0;
};

namespace detail {

inline double inner(const std::vector<Matrix>& U, const std::vector<Matrix>& V) {
    double s = 0.0;
    for (std::size_t k = 0; k < U.size(); ++k) s += U[k].cwiseProduct(V[k]).sum();
    return s;
}

// Largest step t in (0, inf] with S + t dS >= 0, given S > 0.
inline double max_step(const std::vector<Matrix>& S, const std::vector<Matrix>& dS) {
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < S.size(); ++k) {
        Eigen::LLT<Matrix> llt(S[k]);
        if (llt.info() != Eigen::Success) return 0.0;
        const Matrix L = llt.matrixL();
        Matrix W = L.triangularView<Eigen::Lower>().solve(dS[k]);
        W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        if (lmin < 0) step = std::min(step, -1.0 / lmin);
    }
    return step;
}

inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace detail

/**
 * Solves the LMI problem from a strictly feasible dual point y0 and, if
 * given, a positive definite primal point X0 (identity blocks otherwise).
 *
 * Throws SolverError if y0 is not strictly feasible or the iteration does
 * not reach the requested gap and primal residual within max_iters.
 */
inline IpmResult solve_lmi(const LmiProblem& prob, const Vector& y0, const IpmOptions& opt = {},
                           const std::vector<Matrix>& X0 = {}) {
    const int m = prob.variables();
    const std::size_t nb = prob.block_sizes.size();
    int total_dim = 0;
    for (int s : prob.block_sizes) total_dim += s;

    IpmResult res;
    res.y = y0;
    res.Z = prob.slack(res.y);
    if (!X0.empty()) {
        if (X0.size() != nb) throw std::invalid_argument("solve_lmi: initial primal point has the wrong block count");
        for (const auto& Xk : X0)
            if (Eigen::LLT<Matrix>(Xk).info() != Eigen::Success)
                throw std::invalid_argument("solve_lmi: initial primal point is not positive definite");
        res.X = X0;
    } else {
        res.X.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) res.X[k] = Matrix::Identity(prob.block_sizes[k], prob.block_sizes[k]);
    }

    auto apply_A = [&](const std::vector<Matrix>& U) {
        Vector out = Vector::Zero(m);
        for (int i = 0; i < m; ++i)
            for (std::size_t k = 0; k < nb; ++k)
                if (prob.F[i][k].size() != 0) out(i) += prob.F[i][k].cwiseProduct(U[k]).sum();
        return out;
    };
    auto apply_At = [&](const Vector& v) {
        std::vector<Matrix> out(nb);
        for (std::size_t k = 0; k < nb; ++k) out[k] = Matrix::Zero(prob.block_sizes[k], prob.block_sizes[k]);
        for (int i = 0; i < m; ++i)
            for (std::size_t k = 0; k < nb; ++k)
                if (prob.F[i][k].size() != 0) out[k] += v(i) * prob.F[i][k];
        return out;
    };

    std::vector<Matrix> Zinv(nb);
    const double b_norm = prob.b.norm();

    for (int iter = 0;; ++iter) {
        for (std::size_t k = 0; k < nb; ++k) {
            Eigen::LLT<Matrix> llt(res.Z[k]);
            if (llt.info() != Eigen::Success) {
                throw SolverError(iter == 0 ? "initial dual point is not strictly feasible"
                                            : "dual slack lost definiteness");
            }
            Zinv[k] = llt.solve(Matrix::Identity(prob.block_sizes[k], prob.block_sizes[k]));
            Zinv[k] = detail::sym(Zinv[k]);
        }
        const Vector rp = prob.b - apply_A(res.X);
        res.complementarity = detail::inner(res.X, res.Z);
        res.primal_residual = rp.norm();
        res.dual_objective = prob.b.dot(res.y);
        res.primal_objective = detail::inner(prob.C, res.X);
        res.iterations = iter;

        if (res.complementarity <= opt.tol_gap && res.primal_residual <= opt.tol_feas * (1.0 + b_norm) &&
            std::abs(res.primal_objective - res.dual_objective) <= opt.tol_gap)
            return res;
        if (iter >= opt.max_iters) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "interior-point iteration did not converge in %d iterations (gap %.3g, primal residual %.3g)",
                          opt.max_iters, res.complementarity, res.primal_residual);
            throw SolverError(msg);
        }

        const double mu = res.complementarity / total_dim;

        // Schur complement M_ij = tr(F_i X F_j Z^-1) = <G_i, G_j> with
        // G_i = L^-1 F_i R, Z = L L^T, X = R R^T. Forming M from G keeps it
        // symmetric positive semidefinite to working precision.
        Eigen::Index rows = 0;
        for (int s : prob.block_sizes) rows += static_cast<Eigen::Index>(s) * s;
        Matrix G = Matrix::Zero(rows, m);
        Eigen::Index row0 = 0;
        for (std::size_t k = 0; k < nb; ++k) {
            const int s = prob.block_sizes[k];
            Eigen::LLT<Matrix> zf(res.Z[k]), xf(res.X[k]);
            if (xf.info() != Eigen::Success) throw SolverError("primal iterate lost definiteness");
            const Matrix Lz = zf.matrixL();
            const Matrix Rx = xf.matrixL();
            for (int i = 0; i < m; ++i) {
                if (prob.F[i][k].size() == 0) continue;
                const Matrix Gi = Lz.triangularView<Eigen::Lower>().solve(prob.F[i][k] * Rx);
                G.col(i).segment(row0, static_cast<Eigen::Index>(s) * s) = Gi.reshaped();
            }
            row0 += static_cast<Eigen::Index>(s) * s;
        }
        // A relative ridge keeps dy bounded when the optimal P is nearly
        // non-unique; the primal residual it leaves is corrected on later steps.
        Matrix M = G.transpose() * G;
        const double ridge = 1e-15 * std::max(1.0, M.diagonal().maxCoeff());
        M.diagonal().array() += ridge;
        Eigen::LLT<Matrix> schur(M);
        if (schur.info() != Eigen::Success) throw SolverError("Schur complement is not positive definite");
        auto solve_schur = [&](const Vector& r) -> Vector {
            Vector x = schur.solve(r);
            x += schur.solve(r - M * x);
            return x;
        };

        // Predictor.
        const Vector dy_aff = solve_schur(prob.b);
        std::vector<Matrix> dZ_aff = apply_At(dy_aff);
        for (auto& B : dZ_aff) B = -B;
        std::vector<Matrix> dX_aff(nb);
        for (std::size_t k = 0; k < nb; ++k) dX_aff[k] = -res.X[k] - detail::sym(res.X[k] * dZ_aff[k] * Zinv[k]);

        const double ap_aff = std::min(1.0, detail::max_step(res.X, dX_aff));
        const double ad_aff = std::min(1.0, detail::max_step(res.Z, dZ_aff));
        double mu_aff = 0.0;
        for (std::size_t k = 0; k < nb; ++k)
            mu_aff += (res.X[k] + ap_aff * dX_aff[k]).cwiseProduct(res.Z[k] + ad_aff * dZ_aff[k]).sum();
        mu_aff /= total_dim;
        double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
        // Near the optimum the gap can run ahead of primal feasibility; keep
        // some centering until the residual catches up.
        const double feas_lag = res.primal_residual / (opt.tol_feas * (1.0 + b_norm));
        if (feas_lag > 1.0 && res.complementarity < opt.tol_gap) sigma = std::max(sigma, 0.5);

        // Corrector.
        std::vector<Matrix> second(nb);
        for (std::size_t k = 0; k < nb; ++k) second[k] = dX_aff[k] * dZ_aff[k] * Zinv[k];
        const Vector rhs = prob.b - sigma * mu * apply_A(Zinv) + apply_A(second);
        const Vector dy = solve_schur(rhs);
        std::vector<Matrix> dZ = apply_At(dy);
        for (auto& B : dZ) B = -B;
        std::vector<Matrix> dX(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            dX[k] = -res.X[k] + sigma * mu * Zinv[k] - detail::sym(res.X[k] * dZ[k] * Zinv[k]) -
                    detail::sym(second[k]);
        }

        const double ap = std::min(1.0, 0.98 * detail::max_step(res.X, dX));
        const double ad = std::min(1.0, 0.98 * detail::max_step(res.Z, dZ));
        if (ap < 1e-12 && ad < 1e-12) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "interior-point iteration stalled (gap %.3g)", res.complementarity);
            throw SolverError(msg);
        }
        for (double step = ap; step > 1e-14; step *= 0.5) {
            std::vector<Matrix> X_try(nb);
            bool pd = true;
            for (std::size_t k = 0; k < nb && pd; ++k) {
                X_try[k] = detail::sym(res.X[k] + step * dX[k]);
                pd = Eigen::LLT<Matrix>(X_try[k]).info() == Eigen::Success;
            }
            if (pd) {
                res.X = std::move(X_try);
                break;
            }
        }
        // The slack is recomputed from y, so rounding can cost definiteness
        // close to the boundary; shorten the dual step until it holds.
        for (double step = ad; step > 1e-14; step *= 0.5) {
            const Vector y_try = res.y + step * dy;
            std::vector<Matrix> Z_try = prob.slack(y_try);
            bool pd = true;
            for (const auto& Zk : Z_try) pd = pd && Eigen::LLT<Matrix>(Zk).info() == Eigen::Success;
            if (pd) {
                res.y = y_try;
                res.Z = std::move(Z_try);
                break;
            }
        }
    }
}

}  // namespace dosres
