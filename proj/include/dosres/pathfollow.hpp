#pragma once

// Projected primal-dual gradient ascent of g over the relaxed attack set,
// and channel criticality ranking from the ascent path.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dosres/certify.hpp"
#include "dosres/model.hpp"
#include "dosres/resilience.hpp"
#include "dosres/spectra.hpp"

namespace dosres {

/// How the rank-one-or-not weight in the gradient is chosen.
enum class AscentDirection {
    multiplier,   // trace-one dual multiplier of the eigenvalue LMI (default)
    eigenvector,  // x x^T, x the top eigenvector of A^T P + P A
};

struct PathSettings {
    double step = 0.05;
    double tol = 1e-6;
    int max_iter = 500;
    bool backtracking = true;
    AscentDirection direction = AscentDirection::multiplier;
    int multi_start = 0;  // extra random interior starts
    std::uint64_t seed = 0;
    unsigned threads = 0;
    SdpSettings sdp;

    void check() const {
        if (!(step > 0 && tol > 0 && max_iter > 0 && multi_start >= 0))
            throw std::invalid_argument("PathSettings: step, tol and max_iter must be positive");
        sdp.check();
    }
};

/// gamma at or above -kZeroCrossingTol counts as having reached zero.
inline constexpr double kZeroCrossingTol = 1e-9;
/// Backtracking stops halving below this step.
inline constexpr double kMinStep = 1e-8;
/// Gradients with smaller Frobenius norm are treated as zero.
inline constexpr double kZeroGradient = 1e-12;

struct PathIterate {
    Matrix alpha;
    double gamma = 0.0;
    double grad_norm = 0.0;  // ||eta||_F of the step that produced this iterate
    double step = 0.0;       // accepted step length (0 for the start point)
    Matrix P;                // Lyapunov matrix used to evaluate gamma
};

enum class PathStatus { converged, hit_zero, max_iter };

inline const char* to_string(PathStatus s) {
    switch (s) {
        case PathStatus::converged: return "converged";
        case PathStatus::hit_zero: return "hit_zero";
        case PathStatus::max_iter: return "max_iter";
    }
    return "?";
}

struct PathTrace {
    std::vector<Channel> channels;
    std::vector<PathIterate> iterates;
    std::optional<std::size_t> k_star;
    PathStatus status = PathStatus::max_iter;

    [[nodiscard]] double final_gamma() const { return iterates.back().gamma; }
};

class PathFollowError : public std::runtime_error {
public:
    PathFollowError(PathTrace partial, const std::string& what)
        : std::runtime_error("path following aborted at iterate " + std::to_string(partial.iterates.size()) + ": " +
                             what),
          partial_(std::move(partial)) {}

    [[nodiscard]] const PathTrace& partial_trace() const { return partial_; }

private:
    PathTrace partial_;
};

/**
 * eta_ij = tr(W P B K_tilde M_ij) on channel entries (m_i > 0, i != j), zero elsewhere.
 * W is any symmetric weight; the unit-vector overload uses W = x x^T.
 */
inline Matrix gradient_g(const BlockSystem& sys, const LiftedForm& lifted, const Matrix& P, const Matrix& W) {
    const int N = sys.subsystems();
    const Matrix G = W * P * assemble_B(sys) * lifted.K_tilde;  // n x nN
    Matrix eta = Matrix::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        if (sys.input_dims[i] == 0) continue;
        for (int j = 0; j < N; ++j)
            if (i != j) eta(i, j) = (G * lifted.selectors[i][j]).trace();
    }
    return eta;
}

inline Matrix gradient_g(const BlockSystem& sys, const Matrix& P, const Vector& x) {
    return gradient_g(sys, lifted_form(sys), P, x * x.transpose());
}

/// Euclidean projection onto the relaxed set: clip to [0,1], unit diagonal.
inline RelaxedStrategy project_box(const Matrix& alpha) {
    Matrix a = alpha.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0); });
    a.diagonal().setOnes();
    return RelaxedStrategy(std::move(a));
}

namespace detail {

struct DualPoint {
    Matrix P;
    Matrix W;
    double gamma = 0.0;  // tr(W (A^T P + P A)) at the point the dual was computed for
};

inline DualPoint dual_point(const Matrix& A, const PathSettings& settings) {
    LyapunovSolution sol = solve_g(A, settings.sdp);
    const Matrix S = lyapunov_operator(A, sol.P_star);
    Matrix W;
    if (settings.direction == AscentDirection::eigenvector) {
        const Vector x = max_eigpair_sym(S).vector;
        W = x * x.transpose();
    } else {
        W = sym(sol.multiplier);
        W /= W.trace();
    }
    const double gamma = W.cwiseProduct(S).sum();
    return {std::move(sol.P_star), std::move(W), gamma};
}

}  // namespace detail

/// Ascent from a given relaxed starting point.
inline PathTrace path_follow_from(const BlockSystem& sys, const RelaxedStrategy& start, const PathSettings& settings) {
    settings.check();
    validate(sys);
    const LiftedForm lifted = lifted_form(sys);
    const Matrix A0 = assemble_A(sys);
    const Matrix BKt = assemble_B(sys) * lifted.K_tilde;
    auto loop_at = [&](const Matrix& a) -> Matrix { return A0 + BKt * lifted.alpha_tilde(a); };

    PathTrace trace;
    trace.channels = channels(sys);
    Matrix alpha = start.matrix();

    detail::DualPoint dual;
    try {
        dual = detail::dual_point(loop_at(alpha), settings);
    } catch (const SolverError& e) {
        throw PathFollowError(trace, e.what());
    }
    trace.iterates.push_back({alpha, dual.gamma, 0.0, 0.0, dual.P});
    if (dual.gamma >= -kZeroCrossingTol) {
        trace.status = PathStatus::hit_zero;
        trace.k_star = 0;
        return trace;
    }

    for (int k = 1;; ++k) {
        Matrix eta = gradient_g(sys, lifted, dual.P, dual.W);
        const double norm = eta.norm();
        const double prev = trace.iterates.back().gamma;
        auto rayleigh = [&](const Matrix& a) { return dual.W.cwiseProduct(lyapunov_operator(loop_at(a), dual.P)).sum(); };

        Matrix next = alpha;
        double gamma = rayleigh(alpha);
        double s = 0.0;
        if (norm >= kZeroGradient) {
            eta /= norm;
            for (s = settings.step;; s *= 0.5) {
                next = project_box(alpha + s * eta).matrix();
                gamma = rayleigh(next);
                if (!settings.backtracking || gamma >= prev - 1e-9 || s < kMinStep) break;
            }
        }
        if (settings.backtracking && gamma < prev - 1e-9) {
            // No step keeps the objective from decreasing.
            trace.status = PathStatus::converged;
            return trace;
        }
        trace.iterates.push_back({next, gamma, norm, s, dual.P});
        alpha = std::move(next);

        if (gamma >= -kZeroCrossingTol) {
            trace.status = PathStatus::hit_zero;
            trace.k_star = trace.iterates.size() - 1;
            return trace;
        }
        if (gamma - prev <= settings.tol) {
            trace.status = PathStatus::converged;
            return trace;
        }
        if (k >= settings.max_iter) {
            trace.status = PathStatus::max_iter;
            return trace;
        }
        try {
            dual = detail::dual_point(loop_at(alpha), settings);
        } catch (const SolverError& e) {
            throw PathFollowError(trace, e.what());
        }
    }
}

/**
 * Ascent from the all-ones strategy, plus settings.multi_start random
 * interior starts run concurrently. The run with the largest terminal gamma
 * wins; ties go to the earlier run (the all-ones run is first).
 */
inline PathTrace path_follow(const BlockSystem& sys, const PathSettings& settings = {}) {
    settings.check();
    validate(sys);
    const int N = sys.subsystems();
    std::vector<RelaxedStrategy> starts{RelaxedStrategy::nominal(N)};
    std::mt19937_64 rng(settings.seed);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    const auto chans = channels(sys);
    for (int r = 0; r < settings.multi_start; ++r) {
        Matrix a = Matrix::Ones(N, N);
        for (const auto& c : chans) a(c.dst, c.src) = unit(rng);
        starts.emplace_back(std::move(a));
    }
    if (starts.size() == 1) return path_follow_from(sys, starts.front(), settings);

    std::vector<std::optional<PathTrace>> runs(starts.size());
    detail::parallel_for(starts.size(), settings.threads,
                         [&](std::size_t i) { runs[i] = path_follow_from(sys, starts[i], settings); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i]->final_gamma() > runs[best]->final_gamma()) best = i;
    return std::move(*runs[best]);
}

class NoZeroCrossingError : public std::logic_error {
public:
    NoZeroCrossingError() : std::logic_error("ascent never reached zero; channels are only ranked at a zero crossing") {}
};

struct RankedChannel {
    Channel channel;
    double value = 0.0;
};

using CriticalityRanking = std::vector<RankedChannel>;

/// Channels by ascending relaxed value at the first zero crossing; ties keep channel order.
inline CriticalityRanking rank_channels(const PathTrace& trace) {
    if (!trace.k_star) throw NoZeroCrossingError();
    const Matrix& a = trace.iterates.at(*trace.k_star).alpha;
    CriticalityRanking out;
    for (const auto& c : trace.channels) out.push_back({c, a(c.dst, c.src)});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedChannel& l, const RankedChannel& r) { return l.value < r.value; });
    return out;
}

/// Pure strategy attacking the k most critical channels.
inline AttackStrategy k_attack_from_ranking(const CriticalityRanking& ranking, int N, int k) {
    if (k < 0 || k > static_cast<int>(ranking.size()))
        throw std::out_of_range("k " + std::to_string(k) + " outside [0, " + std::to_string(ranking.size()) + "]");
    std::vector<Channel> picked;
    for (int i = 0; i < k; ++i) picked.push_back(ranking[i].channel);
    return strategy_from_channels(N, picked);
}

}  // namespace dosres
