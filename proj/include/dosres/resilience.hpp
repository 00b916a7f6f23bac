#pragma once

// Pure-strategy analysis: channel enumeration, exhaustive worst-attack
// search, resilience verdicts and the resilience index.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dosres/certify.hpp"
#include "dosres/model.hpp"
#include "dosres/spectra.hpp"

namespace dosres {

/// Spectral abscissa at or above this counts as not asymptotically stable.
inline constexpr double kDestabilizingThreshold = -1e-9;

/// Communication channel src -> dst (0-based subsystem indices).
struct Channel {
    int dst = 0;
    int src = 0;

    friend bool operator==(const Channel&, const Channel&) = default;

    /// "i<-j" with 1-based indices.
    [[nodiscard]] std::string label() const { return std::to_string(dst + 1) + "<-" + std::to_string(src + 1); }
};

/// Channels (i,j), i != j, into controlled subsystems (m_i > 0), dst-major.
/// With skip_zero_gain, channels whose K_ij is identically zero are left out.
inline std::vector<Channel> channels(const BlockSystem& sys, bool skip_zero_gain = false) {
    validate(sys);
    std::vector<Channel> out;
    const int N = sys.subsystems();
    for (int i = 0; i < N; ++i) {
        if (sys.input_dims[i] == 0) continue;
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            if (skip_zero_gain && sys.K_blocks[i][j].isZero(0.0)) continue;
            out.push_back({i, j});
        }
    }
    return out;
}

inline AttackStrategy strategy_from_channels(int N, const std::vector<Channel>& attacked) {
    Matrix a = Matrix::Ones(N, N);
    for (const auto& c : attacked) {
        if (c.dst == c.src || c.dst < 0 || c.src < 0 || c.dst >= N || c.src >= N)
            throw StrategyError("invalid channel " + c.label());
        a(c.dst, c.src) = 0.0;
    }
    return AttackStrategy(std::move(a));
}

/// Attacked channels of a pure strategy, in channel order.
inline std::vector<Channel> attacked_channels(const AttackStrategy& s) {
    std::vector<Channel> out;
    for (int i = 0; i < s.size(); ++i)
        for (int j = 0; j < s.size(); ++j)
            if (i != j && s(i, j) == 0.0) out.push_back({i, j});
    return out;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/**
 * Lexicographic k-subsets of a channel list, yielded as pure strategies.
 *
 *     AttackEnumerator e(sys, 2);
 *     while (auto s = e.next()) { ... }
 */
class AttackEnumerator {
public:
    AttackEnumerator(const BlockSystem& sys, int k, bool skip_zero_gain = false)
        : N_(sys.subsystems()), channels_(channels(sys, skip_zero_gain)), k_(k) {
        if (k < 0 || k > static_cast<int>(channels_.size()))
            throw std::out_of_range("attack size " + std::to_string(k) + " outside [0, " +
                                    std::to_string(channels_.size()) + "]");
        for (int i = 0; i < k; ++i) idx_.push_back(static_cast<std::size_t>(i));
    }

    [[nodiscard]] std::uint64_t count() const { return binomial(channels_.size(), static_cast<std::uint64_t>(k_)); }
    [[nodiscard]] const std::vector<Channel>& channel_list() const { return channels_; }

    /// Channel subset of the next strategy, or nullopt when exhausted.
    std::optional<std::vector<Channel>> next_channels() {
        if (done_) return std::nullopt;
        std::vector<Channel> picked;
        picked.reserve(idx_.size());
        for (std::size_t i : idx_) picked.push_back(channels_[i]);
        advance();
        return picked;
    }

    std::optional<AttackStrategy> next() {
        auto picked = next_channels();
        if (!picked) return std::nullopt;
        return strategy_from_channels(N_, *picked);
    }

private:
    void advance() {
        const std::size_t n = channels_.size();
        const auto k = static_cast<std::size_t>(k_);
        std::size_t i = k;
        while (i > 0 && idx_[i - 1] == n - k + i - 1) --i;
        if (i == 0) {
            done_ = true;
            return;
        }
        ++idx_[i - 1];
        for (std::size_t j = i; j < k; ++j) idx_[j] = idx_[j - 1] + 1;
    }

    int N_;
    std::vector<Channel> channels_;
    int k_;
    std::vector<std::size_t> idx_;
    bool done_ = false;
};

inline std::vector<std::vector<Channel>> enumerate_attack_sets(const BlockSystem& sys, int k, bool skip_zero_gain = false) {
    AttackEnumerator e(sys, k, skip_zero_gain);
    std::vector<std::vector<Channel>> out;
    out.reserve(e.count());
    while (auto c = e.next_channels()) out.push_back(std::move(*c));
    return out;
}

inline std::vector<AttackStrategy> enumerate_attacks(const BlockSystem& sys, int k, bool skip_zero_gain = false) {
    std::vector<AttackStrategy> out;
    for (const auto& set : enumerate_attack_sets(sys, k, skip_zero_gain))
        out.push_back(strategy_from_channels(sys.subsystems(), set));
    return out;
}

struct AttackReport {
    AttackStrategy strategy;
    std::vector<Channel> attacked;
    double spec_abscissa = 0.0;
    std::optional<double> g_value;
    bool destabilizing = false;
};

/// Eigensolver or SDP failure while evaluating a specific strategy.
class StrategyEvaluationError : public std::runtime_error {
public:
    StrategyEvaluationError(std::vector<Channel> attacked, const std::string& what)
        : std::runtime_error(describe(attacked) + ": " + what), attacked_(std::move(attacked)) {}

    [[nodiscard]] const std::vector<Channel>& attacked() const { return attacked_; }

private:
    static std::string describe(const std::vector<Channel>& a) {
        std::string s = "strategy {";
        for (std::size_t i = 0; i < a.size(); ++i) s += (i ? "," : "") + a[i].label();
        return s + "}";
    }
    std::vector<Channel> attacked_;
};

struct SweepOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    bool with_g = false;
    bool skip_zero_gain = false;
    SdpSettings sdp;
};

namespace detail {

// Runs fn(i) for i in [0, count) on a fixed worker pool; slot i is owned by
// one worker, so results do not depend on scheduling. The first exception in
// index order is rethrown.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&](unsigned w) {
        for (std::size_t i = w; i < count; i += threads) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline AttackReport evaluate_attack(const BlockSystem& sys, const std::vector<Channel>& attacked, bool with_g = false,
                                    const SdpSettings& sdp = {}) {
    AttackStrategy s = strategy_from_channels(sys.subsystems(), attacked);
    try {
        const Matrix A = closed_loop(sys, s);
        AttackReport r{s, attacked, spectral_abscissa(A), std::nullopt, false};
        r.destabilizing = r.spec_abscissa >= kDestabilizingThreshold;
        if (with_g) r.g_value = solve_g(A, sdp).t_star;
        return r;
    } catch (const EigenError& e) {
        throw StrategyEvaluationError(attacked, e.what());
    } catch (const SolverError& e) {
        throw StrategyEvaluationError(attacked, e.what());
    }
}

/// Reports for every k-channel strategy, in enumeration order.
inline std::vector<AttackReport> sweep_attacks(const BlockSystem& sys, int k, const SweepOptions& opt = {}) {
    const auto sets = enumerate_attack_sets(sys, k, opt.skip_zero_gain);
    std::vector<std::optional<AttackReport>> slots(sets.size());
    detail::parallel_for(sets.size(), opt.threads,
                         [&](std::size_t i) { slots[i] = evaluate_attack(sys, sets[i], opt.with_g, opt.sdp); });
    std::vector<AttackReport> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// k-channel strategy with the largest spectral abscissa; ties go to the earliest in enumeration order.
inline AttackReport worst_attack(const BlockSystem& sys, int k, const SweepOptions& opt = {}) {
    auto reports = sweep_attacks(sys, k, opt);
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].spec_abscissa > reports[best].spec_abscissa) best = i;
    return std::move(reports[best]);
}

struct Verdict {
    std::optional<AttackReport> witness;
    int k_checked = 0;
    std::uint64_t strategies_checked = 0;

    [[nodiscard]] bool resilient() const { return !witness.has_value(); }
};

/// Largest channel count for which full enumeration is allowed.
inline constexpr std::size_t kFullEnumerationLimit = 20;

/**
 * Checks every strategy attacking at most k_max channels, smallest k first,
 * and returns the first destabilizing one. With full = true, k_max is raised
 * to the channel count (only for systems with at most 20 channels).
 */
inline Verdict exhaustive_verdict(const BlockSystem& sys, int k_max, bool full = false, const SweepOptions& opt = {}) {
    const auto n_channels = static_cast<int>(channels(sys, opt.skip_zero_gain).size());
    if (full) {
        if (static_cast<std::size_t>(n_channels) > kFullEnumerationLimit)
            throw std::invalid_argument("full enumeration limited to " + std::to_string(kFullEnumerationLimit) +
                                        " channels, system has " + std::to_string(n_channels));
        k_max = n_channels;
    }
    if (k_max < 0 || k_max > n_channels)
        throw std::out_of_range("k_max " + std::to_string(k_max) + " outside [0, " + std::to_string(n_channels) + "]");
    Verdict v;
    for (int k = 0; k <= k_max; ++k) {
        auto reports = sweep_attacks(sys, k, opt);
        v.k_checked = k;
        v.strategies_checked += reports.size();
        for (auto& r : reports) {
            if (r.destabilizing) {
                v.witness = std::move(r);
                return v;
            }
        }
    }
    return v;
}

class NominalUnstableError : public std::domain_error {
public:
    explicit NominalUnstableError(double g_nominal)
        : std::domain_error("nominal closed loop not certified stable (g = " + std::to_string(g_nominal) +
                            "); resilience index undefined"),
          g_nominal_(g_nominal) {}

    [[nodiscard]] double g_nominal() const { return g_nominal_; }

private:
    double g_nominal_;
};

struct ResilienceIndex {
    double value = 0.0;
    double g_attack = 0.0;
    double g_nominal = 0.0;
    bool anomaly = false;  // g(alpha) < g(1): the attack improved the certificate
};

/// Index from precomputed g values; g_nominal must be negative.
inline ResilienceIndex resilience_index_from(double g_attack, double g_nominal) {
    if (!(g_nominal < 0)) throw NominalUnstableError(g_nominal);
    ResilienceIndex r{0.0, g_attack, g_nominal, g_attack < g_nominal};
    if (g_attack < 0) r.value = std::clamp(g_attack / g_nominal, 0.0, 1.0);
    return r;
}

/// g(alpha) / g(1), clamped to [0,1]; 0 for destabilizing strategies.
inline ResilienceIndex resilience_index(const BlockSystem& sys, const AttackStrategy& alpha,
                                        const SdpSettings& settings = {}) {
    const double g_nom = solve_g(sys, RelaxedStrategy::nominal(sys.subsystems()), settings).t_star;
    if (!(g_nom < 0)) throw NominalUnstableError(g_nom);
    if (alpha == AttackStrategy::nominal(sys.subsystems())) return resilience_index_from(g_nom, g_nom);
    return resilience_index_from(solve_g(sys, alpha, settings).t_star, g_nom);
}

}  // namespace dosres
