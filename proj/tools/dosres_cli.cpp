// dosres: command-line front end for DoS resilience analysis of
// distributed control systems.
//
// Exit codes: 0 analysis completed with nothing destabilizing found,
// 2 destabilizing witness found, 1 error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dosres/certify.hpp"
#include "dosres/io.hpp"
#include "dosres/pathfollow.hpp"
#include "dosres/resilience.hpp"
#include "dosres/spectra.hpp"

using namespace dosres;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitWitness = 2;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string channel_list(const std::vector<Channel>& cs, const char* sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < cs.size(); ++i) s += (i ? sep : "") + cs[i].label();
    return s;
}

std::vector<Channel> parse_attack(const std::string& text, int N) {
    std::vector<Channel> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        const auto arrow = item.find("<-");
        int i = 0, j = 0;
        try {
            if (arrow == std::string::npos) throw std::invalid_argument("missing <-");
            std::size_t u1 = 0, u2 = 0;
            const std::string l = item.substr(0, arrow), r = item.substr(arrow + 2);
            i = std::stoi(l, &u1);
            j = std::stoi(r, &u2);
            if (u1 != l.size() || u2 != r.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw std::invalid_argument("bad channel \"" + item + "\"; expected i<-j");
        }
        if (i < 1 || j < 1 || i > N || j > N || i == j)
            throw std::invalid_argument("channel " + item + " out of range for " + std::to_string(N) + " subsystems");
        out.push_back({i - 1, j - 1});
    }
    if (out.empty()) throw std::invalid_argument("empty attack list");
    return out;
}

struct CsvWriter {
    std::ofstream out;
    explicit CsvWriter(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw std::runtime_error("cannot write " + path);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
            out << (i ? "," : "") << (quote ? "\"" + cells[i] + "\"" : cells[i]);
        }
        out << '\n';
    }
};

void attacks_header(CsvWriter& w) { w.row({"k", "channels", "spec_abscissa", "g_value", "destabilizing", "index"}); }

void attacks_row(CsvWriter& w, const AttackReport& r, std::optional<double> g_nominal) {
    std::string g = r.g_value ? num(*r.g_value) : "";
    std::string idx;
    if (r.g_value && g_nominal && *g_nominal < 0) idx = num(resilience_index_from(*r.g_value, *g_nominal).value);
    w.row({std::to_string(r.attacked.size()), channel_list(r.attacked, ";"), num(r.spec_abscissa), g,
           r.destabilizing ? "1" : "0", idx});
}

struct Globals {
    double lambda_p = 1.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

SweepOptions sweep_options(const Globals& g, bool with_g) {
    SweepOptions o;
    o.threads = g.threads;
    o.with_g = with_g;
    o.sdp.lambda_P = g.lambda_p;
    return o;
}

std::optional<double> nominal_g(const BlockSystem& sys, const SdpSettings& sdp) {
    return solve_g(sys, RelaxedStrategy::nominal(sys.subsystems()), sdp).t_star;
}

void print_report(const AttackReport& r) {
    std::cout << "  channels: {" << channel_list(r.attacked) << "}\n"
              << "  spectral abscissa: " << short_num(r.spec_abscissa) << "\n";
    if (r.g_value) std::cout << "  g: " << short_num(*r.g_value) << "\n";
}

// check -----------------------------------------------------------------

struct CheckArgs {
    std::string file;
    int max_k = 1;
    bool full = false;
    bool with_g = false;
    std::string csv;
};

int run_check(const CheckArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    const auto opt = sweep_options(g, a.with_g);
    const Verdict v = exhaustive_verdict(ns.system, a.max_k, a.full, opt);
    if (!a.csv.empty()) {
        CsvWriter w(a.csv);
        attacks_header(w);
        const auto gn = a.with_g ? nominal_g(ns.system, opt.sdp) : std::nullopt;
        for (int k = 0; k <= v.k_checked; ++k)
            for (const auto& r : sweep_attacks(ns.system, k, opt)) attacks_row(w, r, gn);
    }
    std::cout << "system: " << (ns.name.empty() ? a.file : ns.name) << "\n"
              << "strategies checked: " << v.strategies_checked << " (up to " << v.k_checked << " channels)\n";
    if (v.resilient()) {
        std::cout << "verdict: resilient over all strategies with at most " << v.k_checked << " attacked channels\n";
        return kExitOk;
    }
    std::cout << "verdict: destabilizing witness found\n";
    print_report(*v.witness);
    return kExitWitness;
}

// worst -----------------------------------------------------------------

struct WorstArgs {
    std::string file;
    int k = 1;
    bool with_g = false;
    std::string csv;
};

int run_worst(const WorstArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    const auto opt = sweep_options(g, a.with_g);
    const auto reports = sweep_attacks(ns.system, a.k, opt);
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].spec_abscissa > reports[best].spec_abscissa) best = i;
    if (!a.csv.empty()) {
        CsvWriter w(a.csv);
        attacks_header(w);
        const auto gn = a.with_g ? nominal_g(ns.system, opt.sdp) : std::nullopt;
        for (const auto& r : reports) attacks_row(w, r, gn);
    }
    std::cout << "worst " << a.k << "-channel attack (" << reports.size() << " strategies):\n";
    print_report(reports[best]);
    std::cout << "  destabilizing: " << (reports[best].destabilizing ? "yes" : "no") << "\n";
    return reports[best].destabilizing ? kExitWitness : kExitOk;
}

// index -----------------------------------------------------------------

struct IndexArgs {
    std::string file;
    std::string attack;
    int all_k = -1;
    std::string csv;
};

int run_index(const IndexArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    const BlockSystem& sys = ns.system;
    const auto opt = sweep_options(g, true);
    const double g_nom = *nominal_g(sys, opt.sdp);
    if (!(g_nom < 0)) throw NominalUnstableError(g_nom);

    std::vector<AttackReport> reports;
    if (!a.attack.empty()) {
        reports.push_back(evaluate_attack(sys, parse_attack(a.attack, sys.subsystems()), true, opt.sdp));
    } else {
        reports = sweep_attacks(sys, a.all_k, opt);
    }
    std::optional<CsvWriter> w;
    if (!a.csv.empty()) {
        w.emplace(a.csv);
        attacks_header(*w);
    }
    std::cout << "g(nominal): " << short_num(g_nom) << "\n";
    bool any = false;
    for (const auto& r : reports) {
        const ResilienceIndex idx = resilience_index_from(*r.g_value, g_nom);
        std::cout << "{" << channel_list(r.attacked) << "}  index " << short_num(idx.value) << "  g "
                  << short_num(*r.g_value) << "  abscissa " << short_num(r.spec_abscissa)
                  << (idx.anomaly ? "  (anomaly: attack lowers g below nominal)" : "") << "\n";
        if (w) attacks_row(*w, r, g_nom);
        any |= r.destabilizing;
    }
    return any ? kExitWitness : kExitOk;
}

// path / rank -------------------------------------------------------------

struct PathArgs {
    std::string file;
    double step = 0.05;
    double tol = 1e-6;
    int max_iter = 500;
    int multi_start = 0;
    bool no_backtracking = false;
    std::string direction = "multiplier";
    std::string out;
    bool validate = false;
    std::string csv;
};

PathSettings path_settings(const PathArgs& a, const Globals& g) {
    PathSettings s;
    s.step = a.step;
    s.tol = a.tol;
    s.max_iter = a.max_iter;
    s.multi_start = a.multi_start;
    s.backtracking = !a.no_backtracking;
    s.direction = a.direction == "eigenvector" ? AscentDirection::eigenvector : AscentDirection::multiplier;
    s.seed = g.seed;
    s.threads = g.threads;
    s.sdp.lambda_P = g.lambda_p;
    return s;
}

void write_trace(const PathTrace& t, const std::string& path) {
    CsvWriter w(path);
    std::vector<std::string> head{"iter", "gamma", "grad_norm"};
    for (const auto& c : t.channels) head.push_back("a_" + std::to_string(c.dst + 1) + "_" + std::to_string(c.src + 1));
    w.row(head);
    for (std::size_t k = 0; k < t.iterates.size(); ++k) {
        const auto& it = t.iterates[k];
        std::vector<std::string> row{std::to_string(k), num(it.gamma), num(it.grad_norm)};
        for (const auto& c : t.channels) row.push_back(num(it.alpha(c.dst, c.src)));
        w.row(row);
    }
}

PathTrace traced_path(const BlockSystem& sys, const PathArgs& a, const Globals& g) {
    try {
        return path_follow(sys, path_settings(a, g));
    } catch (const PathFollowError& e) {
        if (!a.out.empty()) write_trace(e.partial_trace(), a.out);
        throw;
    }
}

void print_path_summary(const PathTrace& t) {
    std::cout << "iterations: " << t.iterates.size() - 1 << "\n"
              << "status: " << to_string(t.status) << "\n"
              << "gamma: " << short_num(t.iterates.front().gamma) << " -> " << short_num(t.final_gamma()) << "\n";
}

int run_path(const PathArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    const PathTrace t = traced_path(ns.system, a, g);
    if (!a.out.empty()) write_trace(t, a.out);
    print_path_summary(t);
    if (t.status == PathStatus::hit_zero) {
        std::cout << "gamma reached 0 at iterate " << *t.k_star << ": destabilizing direction found\n";
        return kExitWitness;
    }
    std::cout << "no destabilizing direction found (terminal gamma is a lower bound on the relaxed optimum)\n";
    return kExitOk;
}

int run_rank(const PathArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    const BlockSystem& sys = ns.system;
    const PathTrace t = traced_path(sys, a, g);
    if (!a.out.empty()) write_trace(t, a.out);
    print_path_summary(t);
    const CriticalityRanking ranking = rank_channels(t);
    std::cout << "criticality ranking (most critical first):\n";
    for (std::size_t r = 0; r < ranking.size(); ++r)
        std::cout << "  " << r + 1 << ". " << ranking[r].channel.label() << "  alpha " << short_num(ranking[r].value)
                  << "\n";
    if (!a.validate) return kExitWitness;

    std::optional<CsvWriter> w;
    if (!a.csv.empty()) {
        w.emplace(a.csv);
        attacks_header(*w);
    }
    std::cout << "k-attack validation:\n";
    bool nondecreasing = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= static_cast<int>(ranking.size()); ++k) {
        std::vector<Channel> picked;
        for (int i = 0; i < k; ++i) picked.push_back(ranking[i].channel);
        const AttackReport r = evaluate_attack(sys, picked);
        // repeated eigenvalues are only accurate to about sqrt(eps)
        const bool up = r.spec_abscissa >= prev - 1e-7;
        nondecreasing &= up;
        std::cout << "  k=" << k << "  {" << channel_list(picked) << "}  abscissa " << short_num(r.spec_abscissa)
                  << (up ? "" : "  (decrease)") << "\n";
        if (w) attacks_row(*w, r, std::nullopt);
        prev = r.spec_abscissa;
    }
    std::cout << "abscissa " << (nondecreasing ? "nondecreasing" : "not monotone") << " in k\n";
    return kExitWitness;
}

// assumption ----------------------------------------------------------------

struct AssumptionArgs {
    std::string file;
    int k = 1;
};

int run_assumption(const AssumptionArgs& a, const Globals& g) {
    const NamedSystem ns = load_system(a.file);
    std::vector<AttackStrategy> strategies;
    for (int k = 0; k <= a.k; ++k)
        for (auto& s : enumerate_attacks(ns.system, k)) strategies.push_back(std::move(s));
    SdpSettings sdp;
    sdp.lambda_P = std::max(1.0, g.lambda_p);
    const Assumption1Result r = assumption1_check(ns.system, strategies, sdp);
    std::cout << "strategies: " << strategies.size() << " (up to " << a.k << " channels)\n";
    if (r.holds()) {
        std::cout << "every pair shares a common Lyapunov matrix\n";
        return kExitOk;
    }
    const auto [i, j] = *r.failing_pair;
    std::cout << "no common Lyapunov matrix for {" << channel_list(attacked_channels(strategies[i])) << "} and {"
              << channel_list(attacked_channels(strategies[j])) << "}\n";
    return kExitWitness;
}

// demo ------------------------------------------------------------------

int run_demo(const std::string& name, const Globals& g) {
    if (name != "motivating") throw std::invalid_argument("only the motivating demo is available");
    const BlockSystem sys = motivating_system();
    SdpSettings sdp;
    sdp.lambda_P = g.lambda_p;
    auto show = [&](const char* label, const Matrix& A) {
        std::cout << label << ": abscissa " << short_num(spectral_abscissa(A)) << ", eigenvalues";
        const auto ev = eigenvalues(A);
        std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
        std::sort(v.begin(), v.end(), [](auto x, auto y) { return x.real() > y.real() || (x.real() == y.real() && x.imag() > y.imag()); });
        for (const auto& z : v) {
            std::cout << " " << short_num(z.real());
            if (std::abs(z.imag()) > 1e-12) std::cout << (z.imag() > 0 ? "+" : "-") << short_num(std::abs(z.imag())) << "i";
        }
        std::cout << "\n";
    };
    Matrix a23 = Matrix::Ones(3, 3);
    a23(1, 2) = 0.0;
    show("nominal", closed_loop(sys, RelaxedStrategy::nominal(3)));
    show("decentralized", closed_loop(sys, RelaxedStrategy(Matrix::Identity(3, 3))));
    show("attack 2<-3", closed_loop(sys, RelaxedStrategy(a23)));
    std::cout << "g(nominal): " << short_num(solve_g(sys, RelaxedStrategy::nominal(3), sdp).t_star) << "\n"
              << "g(attack 2<-3): " << short_num(solve_g(sys, RelaxedStrategy(a23), sdp).t_star) << "\n";
    const Verdict v = exhaustive_verdict(sys, 1, false, sweep_options(g, false));
    std::cout << "single-channel verdict: "
              << (v.resilient() ? "resilient" : "witness {" + channel_list(v.witness->attacked) + "}") << "\n";
    PathSettings ps;
    ps.sdp = sdp;
    const PathTrace t = path_follow(sys, ps);
    print_path_summary(t);
    if (t.k_star) {
        std::cout << "ranking:";
        for (const auto& rc : rank_channels(t)) std::cout << " " << rc.channel.label();
        std::cout << "\n";
    }
    return v.resilient() ? kExitOk : kExitWitness;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DoS resilience analysis for distributed control systems"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--lambda-p", g.lambda_p, "Cap on the Lyapunov matrix, 0 <= P <= lambda_P I")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for randomized starts")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for sweeps (0 = all cores)")->capture_default_str();

    const char* file_help = "System document, or a builtin: motivating, random:<seed>:<N>";

    CheckArgs ca;
    auto* check = app.add_subcommand("check", "Exhaustive verdict over strategies attacking at most K channels");
    check->add_option("file", ca.file, file_help)->required();
    check->add_option("--max-k", ca.max_k, "Largest attack size checked")->capture_default_str();
    check->add_flag("--full", ca.full, "Check every attack size (at most 20 channels)");
    check->add_flag("--with-g", ca.with_g, "Also solve the Lyapunov SDP for each strategy");
    check->add_option("--csv", ca.csv, "Write checked strategies to this CSV file");

    WorstArgs wa;
    auto* worst = app.add_subcommand("worst", "Worst k-channel attack by spectral abscissa");
    worst->add_option("file", wa.file, file_help)->required();
    worst->add_option("--k", wa.k, "Attack size")->required();
    worst->add_flag("--with-g", wa.with_g, "Also solve the Lyapunov SDP for each strategy");
    worst->add_option("--csv", wa.csv, "Write every k-channel strategy to this CSV file");

    IndexArgs ia;
    auto* index = app.add_subcommand("index", "Resilience index g(alpha)/g(1)");
    index->add_option("file", ia.file, file_help)->required();
    auto* att = index->add_option("--attack", ia.attack, "Attacked channels, e.g. \"2<-3,3<-1\"");
    auto* allk = index->add_option("--all-k", ia.all_k, "Every strategy with exactly K attacked channels");
    att->excludes(allk);
    index->add_option("--csv", ia.csv, "Write results to this CSV file");

    PathArgs pa;
    auto add_path_opts = [&](CLI::App* sub) {
        sub->add_option("file", pa.file, file_help)->required();
        sub->add_option("--step", pa.step, "Ascent step size")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--tol", pa.tol, "Stop when the improvement falls below this")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--max-iter", pa.max_iter, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--multi-start", pa.multi_start, "Extra random interior starts")->capture_default_str();
        sub->add_option("--direction", pa.direction, "Ascent weight: multiplier or eigenvector")
            ->check(CLI::IsMember({"multiplier", "eigenvector"}))
            ->capture_default_str();
        sub->add_flag("--no-backtracking", pa.no_backtracking, "Take full steps even if gamma decreases");
        sub->add_option("--out", pa.out, "Write the iterate trace to this CSV file");
    };
    auto* path = app.add_subcommand("path", "Projected gradient ascent on g over relaxed strategies");
    add_path_opts(path);
    auto* rank = app.add_subcommand("rank", "Rank channels by their relaxed value at the first zero crossing");
    add_path_opts(rank);
    rank->add_flag("--validate", pa.validate, "Replay k-attacks built from the ranking");
    rank->add_option("--csv", pa.csv, "Write validation attacks to this CSV file");

    AssumptionArgs aa;
    auto* assumption = app.add_subcommand("assumption", "Pairwise common-Lyapunov check over small attacks");
    assumption->add_option("file", aa.file, file_help)->required();
    assumption->add_option("--k", aa.k, "Largest attack size included")->required();

    std::string demo_name;
    auto* demo = app.add_subcommand("demo", "Walk through a bundled example");
    demo->add_option("name", demo_name, "Example name (motivating)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*check) return run_check(ca, g);
        if (*worst) return run_worst(wa, g);
        if (*index) {
            if (ia.attack.empty() && ia.all_k < 0) throw std::invalid_argument("index needs --attack or --all-k");
            return run_index(ia, g);
        }
        if (*path) return run_path(pa, g);
        if (*rank) return run_rank(pa, g);
        if (*assumption) return run_assumption(aa, g);
        if (*demo) return run_demo(demo_name, g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
