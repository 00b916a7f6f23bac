#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dosres/certify.hpp"
#include "dosres/io.hpp"
#include "dosres/resilience.hpp"
#include "test_support.hpp"

using namespace dosres;
using namespace dosres::testing;
using Catch::Approx;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

BlockSystem scalar_system(double a) {
    BlockSystem sys = BlockSystem::zeros({1}, {0});
    sys.A_blocks[0][0](0, 0) = a;
    return sys;
}

AttackStrategy attack_23() {
    Matrix a = Matrix::Ones(3, 3);
    a(1, 2) = 0.0;
    return AttackStrategy(a);
}

double lambda_max_sym(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double lambda_min_sym(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("scalar examples", "[certify]") {
    const auto neg = solve_g(scalar_system(-1.0), RelaxedStrategy::nominal(1));
    CHECK(neg.t_star == Approx(-2.0).margin(1e-6));
    CHECK(neg.P_star(0, 0) == Approx(1.0).margin(1e-6));

    const auto pos = solve_g(scalar_system(1.0), RelaxedStrategy::nominal(1));
    CHECK(pos.t_star == Approx(0.0).margin(1e-6));
    CHECK(pos.P_star(0, 0) == Approx(0.0).margin(1e-6));
}

TEST_CASE("g agrees with the Lyapunov closed form on Hurwitz matrices", "[certify][oracle]") {
    std::mt19937_64 rng(314);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 15; ++trial) {
        BlockSystem sys = gaussian_system(rng, {1 + trial % 3, 2}, {1, 1});
        Matrix A = closed_loop(sys, RelaxedStrategy(random_relaxed(rng, 2)));
        // shift into the Hurwitz region
        A -= (std::max(0.0, abscissa_oracle(A)) + 0.05 + 0.1 * (trial % 4)) * Matrix::Identity(A.rows(), A.cols());
        if (abscissa_oracle(A) > -0.05) continue;
        const double oracle = g_closed_form(A, 1.0);
        const auto sol = solve_g(A, SdpSettings{});
        CHECK(sol.t_star == Approx(oracle).epsilon(1e-5).margin(1e-7));
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("solution satisfies the stated invariants", "[certify][property]") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 15; ++trial) {
        BlockSystem sys = gaussian_system(rng, {2, 1, 2}, {1, 1, 1});
        const Matrix alpha = random_pure(rng, 3);
        for (double lp : {1.0, 3.0}) {
            SdpSettings s;
            s.lambda_P = lp;
            const auto sol = solve_g(sys, RelaxedStrategy(alpha), s);
            const Matrix A = closed_loop(sys, RelaxedStrategy(alpha));
            CHECK(sol.feas_residual <= s.tol_feas);
            CHECK(sol.gap_estimate <= s.tol_gap);
            CHECK(lambda_min_sym(sol.P_star) >= -sol.feas_residual - 1e-10);
            CHECK(lambda_max_sym(sol.P_star) <= lp + sol.feas_residual + 1e-10);
            CHECK(lambda_max_sym(A.transpose() * sol.P_star + sol.P_star * A) <= sol.t_star + sol.feas_residual + 1e-10);
            // upper bound: any feasible point bounds the optimum
            const Matrix Ph = lp / 2 * Matrix::Identity(5, 5);
            CHECK(sol.t_star <= lambda_max_sym(A.transpose() * Ph + Ph * A) + 1e-7);
            CHECK(sol.t_star <= 1e-6 * lp + 1e-7);
        }
    }
}

TEST_CASE("g is positively homogeneous in the cap", "[certify][property]") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 8; ++trial) {
        BlockSystem sys = random_system(rng(), 3);
        const RelaxedStrategy a(random_pure(rng, 3));
        const auto base = solve_g(sys, a);
        for (double c : {0.5, 2.0, 10.0}) {
            SdpSettings s;
            s.lambda_P = c;
            const auto sol = solve_g(sys, a, s);
            // each value is within its reported gap (in cap units) of the optimum
            const double margin = 2 * c * (base.gap_estimate + sol.gap_estimate) + 1e-9;
            CHECK(sol.t_star == Approx(c * base.t_star).epsilon(0).margin(margin));
        }
    }
}

TEST_CASE("motivating system signs and an independent magnitude", "[certify][golden]") {
    const BlockSystem sys = motivating_system();
    const auto nominal = solve_g(sys, RelaxedStrategy::nominal(3));
    CHECK(nominal.t_star < 0);
    CHECK(nominal.t_star == Approx(g_closed_form(displayed_Ac(), 1.0)).epsilon(1e-5));

    const auto attacked = solve_g(sys, attack_23());
    CHECK(attacked.t_star >= 0);
    CHECK(attacked.t_star <= 1e-6);
}

TEST_CASE("solver failure is reported", "[certify]") {
    SdpSettings s;
    s.max_sdp_iters = 2;
    CHECK_THROWS_AS(solve_g(displayed_Ac(), s), SolverError);
    s.lambda_P = -1.0;
    CHECK_THROWS_AS(solve_g(displayed_Ac(), s), std::invalid_argument);
}

TEST_CASE("common Lyapunov examples", "[certify][common]") {
    SECTION("nominal motivating pair") {
        const BlockSystem sys = motivating_system();
        const auto ones = AttackStrategy::nominal(3);
        const auto r = common_lyapunov(sys, ones, ones);
        REQUIRE(r.feasible());
        const Matrix& P = *r.P;
        CHECK(P.trace() == Approx(1.0).margin(1e-9));
        CHECK(lambda_min_sym(P) >= -1e-9);
        CHECK(lambda_max_sym(displayed_Ac().transpose() * P + P * displayed_Ac()) <= 10 * 1e-8);
    }
    SECTION("A = -I with zero gain") {
        BlockSystem sys = stable_diagonal({1, 1}, {1, 1});
        const auto r = common_lyapunov(sys, AttackStrategy::nominal(2), AttackStrategy(Matrix::Identity(2, 2)));
        REQUIRE(r.feasible());
        CHECK(r.P->trace() == Approx(1.0).margin(1e-9));
        CHECK(lambda_max_sym(-2 * *r.P) <= 1e-7);
    }
    SECTION("x' = x and x' = -x cannot share a normalized certificate") {
        const auto r = common_lyapunov(std::vector<Matrix>{scalar(1.0), scalar(-1.0)});
        CHECK_FALSE(r.feasible());
        CHECK(r.margin > kInfeasibilityTol);
    }
    SECTION("cap below one is rejected") {
        SdpSettings s;
        s.lambda_P = 0.5;
        CHECK_THROWS_AS(common_lyapunov(std::vector<Matrix>{scalar(-1.0)}, s), std::invalid_argument);
    }
}

TEST_CASE("common Lyapunov witnesses verify on random pairs", "[certify][common]") {
    std::mt19937_64 rng(55);
    int feasible = 0;
    for (int trial = 0; trial < 20; ++trial) {
        BlockSystem sys = random_system(rng(), 2 + trial % 2);
        const int N = sys.subsystems();
        const AttackStrategy a1(random_pure(rng, N)), a2(random_pure(rng, N));
        const auto r = common_lyapunov(sys, a1, a2);
        if (!r.feasible()) continue;
        ++feasible;
        for (const auto* a : {&a1, &a2}) {
            const Matrix A = closed_loop(sys, *a);
            CHECK(lambda_max_sym(A.transpose() * *r.P + *r.P * A) <= 10 * 1e-8);
        }
        CHECK(lambda_min_sym(*r.P) >= -1e-8);
    }
    CHECK(feasible > 0);
}

TEST_CASE("assumption 1 check", "[certify][assumption]") {
    SECTION("single strategy pairs with itself") {
        CHECK(assumption1_check(motivating_system(), {AttackStrategy::nominal(3)}).holds());
        // A_a is unstable but has a real stable eigenvalue, so P = w w^T from
        // its left eigenvector is a normalized non-strict certificate
        CHECK(assumption1_check(motivating_system(), {attack_23()}).holds());
        const auto r = assumption1_check(scalar_system(1.0), {AttackStrategy::nominal(1)});
        REQUIRE_FALSE(r.holds());
        CHECK(*r.failing_pair == std::make_pair(std::size_t{0}, std::size_t{0}));
    }
    SECTION("stable diagonal, all single-channel strategies") {
        BlockSystem sys = stable_diagonal({2, 1, 1}, {1, 1, 1});
        CHECK(assumption1_check(sys, enumerate_attacks(sys, 1)).holds());
    }
    SECTION("motivating system, all single-channel strategies") {
        // pairwise oracle: 15 feasibility solves, each re-verified
        const BlockSystem sys = motivating_system();
        const auto singles = enumerate_attacks(sys, 1);
        REQUIRE(singles.size() == 6);
        std::optional<std::pair<std::size_t, std::size_t>> first_bad;
        for (std::size_t i = 0; i < singles.size() && !first_bad; ++i)
            for (std::size_t j = i + 1; j < singles.size() && !first_bad; ++j)
                if (!common_lyapunov(sys, singles[i], singles[j]).feasible()) first_bad = {i, j};
        const auto r = assumption1_check(sys, singles);
        CHECK(r.failing_pair == first_bad);
        CHECK(r.holds() == !first_bad.has_value());
    }
    SECTION("empty list") {
        CHECK_THROWS_AS(assumption1_check(motivating_system(), {}), std::invalid_argument);
    }
}

TEST_CASE("segment property between certified strategies", "[certify][property]") {
    std::mt19937_64 rng(909);
    int segments = 0;
    for (int trial = 0; trial < 60 && segments < 5; ++trial) {
        BlockSystem sys = random_system(rng(), 3);
        const AttackStrategy a1(random_pure(rng, 3)), a2(random_pure(rng, 3));
        if (a1 == a2) continue;
        if (!assumption1_check(sys, {a1, a2}).holds()) continue;
        if (!(solve_g(sys, a1).t_star < 0 && solve_g(sys, a2).t_star < 0)) continue;
        ++segments;
        for (int k = 1; k <= 9; ++k) {
            const double th = 0.1 * k;
            const RelaxedStrategy mix(th * a1.matrix() + (1 - th) * a2.matrix());
            CHECK(solve_g(sys, mix).t_star < 0);
        }
    }
    CHECK(segments == 5);
}
