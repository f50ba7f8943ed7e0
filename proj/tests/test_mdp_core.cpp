#include "oracles.hpp"
#include "rermdp/random_instances.hpp"
#include "rermdp/soft_dp.hpp"

#include <doctest.h>

#include <cmath>

using namespace rermdp;

namespace {

TabularMDP one_state(numvec rewards, double gamma) {
    const std::size_t na = rewards.size();
    Kernel k(na, SparseDist{{0}, {1.0}});
    return TabularMDP(1, na, k, std::move(rewards), gamma);
}

SolverConfig config(double eta, double eps) {
    SolverConfig c;
    c.eta = eta;
    c.epsilon = eps;
    return c;
}

} // namespace

TEST_CASE("validate_mdp accepts a well-formed MDP") {
    const TabularMDP mdp({{{0.5, 0.5}, {1.0, 0.0}}, {{0.0, 1.0}, {0.3, 0.7}}}, {{1, 0}, {0, 1}}, 0.9);
    CHECK(validate_mdp(mdp).passed());
}

TEST_CASE("validate_mdp names the row that does not sum to one") {
    const TabularMDP mdp({{{0.5, 0.5}, {0.6, 0.3}}, {{0.0, 1.0}, {0.3, 0.7}}}, {{1, 0}, {0, 1}}, 0.9);
    const auto report = validate_mdp(mdp);
    REQUIRE_FALSE(report.passed());
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].state == 0);
    CHECK(report.issues[0].action == 1);
}

TEST_CASE("validate_mdp names a NaN reward") {
    const TabularMDP mdp({{{1.0, 0.0}, {1.0, 0.0}}, {{0.0, 1.0}, {0.0, 1.0}}},
                         {{0, 0}, {std::nan(""), 1}}, 0.5);
    const auto report = validate_mdp(mdp);
    REQUIRE_FALSE(report.passed());
    CHECK(report.issues[0].state == 1);
    CHECK(report.issues[0].action == 0);
}

TEST_CASE("validate_mdp flags negative entries, empty supports and gamma = 1") {
    const TabularMDP neg({{{1.2, -0.2}}, {{0.0, 1.0}}}, {{0}, {0}}, 0.5);
    CHECK_FALSE(validate_mdp(neg).passed());
    Kernel k{SparseDist{}, SparseDist{{0}, {1.0}}};
    const TabularMDP empty(2, 1, k, {0.0, 0.0}, 0.5);
    CHECK_FALSE(validate_mdp(empty).passed());
    CHECK_FALSE(validate_mdp(one_state({0.0}, 1.0)).passed());
    CHECK_THROWS_AS(one_state({0.0}, 1.0).require_valid(), std::invalid_argument);
}

TEST_CASE("soft_bellman on one state without lookahead") {
    CHECK(soft_bellman(one_state({0, 0}, 0.0), {0.0}, 1.0)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(soft_bellman(one_state({1, 1}, 0.0), {0.0}, 1.0)[0] ==
          doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(soft_bellman(one_state({0, 0}, 0.0), {0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(soft_bellman(one_state({0, 0}, 0.0), {0.0}, -1.0), std::invalid_argument);
}

TEST_CASE("soft_bellman survives tiny eta") {
    const auto v = soft_bellman(one_state({1000, 999}, 0.0), {0.0}, 1e-3);
    CHECK(std::isfinite(v[0]));
    CHECK(v[0] == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("soft_bellman fixed point agrees with plain iteration") {
    std::mt19937_64 rng(11);
    const TabularMDP mdp = random_mdp(3, 2, 0.9, rng);
    ValueFunction v(3, 0.0);
    for (int i = 0; i < 2000; ++i) v = soft_bellman(mdp, v, 1.0);
    CHECK(sup_norm_diff(soft_bellman(mdp, v, 1.0), v) <= 1e-10);
    const numvec ref = oracle::plain_soft_iteration(mdp, 1.0, 10000);
    CHECK(sup_norm_diff(v, ref) <= 1e-10);
}

TEST_CASE("soft_value_iteration with gamma = 0 finishes in one sweep") {
    const TabularMDP mdp = one_state({0.2, 1.5, -0.3}, 0.0);
    const auto sol = soft_value_iteration(mdp, config(0.7, 1e-6));
    CHECK(sol.diagnostics.iterations == 1);
    const double expected = 0.7 * std::log(std::exp(0.2 / 0.7) + std::exp(1.5 / 0.7) + std::exp(-0.3 / 0.7));
    CHECK(sol.value[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("identical rewards give uniform policy rows") {
    std::mt19937_64 rng(2);
    TabularMDP mdp = random_mdp(4, 3, 0.8, rng);
    numvec r(12);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 3; ++a) r[s * 3 + a] = static_cast<double>(s);
    // identical successor rows too, so h is action-independent
    Kernel k = mdp.kernel();
    for (std::size_t s = 0; s < 4; ++s) k[s * 3 + 1] = k[s * 3 + 2] = k[s * 3];
    const TabularMDP sym(4, 3, k, r, 0.8);
    const auto sol = soft_value_iteration(sym, config(1.0, 1e-8));
    for (double p : sol.policy.data()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("soft_value_iteration is within epsilon of a machine-precision run") {
    std::mt19937_64 rng(5);
    const TabularMDP mdp = random_mdp(4, 3, 0.9, rng);
    const auto sol = soft_value_iteration(mdp, config(1.0, 1e-8));
    const auto ref = soft_value_iteration(mdp, config(1.0, 1e-12));
    CHECK(sup_norm_diff(sol.value, ref.value) <= 1e-8);
}

TEST_CASE("soft_value_iteration reports non-convergence") {
    std::mt19937_64 rng(5);
    const TabularMDP mdp = random_mdp(4, 3, 0.99, rng);
    SolverConfig c = config(1.0, 1e-10);
    c.max_iters = 5;
    try {
        soft_value_iteration(mdp, c);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterations == 5);
        CHECK(e.last_residual > 0.0);
    }
}

TEST_CASE("soft_policy_evaluation of the uniform policy is the entropy") {
    const TabularMDP mdp = one_state({0, 0}, 0.0);
    const auto v = soft_policy_evaluation(mdp, SoftPolicy::uniform(1, 2), 1.0, 1e-10);
    CHECK(v[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("soft_policy_evaluation of a near one-hot policy is the discounted reward") {
    // 2-state chain: action 0 moves to the other state
    const TabularMDP mdp({{{0, 1}, {1, 0}}, {{1, 0}, {0, 1}}}, {{1.0, 0.0}, {2.0, 0.0}}, 0.5);
    SoftPolicy pi(2, 2);
    for (std::size_t s = 0; s < 2; ++s) {
        pi(s, 0) = 1.0 - 1e-9;
        pi(s, 1) = 1e-9;
    }
    const auto v = soft_policy_evaluation(mdp, pi, 1e-6, 1e-12);
    // V0 = 1 + 0.5 V1, V1 = 2 + 0.5 V0
    CHECK(v[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-8));
    CHECK(v[1] == doctest::Approx(10.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("soft_policy_evaluation matches Monte Carlo returns") {
    std::mt19937_64 rng(17);
    const TabularMDP mdp = random_mdp(3, 2, 0.7, rng);
    SoftPolicy pi(3, 2);
    for (std::size_t s = 0; s < 3; ++s) {
        const numvec row = random_distribution(2, rng);
        pi(s, 0) = row[0];
        pi(s, 1) = row[1];
    }
    const double eta = 0.5;
    const auto v = soft_policy_evaluation(mdp, pi, eta, 1e-12);
    const auto dense = oracle::dense_kernel(mdp);
    std::mt19937_64 mc(99);
    const int n = 200000;
    for (std::size_t s = 0; s < 3; ++s) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            // 0.7^100 is far below the standard error
            const double r = oracle::rollout(mdp, dense, pi.data(), eta, s, 100, mc);
            sum += r;
            sq += r * r;
        }
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        CHECK(std::abs(mean - v[s]) <= 3.0 * se);
    }
}

TEST_CASE("sample_trajectory has the requested length and is reproducible") {
    std::mt19937_64 rng(1);
    const TabularMDP mdp = random_mdp(5, 3, 0.9, rng);
    const auto pi = SoftPolicy::uniform(5, 3);
    std::mt19937_64 a(42), b(42);
    const Trajectory t1 = sample_trajectory(mdp, pi, 2, 8, a);
    const Trajectory t2 = sample_trajectory(mdp, pi, 2, 8, b);
    CHECK(t1.length() == 8);
    CHECK(t1.steps[0].state == 2);
    CHECK(t1 == t2);
}

TEST_CASE("sample_trajectory follows the unique path of a deterministic system") {
    // ring of 4 states, action 1 advances, action 0 stays
    std::vector<std::vector<numvec>> t(4, std::vector<numvec>(2, numvec(4, 0.0)));
    for (std::size_t s = 0; s < 4; ++s) {
        t[s][0][s] = 1.0;
        t[s][1][(s + 1) % 4] = 1.0;
    }
    const TabularMDP mdp(t, std::vector<numvec>(4, numvec(2, 0.0)), 0.9);
    SoftPolicy pi(4, 2);
    for (std::size_t s = 0; s < 4; ++s) pi(s, 1) = 1.0;
    std::mt19937_64 rng(3);
    const Trajectory traj = sample_trajectory(mdp, pi, 1, 6, rng);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(traj.steps[k].state == (1 + k) % 4);
        CHECK(traj.steps[k].action == 1);
    }
}

TEST_CASE("sample_index never returns a zero-probability index") {
    std::mt19937_64 rng(8);
    const numvec p{0.0, 0.5, 0.0, 0.5, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const auto k = sample_index(p, rng);
        CHECK((k == 1 || k == 3));
    }
}

TEST_CASE("discounted_visitation edge cases") {
    std::mt19937_64 rng(4);
    const TabularMDP mdp = random_mdp(3, 2, 0.0, rng);
    const numvec start{0.2, 0.3, 0.5};
    CHECK(discounted_visitation(mdp, SoftPolicy::uniform(3, 2), start, 1e-12) == start);

    const TabularMDP absorbing = one_state({1.0, 0.0}, 0.95);
    const auto d = discounted_visitation(absorbing, SoftPolicy::uniform(1, 2), {1.0}, 1e-12);
    CHECK(d[0] == doctest::Approx(1.0 / 0.05).epsilon(1e-10));
}

TEST_CASE("discounted_visitation matches the dense power series") {
    std::mt19937_64 rng(21);
    const TabularMDP mdp = random_mdp(3, 2, 0.9, rng);
    SoftPolicy pi(3, 2);
    for (std::size_t s = 0; s < 3; ++s) {
        const numvec row = random_distribution(2, rng);
        pi(s, 0) = row[0];
        pi(s, 1) = row[1];
    }
    const numvec start{0.5, 0.25, 0.25};
    const auto d = discounted_visitation(mdp, pi, start, 1e-12);
    const auto ref = oracle::power_series_visitation(mdp, pi.data(), start, 10000);
    CHECK(sup_norm_diff(d, ref) <= 1e-8);
    double total = 0.0;
    for (double x : d) total += x;
    CHECK(total == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("property: soft_bellman is a gamma-contraction") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t ns = 1 + trial % 6, na = 1 + trial % 4;
        const double gamma = 0.1 + 0.85 * uniform01(rng);
        const TabularMDP mdp = random_mdp(ns, na, gamma, rng, 1 + trial % 3);
        ValueFunction v(ns), w(ns);
        for (auto& x : v) x = 20.0 * uniform01(rng) - 10.0;
        for (auto& x : w) x = 20.0 * uniform01(rng) - 10.0;
        const double eta = 0.05 + 2.0 * uniform01(rng);
        const double lhs = sup_norm_diff(soft_bellman(mdp, v, eta), soft_bellman(mdp, w, eta));
        CHECK(lhs <= gamma * sup_norm_diff(v, w) + 1e-12);
    }
}

TEST_CASE("property: constant shifts pass through scaled by gamma") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const TabularMDP mdp = random_mdp(4, 3, 0.9, rng);
        ValueFunction v(4);
        for (auto& x : v) x = uniform01(rng);
        const double c = 10.0 * uniform01(rng) - 5.0;
        ValueFunction shifted = v;
        for (auto& x : shifted) x += c;
        const auto a = soft_bellman(mdp, shifted, 0.7), b = soft_bellman(mdp, v, 0.7);
        for (std::size_t s = 0; s < 4; ++s) CHECK(a[s] - b[s] == doctest::Approx(0.9 * c).epsilon(1e-12));
    }
}

TEST_CASE("property: soft backup approaches the hard backup as eta shrinks") {
    std::mt19937_64 rng(33);
    const TabularMDP mdp = random_mdp(5, 4, 0.9, rng);
    ValueFunction v(5);
    for (auto& x : v) x = uniform01(rng);
    const auto hard = hard_bellman(mdp, v);
    for (double eta : {1.0, 0.1, 1e-3, 1e-6}) {
        const auto soft = soft_bellman(mdp, v, eta);
        for (std::size_t s = 0; s < 5; ++s) {
            CHECK(soft[s] >= hard[s] - 1e-12);
            CHECK(soft[s] <= hard[s] + eta * std::log(4.0) + 1e-12);
        }
    }
}

TEST_CASE("property: returned policy rows are exactly softmax(h/eta) of the returned V") {
    std::mt19937_64 rng(34);
    const TabularMDP mdp = random_mdp(4, 3, 0.9, rng);
    const auto sol = soft_value_iteration(mdp, config(0.3, 1e-8));
    const auto again = softmax_policy(4, 3, nominal_q_values(mdp, sol.value), 0.3);
    CHECK(again.data() == sol.policy.data());
}

TEST_CASE("SolverConfig rejects eta <= 0 and epsilon <= 0") {
    CHECK_THROWS_AS(config(0.0, 1e-6).require_valid(), std::invalid_argument);
    CHECK_THROWS_AS(config(1.0, 0.0).require_valid(), std::invalid_argument);
    CHECK_NOTHROW(config(1.0, 1e-6).require_valid());
}

TEST_CASE("nominal modified policy iteration settles on a self-consistent policy") {
    std::mt19937_64 rng(35);
    const TabularMDP mdp = random_mdp(4, 3, 0.8, rng);
    const auto sol = modified_policy_iteration(mdp, 0.5, 20, config(1.0, 1e-8), 1e-9);
    // one more greedy step leaves the policy where it is
    const numvec h = nominal_q_values(mdp, sol.value);
    for (std::size_t s = 0; s < 4; ++s) {
        numvec w(3);
        double z = 0.0;
        for (std::size_t a = 0; a < 3; ++a) z += (w[a] = sol.policy(s, a) * std::exp(h[s * 3 + a] / 0.5));
        for (std::size_t a = 0; a < 3; ++a) CHECK(w[a] / z == doctest::Approx(sol.policy(s, a)).epsilon(1e-6));
    }
}
