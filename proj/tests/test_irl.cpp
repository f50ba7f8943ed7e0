#include "rermdp/irl.hpp"
#include "rermdp/objectworld.hpp"
#include "rermdp/random_instances.hpp"
#include "rermdp/robust_dp.hpp"
#include "rermdp/soft_dp.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace rermdp;

namespace {

double max_abs(const numvec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

SoftPolicy random_policy(std::size_t ns, std::size_t na, std::mt19937_64& rng) {
    SoftPolicy pi(ns, na);
    for (std::size_t s = 0; s < ns; ++s) {
        const numvec row = random_distribution(na, rng, 0.1);
        for (std::size_t a = 0; a < na; ++a) pi(s, a) = row[a];
    }
    return pi;
}

Demonstrations sample_demos(const TabularMDP& mdp, const SoftPolicy& pi, std::size_t n,
                            std::size_t len, std::mt19937_64& rng) {
    Demonstrations d;
    for (std::size_t i = 0; i < n; ++i)
        d.trajectories.push_back(sample_trajectory(mdp, pi, rng() % mdp.n_states(), len, rng));
    return d;
}

FeatureMap random_features(std::size_t ns, std::size_t na, std::size_t dim, std::mt19937_64& rng) {
    numvec phi(ns * na * dim);
    for (auto& x : phi) x = uniform01(rng);
    return FeatureMap(ns, na, dim, std::move(phi));
}

void check_gradient(const Demonstrations& demos, const TabularMDP& mdp, const FeatureMap& f,
                    const numvec& theta, const UncertaintySet* u, double eta) {
    const numvec g = irl_gradient(demos, mdp, f, theta, u, eta, 1e-11);
    const numvec fd = irl_gradient_fd(demos, mdp, f, theta, u, eta, 1e-5, 1e-11);
    numvec diff(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) diff[k] = g[k] - fd[k];
    CHECK(max_abs(diff) <= 1e-3 * std::max(max_abs(fd), 1e-6));
}

} // namespace

TEST_CASE("likelihood: identical action rewards give the uniform policy") {
    const TabularMDP mdp({{{1.0}, {1.0}, {1.0}}}, {{0.5, 0.5, 0.5}}, 0.9);
    Demonstrations d;
    d.trajectories.push_back({{{0, 0}, {0, 2}, {0, 1}}});
    d.trajectories.push_back({{{0, 1}}});
    const auto lik = robust_log_likelihood(d, mdp, nullptr, 1.0, 1e-8);
    CHECK(lik.value == doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-9));
    const auto u = UncertaintySet::kl_sa(mdp, 0.1);
    CHECK(robust_log_likelihood(d, mdp, &u, 1.0, 1e-8).value == doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("likelihood: the dominant action at small eta is close to certain") {
    const TabularMDP mdp({{{0.5, 0.5}, {0.5, 0.5}}, {{0.5, 0.5}, {0.5, 0.5}}}, {{1.0, 0.0}, {1.0, 0.0}}, 0.9);
    Demonstrations d;
    d.trajectories.push_back({{{0, 0}, {1, 0}, {0, 0}, {0, 0}}});
    const auto lik = robust_log_likelihood(d, mdp, nullptr, 0.05, 1e-8);
    CHECK(lik.value < 0.0);
    CHECK(lik.value > -1e-7);
}

TEST_CASE("likelihood: coarse accuracy agrees with a fine solve") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 4; ++i) {
        const auto mdp = random_mdp(4, 3, 0.9, rng, 3);
        const auto demos = sample_demos(mdp, random_policy(4, 3, rng), 10, 8, rng);
        const auto u = UncertaintySet::kl_sa(mdp, 0.1);
        for (const UncertaintySet* set : {static_cast<const UncertaintySet*>(nullptr), &u}) {
            const double coarse = robust_log_likelihood(demos, mdp, set, 1.0, 1e-6).value;
            const double fine = robust_log_likelihood(demos, mdp, set, 1.0, 1e-10).value;
            CHECK(std::abs(coarse - fine) <= 1e-4);
            CHECK(coarse <= 0.0);
        }
    }
}

TEST_CASE("likelihood: rejects invalid demonstrations") {
    const TabularMDP mdp({{{1.0}, {1.0}}}, {{0.0, 0.0}}, 0.9);
    Demonstrations empty;
    CHECK_THROWS_AS(robust_log_likelihood(empty, mdp, nullptr, 1.0, 1e-6), std::invalid_argument);
    Demonstrations bad;
    bad.trajectories.push_back({{{0, 2}}});
    CHECK_THROWS_AS(robust_log_likelihood(bad, mdp, nullptr, 1.0, 1e-6), std::invalid_argument);
}

TEST_CASE("gradient: analytic and finite differences agree") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 6; ++i) {
        const std::size_t ns = 2 + i, na = 2 + i % 2;
        const auto mdp = random_mdp(ns, na, i % 2 ? 0.9 : 0.5, rng, std::min<std::size_t>(ns, 3));
        const auto f = random_features(ns, na, 2, rng);
        const auto demos = sample_demos(mdp, random_policy(ns, na, rng), 6, 5, rng);
        const numvec theta{uniform01(rng) - 0.5, uniform01(rng) - 0.5};
        const auto u = UncertaintySet::kl_sa(mdp, 0.1);
        check_gradient(demos, mdp, f, theta, nullptr, 1.0);
        check_gradient(demos, mdp, f, theta, &u, 1.0);
        check_gradient(demos, mdp, f, theta, &u, 0.4);
    }
}

TEST_CASE("gradient: s-rectangular sets include the moving worst case") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 4; ++i) {
        const std::size_t ns = 2 + i, na = 2;
        const auto mdp = random_mdp(ns, na, 0.9, rng, std::min<std::size_t>(ns, 3));
        const auto f = random_features(ns, na, 2, rng);
        const auto demos = sample_demos(mdp, random_policy(ns, na, rng), 6, 5, rng);
        const numvec theta{2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0};
        const auto u = UncertaintySet::kl_s(mdp, 0.05 + 0.2 * uniform01(rng));
        check_gradient(demos, mdp, f, theta, &u, 1.0);
        check_gradient(demos, mdp, f, theta, &u, 0.5);
    }
}

TEST_CASE("gradient: gamma = 0 has only the immediate term") {
    std::mt19937_64 rng(8);
    const auto mdp = random_mdp(3, 2, 0.0, rng);
    const auto f = random_features(3, 2, 2, rng);
    const auto demos = sample_demos(mdp, random_policy(3, 2, rng), 5, 4, rng);
    check_gradient(demos, mdp, f, {0.3, -0.2}, nullptr, 1.0);
}

TEST_CASE("gradient: duplicating every demonstration changes nothing") {
    std::mt19937_64 rng(9);
    const auto mdp = random_mdp(4, 2, 0.9, rng, 2);
    const auto f = random_features(4, 2, 2, rng);
    auto demos = sample_demos(mdp, random_policy(4, 2, rng), 5, 6, rng);
    const auto u = UncertaintySet::kl_sa(mdp, 0.1);
    const numvec theta{0.2, -0.4};
    const numvec g1 = irl_gradient(demos, mdp, f, theta, &u, 1.0);
    const auto copy = demos.trajectories;
    demos.trajectories.insert(demos.trajectories.end(), copy.begin(), copy.end());
    const numvec g2 = irl_gradient(demos, mdp, f, theta, &u, 1.0);
    for (std::size_t k = 0; k < 2; ++k) CHECK(g2[k] == doctest::Approx(g1[k]).epsilon(1e-12));
}

TEST_CASE("gradient: vanishes at the maximizer found by a 1-D search") {
    std::mt19937_64 rng(10);
    const auto mdp = random_mdp(3, 2, 0.8, rng);
    const auto f = random_features(3, 2, 1, rng);
    const auto demos = sample_demos(mdp, random_policy(3, 2, rng), 8, 6, rng);
    auto lik = [&](double th) {
        return robust_log_likelihood(demos, mdp.with_rewards(f.rewards({th})), nullptr, 1.0, 1e-11).value;
    };
    double best = -10.0, best_val = lik(best);
    for (double th = -10.0; th <= 10.0; th += 0.01) {
        const double v = lik(th);
        if (v > best_val) best = th, best_val = v;
    }
    REQUIRE(std::abs(best) < 9.9);
    // golden-section refinement inside the bracketing cell
    double lo = best - 0.01, hi = best + 0.01;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 60; ++i) {
        const double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
        if (lik(a) > lik(b)) hi = b; else lo = a;
    }
    const numvec g = irl_gradient(demos, mdp, f, {0.5 * (lo + hi)}, nullptr, 1.0, 1e-11);
    CHECK(std::abs(g[0]) <= 1e-3);
}

TEST_CASE("training: balanced demonstrations keep theta at zero") {
    const TabularMDP mdp({{{1.0}, {1.0}}}, {{0.0, 0.0}}, 0.9);
    const FeatureMap f(1, 2, 2, {1.0, 0.0, 0.0, 1.0});
    Demonstrations d;
    d.trajectories.push_back({{{0, 0}, {0, 1}, {0, 1}, {0, 0}}});
    d.trajectories.push_back({{{0, 1}, {0, 0}}});
    TrainOptions opts;
    opts.iterations = 20;
    const auto res = train_maxent(d, mdp, f, nullptr, 1.0, opts);
    CHECK(max_abs(res.theta) <= 1e-6);
}

TEST_CASE("training: curve is recorded, finite and deterministic") {
    std::mt19937_64 rng(11);
    const auto mdp = random_mdp(4, 2, 0.9, rng, 2);
    const auto f = random_features(4, 2, 2, rng);
    const auto demos = sample_demos(mdp, random_policy(4, 2, rng), 6, 6, rng);
    const auto u = UncertaintySet::kl_sa(mdp, 0.05);
    TrainOptions opts;
    opts.iterations = 15;
    const auto a = train_maxent(demos, mdp, f, &u, 1.0, opts);
    const auto b = train_maxent(demos, mdp, f, &u, 1.0, opts);
    CHECK(a.curve.size() == opts.iterations + 1);
    CHECK(a.gradient_norms.size() == opts.iterations);
    for (double x : a.curve) CHECK(std::isfinite(x));
    CHECK(a.theta == b.theta);
    CHECK(a.curve == b.curve);
    CHECK(a.curve.back() >= a.curve.front());
}

TEST_CASE("training: a runaway step size reports divergence with the history") {
    std::mt19937_64 rng(12);
    const auto mdp = random_mdp(3, 2, 0.9, rng);
    const auto f = random_features(3, 2, 2, rng);
    const auto demos = sample_demos(mdp, random_policy(3, 2, rng), 4, 5, rng);
    TrainOptions opts;
    opts.learning_rate = 1e300;
    opts.decay = 1e10;
    opts.iterations = 10;
    try {
        train_maxent(demos, mdp, f, nullptr, 1.0, opts);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(!e.history.curve.empty());
    }
}

TEST_CASE("training: recovers a policy no worse than the untrained one on a small objectworld") {
    ObjectworldSpec spec;
    spec.grid_size = 4;
    spec.n_colors = 2;
    spec.seed = 3;
    const auto world = generate_objectworld(spec);
    const auto u = build_kl_uncertainty(world.mdp, 0.0);
    DemoOptions dopts;
    dopts.n_paths = 64;
    dopts.seed = 5;
    const auto gen = generate_demonstrations(world.mdp, u, 1.0, dopts);
    TrainOptions opts;
    opts.iterations = 30;
    const auto res = train_maxent(gen.demos, world.mdp, world.features, nullptr, 1.0, opts);
    const numvec zero(world.features.dim(), 0.0);
    const auto trained = expected_value_difference(world.mdp, learned_policy(world.mdp, world.features, res.theta, 1.0), 1.0);
    const auto untrained = expected_value_difference(world.mdp, learned_policy(world.mdp, world.features, zero, 1.0), 1.0);
    CHECK(trained.raw <= untrained.raw);

    // transfer: the learned weights on a fresh world give a finite EVD
    spec.seed = 4;
    const auto fresh = generate_objectworld(spec);
    const auto transfer = expected_value_difference(fresh.mdp, learned_policy(fresh.mdp, fresh.features, res.theta, 1.0), 1.0);
    CHECK(std::isfinite(transfer.raw));
    CHECK(transfer.value >= 0.0);
}

TEST_CASE("EVD: self-comparison, a poor policy, and direct evaluation") {
    std::mt19937_64 rng(13);
    const auto mdp = random_mdp(3, 2, 0.9, rng);
    SolverConfig cfg;
    cfg.epsilon = 1e-8;
    const auto opt = soft_value_iteration(mdp, cfg);
    const auto self = expected_value_difference(mdp, opt.policy, 1.0, 1e-8);
    CHECK(std::abs(self.raw) <= 2e-8);

    const auto pi = random_policy(3, 2, rng);
    const auto evd = expected_value_difference(mdp, pi, 1.0, 1e-8);
    const auto vpi = soft_policy_evaluation(mdp, pi, 1.0, 1e-8);
    double direct = 0.0;
    for (std::size_t s = 0; s < 3; ++s) direct += (opt.value[s] - vpi[s]) / 3.0;
    CHECK(std::abs(evd.raw - direct) <= 4e-8);
    CHECK(evd.value == std::max(evd.raw, 0.0));

    // one action pays 10, the other nothing
    const TabularMDP dominant({{{1.0}, {1.0}}}, {{10.0, 0.0}}, 0.9);
    CHECK(expected_value_difference(dominant, SoftPolicy::uniform(1, 2), 0.1).value > 1.0);

    CHECK_THROWS_AS(expected_value_difference(mdp, SoftPolicy::uniform(2, 2), 1.0), std::invalid_argument);
}

TEST_CASE("property: a constant reward shift leaves the policy and likelihood unchanged") {
    std::mt19937_64 rng(14);
    const auto mdp = random_mdp(4, 3, 0.9, rng, 3);
    const auto demos = sample_demos(mdp, random_policy(4, 3, rng), 5, 6, rng);
    numvec shifted = mdp.rewards();
    for (auto& r : shifted) r += 2.5;
    const auto u = UncertaintySet::kl_sa(mdp, 0.1);
    const auto base = robust_log_likelihood(demos, mdp, &u, 1.0, 1e-10);
    const auto moved = robust_log_likelihood(demos, mdp.with_rewards(shifted), &u, 1.0, 1e-10);
    CHECK(moved.value == doctest::Approx(base.value).epsilon(1e-8));
    CHECK(moved.policy.distance(base.policy) <= 1e-9);
    for (std::size_t s = 0; s < 4; ++s) CHECK(moved.v[s] - base.v[s] == doctest::Approx(25.0).epsilon(1e-8));
}
