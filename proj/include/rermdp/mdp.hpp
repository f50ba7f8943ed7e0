#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rermdp {

using prec_t = double;
using numvec = std::vector<prec_t>;
using indvec = std::vector<std::size_t>;

/// Raised when an iterative solver exhausts its budget. Carries the last residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, prec_t last_residual, std::size_t iterations)
        : std::runtime_error(what), last_residual(last_residual), iterations(iterations) {}
    prec_t last_residual;
    std::size_t iterations;
};

/// A sparse probability distribution over successor states.
/// `states` lists the successors with strictly positive probability.
struct SparseDist {
    indvec states;
    numvec probabilities;

    std::size_t size() const { return states.size(); }

    /// E[values(s')]
    prec_t expectation(const numvec& values) const {
        prec_t result = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i)
            result += probabilities[i] * values[states[i]];
        return result;
    }
};

/// Transition kernel indexed by s * n_actions + a.
using Kernel = std::vector<SparseDist>;

/**
 * Finite MDP with a nominal transition kernel, rewards r(a|s) and discount gamma.
 *
 * The object does not validate itself on construction so that malformed inputs can be
 * reported by validate_mdp; solvers call require_valid() before doing any work.
 */
class TabularMDP {
public:
    TabularMDP() = default;

    /// Builds from dense tables transitions[s][a][s'] and rewards[s][a]. Zero entries are
    /// dropped from the support.
    TabularMDP(const std::vector<std::vector<numvec>>& transitions,
               const std::vector<numvec>& rewards, prec_t gamma);

    /// Builds from an explicit sparse kernel (indexed s * n_actions + a) and row-major rewards.
    TabularMDP(std::size_t n_states, std::size_t n_actions, Kernel kernel, numvec rewards,
               prec_t gamma);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    prec_t gamma() const { return gamma_; }

    std::size_t cell(std::size_t s, std::size_t a) const { return s * n_actions_ + a; }

    const SparseDist& nominal(std::size_t s, std::size_t a) const { return kernel_[cell(s, a)]; }
    const Kernel& kernel() const { return kernel_; }

    prec_t reward(std::size_t s, std::size_t a) const { return rewards_[cell(s, a)]; }
    const numvec& rewards() const { return rewards_; }

    /// Copy with the reward table replaced (row-major [s][a]).
    TabularMDP with_rewards(numvec rewards) const;
    /// Copy with a different discount factor.
    TabularMDP with_gamma(prec_t gamma) const;

    /// Largest nominal support size over all (s,a).
    std::size_t max_support() const;

    /// Throws std::invalid_argument describing the first violated invariant.
    void require_valid() const;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    Kernel kernel_;
    numvec rewards_;
    prec_t gamma_ = 0.0;
};

struct ValidationIssue {
    std::size_t state;
    std::size_t action;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    std::vector<std::string> global_issues;

    bool passed() const { return issues.empty() && global_issues.empty(); }
    std::string summary() const;
};

/// Checks row sums (1e-12), negative or non-finite probabilities, empty supports,
/// out-of-range successors, non-finite rewards and gamma in [0,1).
ValidationReport validate_mdp(const TabularMDP& mdp);

using ValueFunction = numvec;

/// Stochastic policy pi(a|s), stored row-major.
class SoftPolicy {
public:
    SoftPolicy() = default;
    SoftPolicy(std::size_t n_states, std::size_t n_actions, prec_t fill = 0.0)
        : n_states_(n_states), n_actions_(n_actions), probs_(n_states * n_actions, fill) {}

    static SoftPolicy uniform(std::size_t n_states, std::size_t n_actions) {
        return SoftPolicy(n_states, n_actions, 1.0 / static_cast<prec_t>(n_actions));
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }

    prec_t operator()(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }
    prec_t& operator()(std::size_t s, std::size_t a) { return probs_[s * n_actions_ + a]; }

    const numvec& data() const { return probs_; }

    /// Throws std::invalid_argument if a row is not a distribution (1e-10).
    void require_valid() const;

    /// max |pi(a|s) - other(a|s)|
    prec_t distance(const SoftPolicy& other) const;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    numvec probs_;
};

struct Step {
    std::size_t state;
    std::size_t action;
    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;
    std::size_t length() const { return steps.size(); }
    bool operator==(const Trajectory&) const = default;
};

struct SolverConfig {
    prec_t eta = 1.0;
    prec_t epsilon = 1e-6;
    std::size_t max_iters = 100000;
    std::uint64_t seed = 0;

    void require_valid() const;
};

prec_t sup_norm_diff(const numvec& a, const numvec& b);

} // namespace rermdp
