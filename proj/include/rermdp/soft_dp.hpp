#pragma once

#include "rermdp/diagnostics.hpp"
#include "rermdp/mdp.hpp"

#include <random>
#include <span>
#include <tuple>

namespace rermdp {

/// eta * ln sum_i exp(x_i / eta), always evaluated with the max shift.
prec_t log_sum_exp(std::span<const prec_t> x, prec_t eta);

/// softmax(x / eta) with the max shift; weights (optional) multiply each term.
numvec softmax(std::span<const prec_t> x, prec_t eta);
numvec softmax(std::span<const prec_t> x, std::span<const prec_t> weights, prec_t eta);

/// h(a,s|V) = r(a|s) + gamma * E_{q0}[V] for every (s,a), row-major.
numvec nominal_q_values(const TabularMDP& mdp, const ValueFunction& v);

/// Same as nominal_q_values but with an explicit kernel.
numvec q_values(const TabularMDP& mdp, const Kernel& kernel, const ValueFunction& v);

/// Non-robust soft Bellman update eta ln sum_a exp(h(a,s|V)/eta).
ValueFunction soft_bellman(const TabularMDP& mdp, const ValueFunction& v, prec_t eta);

/// Hard Bellman update max_a h(a,s|V).
ValueFunction hard_bellman(const TabularMDP& mdp, const ValueFunction& v);

/// Softmax policy over an (s,a) table of h values.
SoftPolicy softmax_policy(std::size_t n_states, std::size_t n_actions, const numvec& h,
                          prec_t eta);

struct SoftSolution {
    ValueFunction value;
    SoftPolicy policy;
    Diagnostics diagnostics;
};

/**
 * Soft value iteration from V = 0 until ||V_{n+1} - V_n|| <= eps (1 - gamma) / gamma, which
 * certifies ||V_{n+1} - V*|| <= eps. The policy is softmax(h(.|V)/eta) of the returned V.
 * gamma = 0 finishes after a single update.
 */
SoftSolution soft_value_iteration(const TabularMDP& mdp, const SolverConfig& cfg);

/// Fixed point of T^pi[V](s) = sum_a pi(a|s) (r - eta ln pi + gamma E_{kernel}[V]).
ValueFunction soft_policy_evaluation(const TabularMDP& mdp, const SoftPolicy& pi, prec_t eta,
                                     prec_t epsilon, std::size_t max_iters = 1000000);
ValueFunction soft_policy_evaluation(const TabularMDP& mdp, const Kernel& kernel,
                                     const SoftPolicy& pi, prec_t eta, prec_t epsilon,
                                     std::size_t max_iters = 1000000);

/// Uniform double in [0,1) from the top 53 bits; stable across standard libraries.
inline prec_t uniform01(std::mt19937_64& rng) {
    return static_cast<prec_t>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw; never returns an index with zero weight.
std::size_t sample_index(std::span<const prec_t> probabilities, std::mt19937_64& rng);

/// K (state, action) pairs starting at s0 under pi and the given kernel (nominal by default).
Trajectory sample_trajectory(const TabularMDP& mdp, const SoftPolicy& pi, std::size_t s0,
                             std::size_t length, std::mt19937_64& rng,
                             const Kernel* kernel = nullptr);

/**
 * Discounted state visitation d(s) = sum_t gamma^t P(s_t = s) from the start measure `start`
 * (need not be normalized; the total mass scales linearly). Propagation stops once the
 * remaining tail mass gamma^t |start| / (1 - gamma) is at most epsilon.
 */
numvec discounted_visitation(const TabularMDP& mdp, const SoftPolicy& pi, const numvec& start,
                             prec_t epsilon, const Kernel* kernel = nullptr);

struct MPISolution {
    SoftPolicy policy;
    ValueFunction value;
    Diagnostics diagnostics;
};

/**
 * Nominal modified policy iteration with a KL anchor to the previous policy:
 * pi_{k+1} proportional to pi_k exp(h(.|V_k)/eta), V_{k+1} = (T^{pi_{k+1}}_unreg)^m [V_k].
 * Stops when ||pi_{k+1} - pi_k||_inf <= policy_tol.
 */
MPISolution modified_policy_iteration(const TabularMDP& mdp, prec_t eta, std::size_t m,
                                      const SolverConfig& cfg, prec_t policy_tol = 1e-6);

} // namespace rermdp
