#pragma once

#include "rermdp/adversary.hpp"
#include "rermdp/diagnostics.hpp"
#include "rermdp/mdp.hpp"
#include "rermdp/soft_dp.hpp"

#include <functional>
#include <optional>
#include <string>

namespace rermdp {

enum class Rectangularity { SA, S };

std::string to_string(Rectangularity r);
Rectangularity rectangularity_from_string(const std::string& name);

/**
 * Rectangular uncertainty set around an MDP's nominal kernel.
 *
 * SA: cells[s * n_actions + a] is a single-block bundle over supp(q0(.|s,a)).
 * S:  cells[s] has one block per action, block a ranging over supp(q0(.|s,a)).
 * Variables are always ordered like the nominal support lists.
 */
struct UncertaintySet {
    Rectangularity rectangularity = Rectangularity::SA;
    std::vector<ConstraintBundle> cells;

    /// Shapes match the MDP and every cell is Slater-feasible or a singleton.
    void require_compatible(const TabularMDP& mdp) const;

    /// Largest radius among relative-entropy constraints (0 for a nominal set).
    prec_t max_radius() const;

    /// KL(q || q0(.|s,a)) <= beta for every (s,a).
    static UncertaintySet kl_sa(const TabularMDP& mdp, prec_t beta);
    /// One KL ball per action with radius beta, coupled into one s-rectangular cell per state.
    static UncertaintySet kl_s(const TabularMDP& mdp, prec_t beta);
    /// Singleton sets {q0}.
    static UncertaintySet nominal(const TabularMDP& mdp) { return kl_sa(mdp, 0.0); }
};

/**
 * h (SA) or z(.|V,q*) (S) for every (s,a), with the adversary solutions that produced it.
 * q_star is stacked per cell exactly like the corresponding bundle's variables.
 */
struct RobustQTable {
    Rectangularity rectangularity = Rectangularity::SA;
    std::size_t n_actions = 0;
    numvec h;
    std::vector<numvec> q_star;
    std::vector<numvec> duals;
    numvec gaps;

    prec_t max_gap() const;

    /// Worst-case kernel assembled from q_star (one SparseDist per (s,a)).
    Kernel kernel(const TabularMDP& mdp) const;
};

/// Options shared by the robust Bellman operators.
struct BellmanOptions {
    /// Previous table whose duals narrow the bisection brackets.
    const RobustQTable* warm = nullptr;
    /// Added to the worst-case expectation of every SA cell (error injection for tests).
    std::function<prec_t(std::size_t cell)> injected_error;
};

struct BellmanResult {
    ValueFunction value;
    RobustQTable table;
};

/// T~[V](s) = eta ln sum_a exp(h(a,s|V)/eta), h = r + gamma * (xi-accurate worst case).
BellmanResult robust_soft_bellman_sa(const TabularMDP& mdp, const UncertaintySet& u,
                                     const ValueFunction& v, prec_t eta, prec_t xi,
                                     const BellmanOptions& opts = {});

/// T~[V](s) = eta ln min_{q_s} sum_a exp(z(a,s|V,q)/eta), solved in the log domain.
BellmanResult robust_soft_bellman_s(const TabularMDP& mdp, const UncertaintySet& u,
                                    const ValueFunction& v, prec_t eta, prec_t xi,
                                    const BellmanOptions& opts = {});

/// Dispatches on u.rectangularity.
BellmanResult robust_soft_bellman(const TabularMDP& mdp, const UncertaintySet& u,
                                  const ValueFunction& v, prec_t eta, prec_t xi,
                                  const BellmanOptions& opts = {});

/// Closed-form values of the approximation bounds for approximate robust soft updates.
struct ErrorBounds {
    /// ||T~^n[V] - T^n[V]|| <= xi gamma (1 - gamma^n) / (1 - gamma)
    prec_t accumulated_error = 0.0;
    /// largest inner accuracy that certifies an epsilon-approximation: eps (1-gamma)^2 / (4 gamma)
    prec_t max_inner_accuracy = 0.0;
    /// residual threshold that certifies it: 3 eps (1 - gamma) / 4
    prec_t stop_threshold = 0.0;
    /// policy error e^{2 (eps + xi) / eta} - 1
    prec_t policy_error = 0.0;
};

/// n = nullopt evaluates the n -> infinity limit of the accumulated error.
ErrorBounds error_bounds(prec_t xi, prec_t gamma, std::optional<std::size_t> n, prec_t eta,
                               prec_t epsilon);

struct RobustSolution {
    ValueFunction value;
    SoftPolicy policy;
    RobustQTable table;
    Diagnostics diagnostics;
};

/**
 * Approximate robust value iteration from V = 0 with inner accuracy xi and stopping threshold
 * on ||V_{n+1} - V_n||. With gamma = 0 a single update is exact and no adversary is called.
 */
RobustSolution robust_value_iteration(const TabularMDP& mdp, const UncertaintySet& u, prec_t eta,
                                      prec_t xi, prec_t stop_threshold, std::size_t max_iters,
                                      const ValueFunction* initial = nullptr);

/**
 * epsilon-approximation of V*: xi = eps (1-gamma)^2 / (4 gamma), stop at 3 eps (1-gamma)/4.
 * The returned policy is extracted from the final table (no extra adversary calls).
 */
RobustSolution robust_value_iteration(const TabularMDP& mdp, const UncertaintySet& u,
                                      const SolverConfig& cfg);

/// Softmax over h/eta (SA) or z(.|V,q*)/eta (S), with the table used.
std::pair<SoftPolicy, RobustQTable> extract_policy(const TabularMDP& mdp, const UncertaintySet& u,
                                                   const ValueFunction& v, prec_t eta, prec_t xi);

/**
 * Policy-accuracy variant: runs value iteration with xi = ln(eps+1)(1-gamma)^2 / (8 gamma) and
 * threshold 3 ln(eps+1)(1-gamma)/8, then extracts the policy at that xi.
 */
RobustSolution solve_robust_policy(const TabularMDP& mdp, const UncertaintySet& u,
                                   const SolverConfig& cfg);

/**
 * One sweep of T^pi[V](s) = min_q sum_a pi(a|s)(r - entropy_weight ln pi + gamma E_q[V]).
 * entropy_weight = 0 gives the unregularized robust update used by modified policy iteration.
 */
ValueFunction robust_policy_backup(const TabularMDP& mdp, const UncertaintySet& u,
                                   const SoftPolicy& pi, const ValueFunction& v,
                                   prec_t entropy_weight, prec_t xi, prec_t* max_gap = nullptr);

/// Fixed point V^pi to epsilon; xi defaults to eps (1-gamma)^2 / (4 gamma).
ValueFunction robust_policy_evaluation(const TabularMDP& mdp, const UncertaintySet& u,
                                       const SoftPolicy& pi, prec_t eta, prec_t epsilon,
                                       std::optional<prec_t> xi = std::nullopt,
                                       std::size_t max_iters = 1000000);

struct PenalizedUpdate {
    ValueFunction value;
    SoftPolicy policy;
    RobustQTable table;
};

/**
 * Robust Bellman update with a KL(pi || pi_bar) penalty instead of the entropy:
 * V'(s) = eta ln sum_a pi_bar(a|s) exp(h/eta), pi ∝ pi_bar exp(h/eta). pi_bar must be positive.
 */
PenalizedUpdate kl_penalized_robust_bellman(const TabularMDP& mdp, const UncertaintySet& u,
                                            const ValueFunction& v, const SoftPolicy& pi_bar,
                                            prec_t eta, prec_t xi);

/**
 * Robust modified policy iteration: greedy step pi_{k+1} from the KL-penalized update anchored
 * at pi_k, then m unregularized robust evaluation sweeps. Stops once ||pi_{k+1} - pi_k|| <=
 * policy_tol. Diagnostics record the per-step error bounds for the inner accuracy used.
 */
MPISolution robust_modified_policy_iteration(const TabularMDP& mdp, const UncertaintySet& u,
                                             prec_t eta, std::size_t m, const SolverConfig& cfg,
                                             prec_t policy_tol = 1e-6);

/// Inner accuracy xi = eps (1-gamma)^2 / (4 gamma) (0 when gamma = 0).
prec_t value_accuracy_xi(prec_t epsilon, prec_t gamma);

} // namespace rermdp
