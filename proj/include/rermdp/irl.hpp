#pragma once

#include "rermdp/robust_dp.hpp"

#include <span>

namespace rermdp {

/// Linear reward features phi(s,a) with r(a|s) = theta . phi(s,a).
class FeatureMap {
public:
    FeatureMap() = default;
    /// phi[(s * n_actions + a) * dim + k]
    FeatureMap(std::size_t n_states, std::size_t n_actions, std::size_t dim, numvec phi);

    /// State-only features broadcast over actions.
    static FeatureMap state_only(std::size_t n_actions, const std::vector<numvec>& per_state);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t dim() const { return dim_; }

    std::span<const prec_t> operator()(std::size_t s, std::size_t a) const {
        return {phi_.data() + (s * n_actions_ + a) * dim_, dim_};
    }
    const numvec& data() const { return phi_; }

    /// Row-major reward table theta . phi(s,a).
    numvec rewards(const numvec& theta) const;

    void require_valid() const;
    void require_compatible(const TabularMDP& mdp) const;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::size_t dim_ = 0;
    numvec phi_;
};

struct Demonstrations {
    std::vector<Trajectory> trajectories;

    std::size_t count() const { return trajectories.size(); }
    std::size_t max_length() const;
    /// At least one non-empty trajectory and every index in range.
    void require_valid(std::size_t n_states, std::size_t n_actions) const;
};

struct LikelihoodResult {
    /// (1/I) sum_i sum_t ln pi(a_t|s_t)
    prec_t value = 0.0;
    ValueFunction v;
    SoftPolicy policy;
    /// ln pi, computed from h directly so it stays finite for tiny probabilities
    numvec log_policy;
    /// kernel the policy was computed against (worst case, or nominal)
    Kernel kernel;
    /// adversary solutions behind the policy (q*, duals)
    RobustQTable table;
    Diagnostics diagnostics;
};

/**
 * Average log-likelihood of the demonstrations under the robust soft-optimal policy of `mdp`
 * (rewards already set). Inner accuracy xi = eps (1-gamma)^2 / (8 gamma^2 K) and residual
 * threshold 3 eps (1-gamma) / (8 gamma K), K the longest demonstration. u == nullptr uses the
 * nominal kernel. `initial` warm-starts value iteration.
 */
LikelihoodResult robust_log_likelihood(const Demonstrations& demos, const TabularMDP& mdp,
                                       const UncertaintySet* u, prec_t eta, prec_t epsilon,
                                       const ValueFunction* initial = nullptr,
                                       std::size_t max_iters = 1000000);

/**
 * d L / d theta with the worst-case kernel held at its optimum:
 * (1/(eta I)) sum_i sum_t [phi(s_t,a_t) + gamma E_{q(.|s_t,a_t)}[F] - F(s_t)],
 * F(s) the discounted feature expectation from s under pi and q.
 * For s-rectangular sets q* moves with theta even though the soft value does not feel it to first
 * order, so a term gamma V . dq*(.|s_t,a_t) is added, with dq* from the inner KKT system.
 * Pass `solved` to reuse a likelihood solve at the same theta.
 */
numvec irl_gradient(const Demonstrations& demos, const TabularMDP& mdp, const FeatureMap& features,
                    const numvec& theta, const UncertaintySet* u, prec_t eta,
                    prec_t epsilon = 1e-9, const LikelihoodResult* solved = nullptr);

/// Central finite differences of the likelihood with step `step`.
numvec irl_gradient_fd(const Demonstrations& demos, const TabularMDP& mdp,
                       const FeatureMap& features, const numvec& theta, const UncertaintySet* u,
                       prec_t eta, prec_t step = 1e-5, prec_t epsilon = 1e-10);

struct TrainOptions {
    prec_t learning_rate = 0.5;
    /// multiplicative step decay per iteration
    prec_t decay = 0.98;
    std::size_t iterations = 60;
    /// likelihood accuracy during training
    prec_t epsilon = 1e-4;
    std::uint64_t seed = 0;
};

struct TrainResult {
    numvec theta;
    /// likelihood at every iterate (including the final theta)
    numvec curve;
    numvec gradient_norms;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainResult history)
        : std::runtime_error(what), history(std::move(history)) {}
    TrainResult history;
};

/**
 * Gradient ascent on the (robust) likelihood from theta = 0. u == nullptr is plain MaxEnt.
 * The value function is carried between iterations as a warm start.
 */
TrainResult train_maxent(const Demonstrations& demos, const TabularMDP& mdp,
                         const FeatureMap& features, const UncertaintySet* u, prec_t eta,
                         const TrainOptions& opts = {});

/// Nominal soft-optimal policy for the reward theta . phi.
SoftPolicy learned_policy(const TabularMDP& mdp, const FeatureMap& features, const numvec& theta,
                          prec_t eta, prec_t epsilon = 1e-8);

struct EVD {
    /// max(raw, 0)
    prec_t value = 0.0;
    prec_t raw = 0.0;
};

/**
 * mean_s [V*(s) - V^pi(s)] with the rewards and nominal dynamics of `true_mdp`, both soft
 * values at the same eta.
 */
EVD expected_value_difference(const TabularMDP& true_mdp, const SoftPolicy& learned, prec_t eta,
                              prec_t epsilon = 1e-8);

} // namespace rermdp
