#include "rermdp/soft_dp.hpp"

#include <algorithm>
#include <cmath>

namespace rermdp {

prec_t log_sum_exp(std::span<const prec_t> x, prec_t eta) {
    if (x.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const prec_t shift = *std::max_element(x.begin(), x.end());
    prec_t total = 0.0;
    for (prec_t xi : x) total += std::exp((xi - shift) / eta);
    return shift + eta * std::log(total);
}

numvec softmax(std::span<const prec_t> x, prec_t eta) {
    if (x.empty()) throw std::invalid_argument("softmax: empty input");
    const prec_t shift = *std::max_element(x.begin(), x.end());
    numvec out(x.size());
    prec_t total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp((x[i] - shift) / eta);
        total += out[i];
    }
    for (auto& o : out) o /= total;
    return out;
}

numvec softmax(std::span<const prec_t> x, std::span<const prec_t> weights, prec_t eta) {
    if (x.size() != weights.size()) throw std::invalid_argument("softmax: weight size mismatch");
    numvec shifted(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + eta * std::log(weights[i]);
    return softmax(shifted, eta);
}

numvec q_values(const TabularMDP& mdp, const Kernel& kernel, const ValueFunction& v) {
    if (v.size() != mdp.n_states()) throw std::invalid_argument("value function size mismatch");
    numvec h(mdp.n_states() * mdp.n_actions());
    for (std::size_t c = 0; c < h.size(); ++c)
        h[c] = mdp.rewards()[c] + mdp.gamma() * kernel[c].expectation(v);
    return h;
}

numvec nominal_q_values(const TabularMDP& mdp, const ValueFunction& v) {
    return q_values(mdp, mdp.kernel(), v);
}

ValueFunction soft_bellman(const TabularMDP& mdp, const ValueFunction& v, prec_t eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("soft_bellman: eta must be positive");
    const numvec h = nominal_q_values(mdp, v);
    const std::size_t na = mdp.n_actions();
    ValueFunction out(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        out[s] = log_sum_exp(std::span<const prec_t>(h.data() + s * na, na), eta);
    return out;
}

ValueFunction hard_bellman(const TabularMDP& mdp, const ValueFunction& v) {
    const numvec h = nominal_q_values(mdp, v);
    const std::size_t na = mdp.n_actions();
    ValueFunction out(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        out[s] = *std::max_element(h.begin() + s * na, h.begin() + (s + 1) * na);
    return out;
}

SoftPolicy softmax_policy(std::size_t n_states, std::size_t n_actions, const numvec& h,
                          prec_t eta) {
    SoftPolicy pi(n_states, n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        const numvec row = softmax(std::span<const prec_t>(h.data() + s * n_actions, n_actions), eta);
        for (std::size_t a = 0; a < n_actions; ++a) pi(s, a) = row[a];
    }
    return pi;
}

SoftSolution soft_value_iteration(const TabularMDP& mdp, const SolverConfig& cfg) {
    mdp.require_valid();
    cfg.require_valid();
    const prec_t gamma = mdp.gamma();
    const prec_t threshold =
        gamma > 0.0 ? cfg.epsilon * (1.0 - gamma) / gamma : std::numeric_limits<prec_t>::infinity();

    SoftSolution sol;
    sol.diagnostics.eta = cfg.eta;
    sol.diagnostics.gamma = gamma;
    sol.diagnostics.epsilon = cfg.epsilon;
    sol.diagnostics.stop_threshold = threshold;

    ValueFunction v(mdp.n_states(), 0.0);
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        ValueFunction next = soft_bellman(mdp, v, cfg.eta);
        const prec_t residual = sup_norm_diff(next, v);
        v = std::move(next);
        sol.diagnostics.residuals.push_back(residual);
        sol.diagnostics.iterations = it + 1;
        if (residual <= threshold) {
            sol.value = v;
            sol.policy = softmax_policy(mdp.n_states(), mdp.n_actions(), nominal_q_values(mdp, v),
                                        cfg.eta);
            return sol;
        }
    }
    throw ConvergenceError("soft_value_iteration: no convergence within max_iters",
                           sol.diagnostics.last_residual(), cfg.max_iters);
}

namespace {

ValueFunction policy_backup(const TabularMDP& mdp, const Kernel& kernel, const SoftPolicy& pi,
                            const ValueFunction& v, prec_t eta) {
    ValueFunction out(mdp.n_states(), 0.0);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        prec_t total = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const prec_t p = pi(s, a);
            if (p <= 0.0) continue;
            const std::size_t c = mdp.cell(s, a);
            total += p * (mdp.rewards()[c] - eta * std::log(p) +
                          mdp.gamma() * kernel[c].expectation(v));
        }
        out[s] = total;
    }
    return out;
}

void check_policy_shape(const TabularMDP& mdp, const SoftPolicy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    pi.require_valid();
}

} // namespace

ValueFunction soft_policy_evaluation(const TabularMDP& mdp, const Kernel& kernel,
                                     const SoftPolicy& pi, prec_t eta, prec_t epsilon,
                                     std::size_t max_iters) {
    mdp.require_valid();
    check_policy_shape(mdp, pi);
    if (!(eta >= 0.0)) throw std::invalid_argument("soft_policy_evaluation: eta must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("soft_policy_evaluation: epsilon must be > 0");
    const prec_t gamma = mdp.gamma();
    const prec_t threshold =
        gamma > 0.0 ? epsilon * (1.0 - gamma) / gamma : std::numeric_limits<prec_t>::infinity();

    ValueFunction v(mdp.n_states(), 0.0);
    prec_t residual = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        ValueFunction next = policy_backup(mdp, kernel, pi, v, eta);
        residual = sup_norm_diff(next, v);
        v = std::move(next);
        if (residual <= threshold) return v;
    }
    throw ConvergenceError("soft_policy_evaluation: no convergence", residual, max_iters);
}

ValueFunction soft_policy_evaluation(const TabularMDP& mdp, const SoftPolicy& pi, prec_t eta,
                                     prec_t epsilon, std::size_t max_iters) {
    return soft_policy_evaluation(mdp, mdp.kernel(), pi, eta, epsilon, max_iters);
}

std::size_t sample_index(std::span<const prec_t> probabilities, std::mt19937_64& rng) {
    const prec_t u = uniform01(rng);
    prec_t cumulative = 0.0;
    std::size_t last_positive = probabilities.size();
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] <= 0.0) continue;
        last_positive = i;
        cumulative += probabilities[i];
        if (u < cumulative) return i;
    }
    if (last_positive == probabilities.size())
        throw std::invalid_argument("sample_index: no positive probability");
    // rounding left u above the cumulative total
    return last_positive;
}

Trajectory sample_trajectory(const TabularMDP& mdp, const SoftPolicy& pi, std::size_t s0,
                             std::size_t length, std::mt19937_64& rng, const Kernel* kernel) {
    check_policy_shape(mdp, pi);
    if (length == 0) throw std::invalid_argument("sample_trajectory: length must be >= 1");
    if (s0 >= mdp.n_states()) throw std::invalid_argument("sample_trajectory: start out of range");
    const Kernel& k = kernel ? *kernel : mdp.kernel();
    const std::size_t na = mdp.n_actions();

    Trajectory traj;
    traj.steps.reserve(length);
    std::size_t s = s0;
    for (std::size_t t = 0; t < length; ++t) {
        const std::size_t a =
            sample_index(std::span<const prec_t>(pi.data().data() + s * na, na), rng);
        traj.steps.push_back({s, a});
        if (t + 1 == length) break;
        const SparseDist& next = k[mdp.cell(s, a)];
        s = next.states[sample_index(next.probabilities, rng)];
    }
    return traj;
}

numvec discounted_visitation(const TabularMDP& mdp, const SoftPolicy& pi, const numvec& start,
                             prec_t epsilon, const Kernel* kernel) {
    check_policy_shape(mdp, pi);
    if (start.size() != mdp.n_states())
        throw std::invalid_argument("discounted_visitation: start size mismatch");
    if (!(epsilon > 0.0)) throw std::invalid_argument("discounted_visitation: epsilon must be > 0");
    const Kernel& k = kernel ? *kernel : mdp.kernel();
    const prec_t gamma = mdp.gamma();

    prec_t mass = 0.0;
    for (prec_t x : start) {
        if (x < 0.0) throw std::invalid_argument("discounted_visitation: negative start weight");
        mass += x;
    }

    numvec d = start;
    numvec current = start;
    numvec next(mdp.n_states());
    prec_t discount = 1.0;
    constexpr std::size_t max_steps = 10000000;
    for (std::size_t t = 0; t < max_steps; ++t) {
        discount *= gamma;
        if (mass * discount / (1.0 - gamma) <= epsilon) return d;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            if (current[s] == 0.0) continue;
            for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
                const prec_t w = gamma * current[s] * pi(s, a);
                if (w == 0.0) continue;
                const SparseDist& dist = k[mdp.cell(s, a)];
                for (std::size_t i = 0; i < dist.size(); ++i)
                    next[dist.states[i]] += w * dist.probabilities[i];
            }
        }
        current.swap(next);
        for (std::size_t s = 0; s < d.size(); ++s) d[s] += current[s];
    }
    throw ConvergenceError("discounted_visitation: no convergence", mass * discount / (1.0 - gamma),
                           max_steps);
}

MPISolution modified_policy_iteration(const TabularMDP& mdp, prec_t eta, std::size_t m,
                                      const SolverConfig& cfg, prec_t policy_tol) {
    mdp.require_valid();
    cfg.require_valid();
    if (m == 0) throw std::invalid_argument("modified_policy_iteration: m must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("modified_policy_iteration: eta must be > 0");
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();

    MPISolution sol;
    sol.policy = SoftPolicy::uniform(ns, na);
    sol.value.assign(ns, 0.0);
    auto& diag = sol.diagnostics;
    diag.eta = eta;
    diag.gamma = mdp.gamma();
    diag.epsilon = cfg.epsilon;
    diag.stop_threshold = policy_tol;
    diag.bounds["greedy_policy_error"] = 0.0;
    diag.bounds["evaluation_error"] = 0.0;

    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        const numvec h = nominal_q_values(mdp, sol.value);
        SoftPolicy next(ns, na);
        for (std::size_t s = 0; s < ns; ++s) {
            const numvec row =
                softmax(std::span<const prec_t>(h.data() + s * na, na),
                        std::span<const prec_t>(sol.policy.data().data() + s * na, na), eta);
            for (std::size_t a = 0; a < na; ++a) next(s, a) = row[a];
        }
        ValueFunction v = sol.value;
        for (std::size_t j = 0; j < m; ++j) v = policy_backup(mdp, mdp.kernel(), next, v, 0.0);

        const prec_t change = next.distance(sol.policy);
        diag.residuals.push_back(change);
        diag.iterations = k + 1;
        sol.policy = std::move(next);
        sol.value = std::move(v);
        if (change <= policy_tol) return sol;
    }
    throw ConvergenceError("modified_policy_iteration: policy did not stabilize",
                           diag.last_residual(), cfg.max_iters);
}

} // namespace rermdp
