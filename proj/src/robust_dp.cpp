#include "rermdp/robust_dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rermdp {

std::string to_string(Rectangularity r) { return r == Rectangularity::SA ? "sa" : "s"; }

Rectangularity rectangularity_from_string(const std::string& name) {
    if (name == "sa" || name == "SA") return Rectangularity::SA;
    if (name == "s" || name == "S") return Rectangularity::S;
    throw std::invalid_argument("unknown rectangularity '" + name + "' (expected \"sa\" or \"s\")");
}

namespace {

numvec support_values(const SparseDist& dist, const ValueFunction& v) {
    numvec out(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) out[i] = v[dist.states[i]];
    return out;
}

/// Min of a linear objective over a bundle: bisection per block when the bundle is separable
/// relative entropy, otherwise the barrier solver. Total certified gap <= xi.
AdversarySolution solve_linear(const ConstraintBundle& bundle, const numvec& c, prec_t xi,
                               const numvec* warm_duals) {
    if (!bundle.separable_relative_entropy()) return worst_case_expectation_multi(bundle, c, xi);

    const std::size_t nb = bundle.block_sizes.size();
    const prec_t block_xi = xi / static_cast<prec_t>(nb);
    AdversarySolution total;
    total.q_bar.assign(bundle.n_variables(), 0.0);
    total.dual.assign(bundle.constraints.size(), 0.0);
    for (std::size_t j = 0; j < bundle.constraints.size(); ++j) {
        const KLBall& ball = bundle.constraints[j];
        const std::size_t b = nb == 1 ? 0 : ball.block;
        const std::size_t off = bundle.block_offset(b);
        const numvec values(c.begin() + static_cast<std::ptrdiff_t>(off),
                            c.begin() + static_cast<std::ptrdiff_t>(off + bundle.block_sizes[b]));
        std::optional<prec_t> warm;
        if (warm_duals && j < warm_duals->size() && std::isfinite((*warm_duals)[j]) &&
            (*warm_duals)[j] > 0.0)
            warm = (*warm_duals)[j];
        AdversarySolution part = worst_case_expectation_kl(ball.reference, ball.bound, values,
                                                           block_xi, warm);
        std::copy(part.q_bar.begin(), part.q_bar.end(),
                  total.q_bar.begin() + static_cast<std::ptrdiff_t>(off));
        total.value += part.value;
        total.gap += part.gap;
        total.dual[j] = part.dual.empty() ? 0.0 : part.dual[0];
        total.iterations += part.iterations;
    }
    return total;
}

void require_mode(const UncertaintySet& u, Rectangularity mode, const char* who) {
    if (u.rectangularity != mode)
        throw std::invalid_argument(std::string(who) + ": uncertainty set has rectangularity '" +
                                    to_string(u.rectangularity) + "'");
}

void check_inputs(const TabularMDP& mdp, const ValueFunction& v, prec_t eta, prec_t xi) {
    if (!(eta > 0.0)) throw std::invalid_argument("robust Bellman: eta must be > 0");
    if (!(xi > 0.0)) throw std::invalid_argument("robust Bellman: xi must be > 0");
    if (v.size() != mdp.n_states()) throw std::invalid_argument("robust Bellman: V size mismatch");
    for (prec_t x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("robust Bellman: non-finite V");
}

std::runtime_error cell_error(const std::string& what, std::size_t s, std::optional<std::size_t> a,
                              const std::exception& e) {
    std::string msg = what + " failed at s=" + std::to_string(s);
    if (a) msg += ", a=" + std::to_string(*a);
    msg += std::string(": ") + e.what();
    if (const auto* ce = dynamic_cast<const CertificateError*>(&e)) {
        char buf[48];
        std::snprintf(buf, sizeof buf, " (best gap %.3g)", ce->achieved_gap);
        msg += buf;
    }
    return std::runtime_error(msg);
}

/// S-rectangular update with optional log prior weights (KL anchor); log_prior empty = none.
BellmanResult bellman_s(const TabularMDP& mdp, const UncertaintySet& u, const ValueFunction& v,
                        prec_t eta, prec_t xi, const SoftPolicy* prior) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    BellmanResult res;
    res.value.assign(ns, 0.0);
    auto& t = res.table;
    t.rectangularity = Rectangularity::S;
    t.n_actions = na;
    t.h.assign(ns * na, 0.0);
    t.q_star.resize(ns);
    t.duals.resize(ns);
    t.gaps.assign(ns, 0.0);

    for (std::size_t s = 0; s < ns; ++s) {
        const ConstraintBundle& bundle = u.cells[s];
        ExponentialObjective obj;
        obj.eta = eta;
        obj.offsets.resize(na);
        for (std::size_t a = 0; a < na; ++a) {
            obj.offsets[a] = mdp.reward(s, a);
            if (prior) obj.offsets[a] += eta * std::log((*prior)(s, a));
            const SparseDist& d = mdp.nominal(s, a);
            for (std::size_t i = 0; i < d.size(); ++i)
                obj.weights.push_back(mdp.gamma() * v[d.states[i]]);
        }
        if (mdp.gamma() == 0.0) {
            numvec q;
            for (std::size_t a = 0; a < na; ++a) {
                const auto& p = mdp.nominal(s, a).probabilities;
                q.insert(q.end(), p.begin(), p.end());
            }
            t.q_star[s] = std::move(q);
            for (std::size_t a = 0; a < na; ++a) t.h[s * na + a] = mdp.reward(s, a);
            res.value[s] = log_sum_exp(obj.offsets, eta);
            continue;
        }
        AdversarySolution sol;
        try {
            sol = worst_case_exponential_s(bundle, obj, xi);
        } catch (const std::exception& e) {
            throw cell_error("s-rectangular adversary", s, std::nullopt, e);
        }
        std::size_t pos = 0;
        for (std::size_t a = 0; a < na; ++a) {
            const SparseDist& d = mdp.nominal(s, a);
            prec_t expect = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i, ++pos) expect += sol.q_bar[pos] * v[d.states[i]];
            t.h[s * na + a] = mdp.reward(s, a) + mdp.gamma() * expect;
        }
        res.value[s] = sol.value;
        t.q_star[s] = std::move(sol.q_bar);
        t.duals[s] = std::move(sol.dual);
        t.gaps[s] = sol.gap;
    }
    return res;
}

} // namespace

prec_t value_accuracy_xi(prec_t epsilon, prec_t gamma) {
    if (gamma <= 0.0) return 0.0;
    return epsilon * (1.0 - gamma) * (1.0 - gamma) / (4.0 * gamma);
}

void UncertaintySet::require_compatible(const TabularMDP& mdp) const {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const std::size_t expected = rectangularity == Rectangularity::SA ? ns * na : ns;
    if (cells.size() != expected)
        throw std::invalid_argument("uncertainty set: expected " + std::to_string(expected) +
                                    " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const ConstraintBundle& bundle = cells[c];
        try {
            bundle.require_well_formed();
            if (rectangularity == Rectangularity::SA) {
                if (bundle.block_sizes.size() != 1 ||
                    bundle.block_sizes[0] != mdp.kernel()[c].size())
                    throw std::invalid_argument("cell support does not match the nominal support");
            } else {
                if (bundle.block_sizes.size() != na)
                    throw std::invalid_argument("s-rectangular cell needs one block per action");
                for (std::size_t a = 0; a < na; ++a)
                    if (bundle.block_sizes[a] != mdp.nominal(c, a).size())
                        throw std::invalid_argument("block support does not match the nominal support");
            }
            // singleton constraints (radius 0) are exempt from the Slater check
            bool has_singleton = false;
            for (const auto& ball : bundle.constraints)
                has_singleton |= (ball.kind == KLKind::relative_entropy && ball.bound == 0.0) ||
                                 (ball.kind == KLKind::likelihood &&
                                  ball.bound >= ball.max_likelihood() - 1e-14);
            if (!has_singleton && !slater_point(bundle))
                throw std::invalid_argument("cell is not Slater-feasible");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("uncertainty set cell " + std::to_string(c) + ": " + e.what());
        }
    }
}

prec_t UncertaintySet::max_radius() const {
    prec_t r = 0.0;
    for (const auto& cell : cells)
        for (const auto& ball : cell.constraints)
            if (ball.kind == KLKind::relative_entropy) r = std::max(r, ball.bound);
    return r;
}

UncertaintySet UncertaintySet::kl_sa(const TabularMDP& mdp, prec_t beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("kl_sa: radius must be >= 0");
    UncertaintySet u;
    u.rectangularity = Rectangularity::SA;
    u.cells.reserve(mdp.kernel().size());
    for (const auto& d : mdp.kernel()) u.cells.push_back(ConstraintBundle::kl_ball(d.probabilities, beta));
    return u;
}

UncertaintySet UncertaintySet::kl_s(const TabularMDP& mdp, prec_t beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("kl_s: radius must be >= 0");
    UncertaintySet u;
    u.rectangularity = Rectangularity::S;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        ConstraintBundle bundle;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const SparseDist& d = mdp.nominal(s, a);
            bundle.block_sizes.push_back(d.size());
            bundle.constraints.push_back({KLKind::relative_entropy, d.probabilities, beta, a});
        }
        u.cells.push_back(std::move(bundle));
    }
    return u;
}

prec_t RobustQTable::max_gap() const {
    prec_t g = 0.0;
    for (prec_t x : gaps) g = std::max(g, x);
    return g;
}

Kernel RobustQTable::kernel(const TabularMDP& mdp) const {
    Kernel k(mdp.n_states() * mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        std::size_t pos = 0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const std::size_t c = mdp.cell(s, a);
            const SparseDist& nominal = mdp.kernel()[c];
            SparseDist& out = k[c];
            out.states = nominal.states;
            if (rectangularity == Rectangularity::SA) {
                out.probabilities = q_star[c];
            } else {
                out.probabilities.assign(q_star[s].begin() + static_cast<std::ptrdiff_t>(pos),
                                         q_star[s].begin() + static_cast<std::ptrdiff_t>(pos + nominal.size()));
                pos += nominal.size();
            }
        }
    }
    return k;
}

BellmanResult robust_soft_bellman_sa(const TabularMDP& mdp, const UncertaintySet& u,
                                     const ValueFunction& v, prec_t eta, prec_t xi,
                                     const BellmanOptions& opts) {
    require_mode(u, Rectangularity::SA, "robust_soft_bellman_sa");
    check_inputs(mdp, v, eta, xi);
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    BellmanResult res;
    res.value.assign(ns, 0.0);
    auto& t = res.table;
    t.rectangularity = Rectangularity::SA;
    t.n_actions = na;
    t.h.assign(ns * na, 0.0);
    t.q_star.resize(ns * na);
    t.duals.resize(ns * na);
    t.gaps.assign(ns * na, 0.0);
    const bool use_warm = opts.warm && opts.warm->rectangularity == Rectangularity::SA &&
                          opts.warm->duals.size() == ns * na;

    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t a = 0; a < na; ++a) {
            const std::size_t c = mdp.cell(s, a);
            const SparseDist& d = mdp.kernel()[c];
            if (mdp.gamma() == 0.0) {
                t.h[c] = mdp.rewards()[c];
                t.q_star[c] = d.probabilities;
                continue;
            }
            AdversarySolution sol;
            try {
                sol = solve_linear(u.cells[c], support_values(d, v), xi,
                                   use_warm ? &opts.warm->duals[c] : nullptr);
            } catch (const std::exception& e) {
                throw cell_error("adversary", s, a, e);
            }
            prec_t worst = sol.value;
            if (opts.injected_error) worst += opts.injected_error(c);
            t.h[c] = mdp.rewards()[c] + mdp.gamma() * worst;
            t.q_star[c] = std::move(sol.q_bar);
            t.duals[c] = std::move(sol.dual);
            t.gaps[c] = sol.gap;
        }
        res.value[s] = log_sum_exp(std::span<const prec_t>(t.h.data() + s * na, na), eta);
    }
    return res;
}

BellmanResult robust_soft_bellman_s(const TabularMDP& mdp, const UncertaintySet& u,
                                    const ValueFunction& v, prec_t eta, prec_t xi,
                                    const BellmanOptions&) {
    require_mode(u, Rectangularity::S, "robust_soft_bellman_s");
    check_inputs(mdp, v, eta, xi);
    return bellman_s(mdp, u, v, eta, xi, nullptr);
}

BellmanResult robust_soft_bellman(const TabularMDP& mdp, const UncertaintySet& u,
                                  const ValueFunction& v, prec_t eta, prec_t xi,
                                  const BellmanOptions& opts) {
    return u.rectangularity == Rectangularity::SA ? robust_soft_bellman_sa(mdp, u, v, eta, xi, opts)
                                                  : robust_soft_bellman_s(mdp, u, v, eta, xi, opts);
}

ErrorBounds error_bounds(prec_t xi, prec_t gamma, std::optional<std::size_t> n, prec_t eta,
                               prec_t epsilon) {
    ErrorBounds b;
    const prec_t tail = n ? 1.0 - std::pow(gamma, static_cast<prec_t>(*n)) : 1.0;
    b.accumulated_error = xi * gamma * tail / (1.0 - gamma);
    b.max_inner_accuracy = gamma > 0.0 ? value_accuracy_xi(epsilon, gamma)
                                       : std::numeric_limits<prec_t>::infinity();
    b.stop_threshold = 3.0 * epsilon * (1.0 - gamma) / 4.0;
    b.policy_error = std::expm1(2.0 * (epsilon + xi) / eta);
    return b;
}

namespace {

// Residual level that sweeps with per-cell error `gap` can be relied on to reach. Only
// applies once the adversary certified less than the requested xi.
prec_t noise_threshold(prec_t gap, prec_t xi, prec_t gamma) {
    return gap > xi && gamma < 1.0 ? 4.0 * gap / (1.0 - gamma) : 0.0;
}

} // namespace

RobustSolution robust_value_iteration(const TabularMDP& mdp, const UncertaintySet& u, prec_t eta,
                                      prec_t xi, prec_t stop_threshold, std::size_t max_iters,
                                      const ValueFunction* initial) {
    mdp.require_valid();
    if (!(eta > 0.0)) throw std::invalid_argument("robust_value_iteration: eta must be > 0");
    if (!(xi > 0.0)) throw std::invalid_argument("robust_value_iteration: xi must be > 0");
    if (max_iters == 0) throw std::invalid_argument("robust_value_iteration: max_iters must be > 0");
    u.require_compatible(mdp);

    RobustSolution sol;
    auto& diag = sol.diagnostics;
    diag.eta = eta;
    diag.gamma = mdp.gamma();
    diag.xi = xi;
    diag.stop_threshold = stop_threshold;

    ValueFunction v = initial ? *initial : ValueFunction(mdp.n_states(), 0.0);
    if (v.size() != mdp.n_states()) throw std::invalid_argument("initial value size mismatch");
    RobustQTable previous;
    bool have_previous = false;
    for (std::size_t it = 0; it < max_iters; ++it) {
        BellmanOptions opts;
        if (have_previous) opts.warm = &previous;
        BellmanResult step = robust_soft_bellman(mdp, u, v, eta, xi, opts);
        const prec_t residual = sup_norm_diff(step.value, v);
        v = std::move(step.value);
        previous = std::move(step.table);
        have_previous = true;
        diag.residuals.push_back(residual);
        diag.iterations = it + 1;
        diag.max_adversary_gap = std::max(diag.max_adversary_gap, previous.max_gap());
        const prec_t floor = noise_threshold(diag.max_adversary_gap, xi, mdp.gamma());
        if (floor > stop_threshold) diag.bounds["noise_stop_threshold"] = floor;
        if (residual <= std::max(stop_threshold, floor) || mdp.gamma() == 0.0) {
            BellmanOptions final_opts;
            final_opts.warm = &previous;
            BellmanResult at_v = robust_soft_bellman(mdp, u, v, eta, xi, final_opts);
            diag.max_adversary_gap = std::max(diag.max_adversary_gap, at_v.table.max_gap());
            sol.policy = softmax_policy(mdp.n_states(), mdp.n_actions(), at_v.table.h, eta);
            sol.table = std::move(at_v.table);
            sol.value = std::move(v);
            diag.bounds["accumulated_error"] =
                error_bounds(std::max(xi, diag.max_adversary_gap), mdp.gamma(), diag.iterations, eta, 0.0)
                    .accumulated_error;
            return sol;
        }
    }
    throw ConvergenceError("robust_value_iteration: no convergence within max_iters",
                           diag.last_residual(), max_iters);
}

RobustSolution robust_value_iteration(const TabularMDP& mdp, const UncertaintySet& u,
                                      const SolverConfig& cfg) {
    cfg.require_valid();
    const prec_t gamma = mdp.gamma();
    const prec_t xi = gamma > 0.0 ? value_accuracy_xi(cfg.epsilon, gamma) : cfg.epsilon;
    const prec_t threshold = 3.0 * cfg.epsilon * (1.0 - gamma) / 4.0;
    RobustSolution sol = robust_value_iteration(mdp, u, cfg.eta, xi, threshold, cfg.max_iters);
    sol.diagnostics.epsilon = cfg.epsilon;
    const prec_t achieved = std::max(xi, sol.diagnostics.max_adversary_gap);
    const auto b = error_bounds(achieved, gamma, sol.diagnostics.iterations, cfg.eta, cfg.epsilon);
    sol.diagnostics.bounds["max_inner_accuracy"] = b.max_inner_accuracy;
    sol.diagnostics.bounds["policy_error"] = b.policy_error;
    return sol;
}

std::pair<SoftPolicy, RobustQTable> extract_policy(const TabularMDP& mdp, const UncertaintySet& u,
                                                   const ValueFunction& v, prec_t eta, prec_t xi) {
    BellmanResult r = robust_soft_bellman(mdp, u, v, eta, xi);
    SoftPolicy pi = softmax_policy(mdp.n_states(), mdp.n_actions(), r.table.h, eta);
    return {std::move(pi), std::move(r.table)};
}

RobustSolution solve_robust_policy(const TabularMDP& mdp, const UncertaintySet& u,
                                   const SolverConfig& cfg) {
    cfg.require_valid();
    const prec_t gamma = mdp.gamma();
    const prec_t log_eps = std::log1p(cfg.epsilon);
    const prec_t xi = gamma > 0.0 ? log_eps * (1.0 - gamma) * (1.0 - gamma) / (8.0 * gamma)
                                  : cfg.epsilon;
    const prec_t threshold = 3.0 * log_eps * (1.0 - gamma) / 8.0;
    RobustSolution sol = robust_value_iteration(mdp, u, cfg.eta, xi, threshold, cfg.max_iters);
    sol.diagnostics.epsilon = cfg.epsilon;
    // the value is within ln(eps+1)/2 of V*, so the policy error bound uses that accuracy
    const prec_t achieved = std::max(xi, sol.diagnostics.max_adversary_gap);
    sol.diagnostics.bounds["policy_error"] = std::expm1(2.0 * (0.5 * log_eps + achieved) / cfg.eta);
    return sol;
}

ValueFunction robust_policy_backup(const TabularMDP& mdp, const UncertaintySet& u,
                                   const SoftPolicy& pi, const ValueFunction& v,
                                   prec_t entropy_weight, prec_t xi, prec_t* max_gap) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    if (pi.n_states() != ns || pi.n_actions() != na)
        throw std::invalid_argument("robust_policy_backup: policy shape mismatch");
    ValueFunction out(ns, 0.0);
    prec_t worst_gap = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
        prec_t total = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
            const prec_t p = pi(s, a);
            if (p > 0.0) total += p * (mdp.reward(s, a) - entropy_weight * std::log(p));
        }
        if (mdp.gamma() > 0.0) {
            if (u.rectangularity == Rectangularity::SA) {
                for (std::size_t a = 0; a < na; ++a) {
                    const prec_t p = pi(s, a);
                    if (p <= 0.0) continue;
                    const std::size_t c = mdp.cell(s, a);
                    AdversarySolution sol;
                    try {
                        sol = solve_linear(u.cells[c], support_values(mdp.kernel()[c], v), xi, nullptr);
                    } catch (const std::exception& e) {
                        throw cell_error("adversary", s, a, e);
                    }
                    total += p * mdp.gamma() * sol.value;
                    worst_gap = std::max(worst_gap, sol.gap);
                }
            } else {
                numvec c;
                for (std::size_t a = 0; a < na; ++a) {
                    const SparseDist& d = mdp.nominal(s, a);
                    for (std::size_t i = 0; i < d.size(); ++i)
                        c.push_back(pi(s, a) * mdp.gamma() * v[d.states[i]]);
                }
                AdversarySolution sol;
                try {
                    sol = solve_linear(u.cells[s], c, xi, nullptr);
                } catch (const std::exception& e) {
                    throw cell_error("adversary", s, std::nullopt, e);
                }
                total += sol.value;
                worst_gap = std::max(worst_gap, sol.gap);
            }
        }
        out[s] = total;
    }
    if (max_gap) *max_gap = std::max(*max_gap, worst_gap);
    return out;
}

ValueFunction robust_policy_evaluation(const TabularMDP& mdp, const UncertaintySet& u,
                                       const SoftPolicy& pi, prec_t eta, prec_t epsilon,
                                       std::optional<prec_t> xi, std::size_t max_iters) {
    mdp.require_valid();
    u.require_compatible(mdp);
    pi.require_valid();
    if (!(eta >= 0.0)) throw std::invalid_argument("robust_policy_evaluation: eta must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("robust_policy_evaluation: epsilon must be > 0");
    const prec_t gamma = mdp.gamma();
    const prec_t inner = xi ? *xi : (gamma > 0.0 ? value_accuracy_xi(epsilon, gamma) : epsilon);
    if (!(inner > 0.0)) throw std::invalid_argument("robust_policy_evaluation: xi must be > 0");
    const prec_t threshold = 3.0 * epsilon * (1.0 - gamma) / 4.0;

    ValueFunction v(mdp.n_states(), 0.0);
    prec_t residual = 0.0, worst_gap = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        prec_t gap = 0.0;
        ValueFunction next = robust_policy_backup(mdp, u, pi, v, eta, inner, &gap);
        worst_gap = std::max(worst_gap, gap);
        residual = sup_norm_diff(next, v);
        v = std::move(next);
        if (residual <= std::max(threshold, noise_threshold(worst_gap, inner, gamma)) || gamma == 0.0) return v;
    }
    throw ConvergenceError("robust_policy_evaluation: no convergence", residual, max_iters);
}

PenalizedUpdate kl_penalized_robust_bellman(const TabularMDP& mdp, const UncertaintySet& u,
                                            const ValueFunction& v, const SoftPolicy& pi_bar,
                                            prec_t eta, prec_t xi) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    if (pi_bar.n_states() != ns || pi_bar.n_actions() != na)
        throw std::invalid_argument("kl_penalized_robust_bellman: policy shape mismatch");
    for (prec_t p : pi_bar.data())
        if (!(p > 0.0)) throw std::invalid_argument("kl_penalized_robust_bellman: pi_bar must be strictly positive");
    check_inputs(mdp, v, eta, xi);

    PenalizedUpdate out;
    out.policy = SoftPolicy(ns, na);
    out.value.assign(ns, 0.0);
    if (u.rectangularity == Rectangularity::SA) {
        BellmanResult r = robust_soft_bellman_sa(mdp, u, v, eta, xi);
        for (std::size_t s = 0; s < ns; ++s) {
            const std::span<const prec_t> h(r.table.h.data() + s * na, na);
            const std::span<const prec_t> prior(pi_bar.data().data() + s * na, na);
            numvec shifted(na);
            for (std::size_t a = 0; a < na; ++a) shifted[a] = h[a] + eta * std::log(prior[a]);
            out.value[s] = log_sum_exp(shifted, eta);
            const numvec row = softmax(h, prior, eta);
            for (std::size_t a = 0; a < na; ++a) out.policy(s, a) = row[a];
        }
        out.table = std::move(r.table);
    } else {
        BellmanResult r = bellman_s(mdp, u, v, eta, xi, &pi_bar);
        for (std::size_t s = 0; s < ns; ++s) {
            const numvec row = softmax(std::span<const prec_t>(r.table.h.data() + s * na, na),
                                       std::span<const prec_t>(pi_bar.data().data() + s * na, na), eta);
            for (std::size_t a = 0; a < na; ++a) out.policy(s, a) = row[a];
        }
        out.value = std::move(r.value);
        out.table = std::move(r.table);
    }
    return out;
}

MPISolution robust_modified_policy_iteration(const TabularMDP& mdp, const UncertaintySet& u,
                                             prec_t eta, std::size_t m, const SolverConfig& cfg,
                                             prec_t policy_tol) {
    mdp.require_valid();
    cfg.require_valid();
    u.require_compatible(mdp);
    if (m == 0) throw std::invalid_argument("robust_modified_policy_iteration: m must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("robust_modified_policy_iteration: eta must be > 0");
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const prec_t gamma = mdp.gamma();
    const prec_t xi = gamma > 0.0 ? value_accuracy_xi(cfg.epsilon, gamma) : cfg.epsilon;

    MPISolution sol;
    sol.policy = SoftPolicy::uniform(ns, na);
    sol.value.assign(ns, 0.0);
    auto& diag = sol.diagnostics;
    diag.eta = eta;
    diag.gamma = gamma;
    diag.epsilon = cfg.epsilon;
    diag.xi = xi;
    diag.stop_threshold = policy_tol;
    diag.bounds["greedy_policy_error"] = std::expm1(2.0 * xi / eta);
    diag.bounds["evaluation_error"] =
        error_bounds(xi, gamma, m, eta, cfg.epsilon).accumulated_error;

    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        PenalizedUpdate greedy = kl_penalized_robust_bellman(mdp, u, sol.value, sol.policy, eta, xi);
        diag.max_adversary_gap = std::max(diag.max_adversary_gap, greedy.table.max_gap());
        ValueFunction v = sol.value;
        for (std::size_t j = 0; j < m; ++j)
            v = robust_policy_backup(mdp, u, greedy.policy, v, 0.0, xi, &diag.max_adversary_gap);
        const prec_t change = greedy.policy.distance(sol.policy);
        diag.residuals.push_back(change);
        diag.iterations = k + 1;
        sol.policy = std::move(greedy.policy);
        sol.value = std::move(v);
        if (change <= policy_tol) return sol;
    }
    throw ConvergenceError("robust_modified_policy_iteration: policy did not stabilize",
                           diag.last_residual(), cfg.max_iters);
}

} // namespace rermdp
