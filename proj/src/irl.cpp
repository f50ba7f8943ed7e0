#include "rermdp/irl.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace rermdp {

FeatureMap::FeatureMap(std::size_t n_states, std::size_t n_actions, std::size_t dim, numvec phi)
    : n_states_(n_states), n_actions_(n_actions), dim_(dim), phi_(std::move(phi)) {
    require_valid();
}

FeatureMap FeatureMap::state_only(std::size_t n_actions, const std::vector<numvec>& per_state) {
    if (per_state.empty()) throw std::invalid_argument("FeatureMap: no states");
    const std::size_t dim = per_state.front().size();
    numvec phi;
    phi.reserve(per_state.size() * n_actions * dim);
    for (const auto& row : per_state) {
        if (row.size() != dim) throw std::invalid_argument("FeatureMap: inconsistent feature dimension");
        for (std::size_t a = 0; a < n_actions; ++a) phi.insert(phi.end(), row.begin(), row.end());
    }
    return FeatureMap(per_state.size(), n_actions, dim, std::move(phi));
}

numvec FeatureMap::rewards(const numvec& theta) const {
    if (theta.size() != dim_) throw std::invalid_argument("FeatureMap: theta has wrong dimension");
    numvec r(n_states_ * n_actions_, 0.0);
    for (std::size_t c = 0; c < r.size(); ++c) {
        prec_t acc = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) acc += theta[k] * phi_[c * dim_ + k];
        r[c] = acc;
    }
    return r;
}

void FeatureMap::require_valid() const {
    if (n_states_ == 0 || n_actions_ == 0 || dim_ == 0)
        throw std::invalid_argument("FeatureMap: empty shape");
    if (phi_.size() != n_states_ * n_actions_ * dim_)
        throw std::invalid_argument("FeatureMap: table size does not match n_states * n_actions * dim");
    for (prec_t x : phi_)
        if (!std::isfinite(x)) throw std::invalid_argument("FeatureMap: non-finite feature");
}

void FeatureMap::require_compatible(const TabularMDP& mdp) const {
    if (mdp.n_states() != n_states_ || mdp.n_actions() != n_actions_)
        throw std::invalid_argument("FeatureMap: shape does not match the MDP");
}

std::size_t Demonstrations::max_length() const {
    std::size_t k = 0;
    for (const auto& t : trajectories) k = std::max(k, t.length());
    return k;
}

void Demonstrations::require_valid(std::size_t n_states, std::size_t n_actions) const {
    if (trajectories.empty()) throw std::invalid_argument("demonstrations: no trajectories");
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        if (trajectories[i].steps.empty())
            throw std::invalid_argument("demonstrations: trajectory " + std::to_string(i) + " is empty");
        for (const Step& st : trajectories[i].steps)
            if (st.state >= n_states || st.action >= n_actions)
                throw std::invalid_argument("demonstrations: trajectory " + std::to_string(i) +
                                            " has an index out of range");
    }
}

LikelihoodResult robust_log_likelihood(const Demonstrations& demos, const TabularMDP& mdp,
                                       const UncertaintySet* u, prec_t eta, prec_t epsilon,
                                       const ValueFunction* initial, std::size_t max_iters) {
    mdp.require_valid();
    demos.require_valid(mdp.n_states(), mdp.n_actions());
    if (!(eta > 0.0)) throw std::invalid_argument("robust_log_likelihood: eta must be > 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("robust_log_likelihood: epsilon must be > 0");

    const UncertaintySet nominal = u ? UncertaintySet{} : UncertaintySet::nominal(mdp);
    const UncertaintySet& set = u ? *u : nominal;

    const prec_t gamma = mdp.gamma();
    const prec_t k = static_cast<prec_t>(demos.max_length());
    prec_t xi = epsilon, threshold = std::numeric_limits<prec_t>::infinity();
    if (gamma > 0.0) {
        xi = epsilon * (1.0 - gamma) * (1.0 - gamma) / (8.0 * gamma * gamma * k);
        threshold = 3.0 * epsilon * (1.0 - gamma) / (8.0 * gamma * k);
    }
    RobustSolution sol = robust_value_iteration(mdp, set, eta, xi, threshold, max_iters, initial);

    LikelihoodResult out;
    out.v = std::move(sol.value);
    out.policy = std::move(sol.policy);
    out.kernel = sol.table.kernel(mdp);
    out.table = std::move(sol.table);
    out.diagnostics = std::move(sol.diagnostics);
    out.diagnostics.epsilon = epsilon;

    const std::size_t na = mdp.n_actions();
    out.log_policy.resize(out.table.h.size());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const std::span<const prec_t> h(out.table.h.data() + s * na, na);
        const prec_t lse = log_sum_exp(h, eta);
        for (std::size_t a = 0; a < na; ++a) out.log_policy[s * na + a] = (h[a] - lse) / eta;
    }

    prec_t total = 0.0;
    for (const auto& traj : demos.trajectories)
        for (const Step& st : traj.steps) total += out.log_policy[st.state * na + st.action];
    out.value = total / static_cast<prec_t>(demos.count());
    return out;
}

namespace {

// solve (I - gamma P_pi) x = b by fixed-point sweeps
numvec discounted_solve(const TabularMDP& mdp, const SoftPolicy& pi, const Kernel& kernel,
                        const numvec& b) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const prec_t gamma = mdp.gamma();
    numvec x = b;
    prec_t bmax = 0.0;
    for (prec_t y : b) bmax = std::max(bmax, std::abs(y));
    const prec_t tol = 1e-14 * (bmax + 1.0) * (1.0 - gamma);
    for (std::size_t it = 0; it < 1000000; ++it) {
        numvec next = b;
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < na; ++a) {
                const SparseDist& q = kernel[mdp.cell(s, a)];
                prec_t e = 0.0;
                for (std::size_t i = 0; i < q.size(); ++i) e += q.probabilities[i] * x[q.states[i]];
                next[s] += gamma * pi(s, a) * e;
            }
        const prec_t change = sup_norm_diff(next, x);
        x = std::move(next);
        if (change <= tol) break;
    }
    return x;
}

// sum over demo steps of gamma V . dq*(.|s,a) / d theta_k for an s-rectangular set
numvec s_rectangular_kernel_term(const Demonstrations& demos, const TabularMDP& model,
                                 const FeatureMap& features, const UncertaintySet& u,
                                 const LikelihoodResult& solved, prec_t eta) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const std::size_t ns = model.n_states(), na = model.n_actions(), dim = features.dim();
    const prec_t gamma = model.gamma();
    const ValueFunction& v = solved.v;
    const SoftPolicy& pi = solved.policy;
    numvec term(dim, 0.0);

    numvec visits(ns * na, 0.0);
    for (const auto& traj : demos.trajectories)
        for (const Step& st : traj.steps) visits[model.cell(st.state, st.action)] += 1.0;

    // dV/dtheta_k with q* held fixed (exact by the envelope argument)
    std::vector<numvec> dv(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        numvec b(ns, 0.0);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < na; ++a) b[s] += pi(s, a) * features(s, a)[k];
        dv[k] = discounted_solve(model, pi, solved.kernel, b);
    }

    for (std::size_t s = 0; s < ns; ++s) {
        bool visited = false;
        for (std::size_t a = 0; a < na; ++a) visited = visited || visits[s * na + a] > 0.0;
        if (!visited) continue;
        const ConstraintBundle& bundle = u.cells[s];
        const numvec& q = solved.table.q_star[s];
        const numvec& lambda = solved.table.duals[s];
        const std::size_t nv = bundle.n_variables(), nb = bundle.block_sizes.size();

        indvec block_of(nv), next_state(nv);
        for (std::size_t a = 0, pos = 0; a < nb; ++a) {
            const SparseDist& d = model.nominal(s, a);
            for (std::size_t i = 0; i < d.size(); ++i, ++pos) {
                block_of[pos] = a;
                next_state[pos] = d.states[i];
            }
        }
        auto scope = [&](const KLBall& ball) {
            if (ball.block == all_blocks) return std::pair<std::size_t, std::size_t>{0, nv};
            const std::size_t b = bundle.block_offset(ball.block);
            return std::pair<std::size_t, std::size_t>{b, b + bundle.block_sizes[ball.block]};
        };
        // a zero-radius ball pins its block to the reference
        std::vector<bool> pinned(nb, false);
        for (const KLBall& ball : bundle.constraints)
            if (ball.kind == KLKind::relative_entropy && ball.block != all_blocks && ball.bound <= 0.0)
                pinned[ball.block] = true;
        indvec free, local(nv, nv);
        for (std::size_t i = 0; i < nv; ++i)
            if (!pinned[block_of[i]] && q[i] > 1e-14) {
                local[i] = free.size();
                free.push_back(i);
            }
        if (free.empty()) continue;
        indvec active;
        for (std::size_t j = 0; j < bundle.constraints.size(); ++j)
            if (j < lambda.size() && lambda[j] > 1e-10) active.push_back(j);
        std::vector<bool> block_free(nb, false);
        for (std::size_t i : free) block_free[block_of[i]] = true;

        const std::size_t nf = free.size();
        std::size_t rows = active.size();
        for (std::size_t b = 0; b < nb; ++b) rows += block_free[b];
        const std::size_t n = nf + rows;
        MatrixXd kkt = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t x = 0; x < nf; ++x)
            for (std::size_t y = 0; y < nf; ++y) {
                const std::size_t i = free[x], l = free[y], bi = block_of[i], bl = block_of[l];
                prec_t e = -pi(s, bi) * pi(s, bl);
                if (bi == bl) e += pi(s, bi);
                kkt(x, y) = e * gamma * v[next_state[i]] * gamma * v[next_state[l]] / eta;
            }
        std::size_t row = nf;
        for (std::size_t j : active) {
            const KLBall& ball = bundle.constraints[j];
            const auto [begin, end] = scope(ball);
            for (std::size_t i = begin; i < end; ++i) {
                if (local[i] == nv) continue;
                const prec_t r = ball.reference[i - begin];
                const std::size_t x = local[i];
                prec_t grad;
                if (ball.kind == KLKind::relative_entropy) {
                    grad = std::log(q[i] / r) + 1.0;
                    kkt(x, x) += lambda[j] / q[i];
                } else {
                    grad = -r / q[i];
                    kkt(x, x) += lambda[j] * r / (q[i] * q[i]);
                }
                kkt(row, x) = kkt(x, row) = grad;
            }
            ++row;
        }
        for (std::size_t b = 0; b < nb; ++b) {
            if (!block_free[b]) continue;
            for (std::size_t x = 0; x < nf; ++x)
                if (block_of[free[x]] == b) kkt(row, x) = kkt(x, row) = 1.0;
            ++row;
        }
        const auto solver = kkt.completeOrthogonalDecomposition();

        for (std::size_t k = 0; k < dim; ++k) {
            numvec dz(na, 0.0);
            prec_t mean = 0.0;
            for (std::size_t a = 0, pos = 0; a < na; ++a) {
                dz[a] = features(s, a)[k];
                for (std::size_t i = 0; i < bundle.block_sizes[a]; ++i, ++pos)
                    dz[a] += gamma * q[pos] * dv[k][next_state[pos]];
                mean += pi(s, a) * dz[a];
            }
            VectorXd rhs = VectorXd::Zero(static_cast<Eigen::Index>(n));
            for (std::size_t x = 0; x < nf; ++x) {
                const std::size_t i = free[x], b = block_of[i];
                const prec_t dpi = pi(s, b) * (dz[b] - mean) / eta;
                rhs[x] = -gamma * (dpi * v[next_state[i]] + pi(s, b) * dv[k][next_state[i]]);
            }
            const VectorXd dq = solver.solve(rhs);
            for (std::size_t x = 0; x < nf; ++x) {
                const std::size_t i = free[x];
                term[k] += visits[s * na + block_of[i]] * gamma * v[next_state[i]] * dq[x];
            }
        }
    }
    return term;
}

} // namespace

numvec irl_gradient(const Demonstrations& demos, const TabularMDP& mdp, const FeatureMap& features,
                    const numvec& theta, const UncertaintySet* u, prec_t eta, prec_t epsilon,
                    const LikelihoodResult* solved) {
    features.require_compatible(mdp);
    const TabularMDP model = mdp.with_rewards(features.rewards(theta));
    LikelihoodResult local;
    if (!solved) {
        local = robust_log_likelihood(demos, model, u, eta, epsilon);
        solved = &local;
    }
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions(), dim = features.dim();
    const prec_t gamma = mdp.gamma();

    numvec grad(dim, 0.0);
    numvec start_next(ns, 0.0), start_here(ns, 0.0);
    for (const auto& traj : demos.trajectories) {
        for (const Step& st : traj.steps) {
            const auto phi = features(st.state, st.action);
            for (std::size_t k = 0; k < dim; ++k) grad[k] += phi[k];
            start_here[st.state] += 1.0;
            const SparseDist& q = solved->kernel[mdp.cell(st.state, st.action)];
            for (std::size_t i = 0; i < q.size(); ++i) start_next[q.states[i]] += gamma * q.probabilities[i];
        }
    }

    if (gamma > 0.0) {
        const prec_t tol = 1e-12;
        const numvec d_next = discounted_visitation(model, solved->policy, start_next, tol, &solved->kernel);
        const numvec d_here = discounted_visitation(model, solved->policy, start_here, tol, &solved->kernel);
        for (std::size_t s = 0; s < ns; ++s) {
            const prec_t w = d_next[s] - d_here[s];
            if (w == 0.0) continue;
            for (std::size_t a = 0; a < na; ++a) {
                const prec_t p = solved->policy(s, a);
                const auto phi = features(s, a);
                for (std::size_t k = 0; k < dim; ++k) grad[k] += w * p * phi[k];
            }
        }
    } else {
        for (std::size_t s = 0; s < ns; ++s) {
            if (start_here[s] == 0.0) continue;
            for (std::size_t a = 0; a < na; ++a) {
                const prec_t p = solved->policy(s, a);
                const auto phi = features(s, a);
                for (std::size_t k = 0; k < dim; ++k) grad[k] -= start_here[s] * p * phi[k];
            }
        }
    }
    if (u && u->rectangularity == Rectangularity::S && gamma > 0.0) {
        const numvec extra = s_rectangular_kernel_term(demos, model, features, *u, *solved, eta);
        for (std::size_t k = 0; k < dim; ++k) grad[k] += extra[k];
    }
    const prec_t scale = 1.0 / (eta * static_cast<prec_t>(demos.count()));
    for (prec_t& g : grad) g *= scale;
    return grad;
}

numvec irl_gradient_fd(const Demonstrations& demos, const TabularMDP& mdp,
                       const FeatureMap& features, const numvec& theta, const UncertaintySet* u,
                       prec_t eta, prec_t step, prec_t epsilon) {
    features.require_compatible(mdp);
    if (!(step > 0.0)) throw std::invalid_argument("irl_gradient_fd: step must be > 0");
    numvec grad(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        numvec plus = theta, minus = theta;
        plus[k] += step;
        minus[k] -= step;
        const prec_t lp =
            robust_log_likelihood(demos, mdp.with_rewards(features.rewards(plus)), u, eta, epsilon).value;
        const prec_t lm =
            robust_log_likelihood(demos, mdp.with_rewards(features.rewards(minus)), u, eta, epsilon).value;
        grad[k] = (lp - lm) / (2.0 * step);
    }
    return grad;
}

TrainResult train_maxent(const Demonstrations& demos, const TabularMDP& mdp,
                         const FeatureMap& features, const UncertaintySet* u, prec_t eta,
                         const TrainOptions& opts) {
    features.require_compatible(mdp);
    if (!(opts.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (opts.iterations == 0) throw std::invalid_argument("train: iterations must be > 0");

    TrainResult res;
    res.theta.assign(features.dim(), 0.0);
    ValueFunction warm;
    prec_t rate = opts.learning_rate;
    const prec_t k = static_cast<prec_t>(demos.max_length());
    const prec_t g = mdp.gamma();
    for (std::size_t it = 0;; ++it) {
        numvec rewards = features.rewards(res.theta);
        prec_t rmax = 0.0;
        for (prec_t r : rewards) rmax = std::isfinite(r) ? std::max(rmax, std::abs(r)) : INFINITY;
        // values this large cannot resolve the likelihood's stopping threshold
        const prec_t resolution = 16.0 * std::numeric_limits<prec_t>::epsilon() * rmax / (1.0 - g);
        if (!std::isfinite(rmax) ||
            (g > 0.0 && resolution > 3.0 * opts.epsilon * (1.0 - g) / (8.0 * g * k)))
            throw TrainingDiverged("train: reward weights diverged at iteration " + std::to_string(it),
                                   res);
        const TabularMDP model = mdp.with_rewards(std::move(rewards));
        const LikelihoodResult lik = robust_log_likelihood(demos, model, u, eta, opts.epsilon,
                                                           warm.empty() ? nullptr : &warm);
        res.curve.push_back(lik.value);
        if (!std::isfinite(lik.value))
            throw TrainingDiverged("train: likelihood became non-finite at iteration " +
                                       std::to_string(it), res);
        if (it == opts.iterations) break;
        warm = lik.v;
        const numvec grad = irl_gradient(demos, mdp, features, res.theta, u, eta, opts.epsilon, &lik);
        prec_t norm = 0.0;
        for (prec_t g : grad) norm = std::max(norm, std::abs(g));
        res.gradient_norms.push_back(norm);
        for (std::size_t k = 0; k < grad.size(); ++k) res.theta[k] += rate * grad[k];
        rate *= opts.decay;
    }
    return res;
}

SoftPolicy learned_policy(const TabularMDP& mdp, const FeatureMap& features, const numvec& theta,
                          prec_t eta, prec_t epsilon) {
    features.require_compatible(mdp);
    SolverConfig cfg;
    cfg.eta = eta;
    cfg.epsilon = epsilon;
    return soft_value_iteration(mdp.with_rewards(features.rewards(theta)), cfg).policy;
}

EVD expected_value_difference(const TabularMDP& true_mdp, const SoftPolicy& learned, prec_t eta,
                              prec_t epsilon) {
    if (learned.n_states() != true_mdp.n_states() || learned.n_actions() != true_mdp.n_actions())
        throw std::invalid_argument("expected_value_difference: policy shape mismatch");
    SolverConfig cfg;
    cfg.eta = eta;
    cfg.epsilon = epsilon;
    const ValueFunction best = soft_value_iteration(true_mdp, cfg).value;
    const ValueFunction mine = soft_policy_evaluation(true_mdp, learned, eta, epsilon);
    prec_t total = 0.0;
    for (std::size_t s = 0; s < best.size(); ++s) total += best[s] - mine[s];
    EVD out;
    out.raw = total / static_cast<prec_t>(best.size());
    out.value = std::max(out.raw, 0.0);
    return out;
}

} // namespace rermdp
