#include "rermdp/adversary.hpp"
#include "rermdp/soft_dp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rermdp {

std::string to_string(KLKind kind) {
    return kind == KLKind::relative_entropy ? "relative_entropy" : "likelihood";
}

KLKind kl_kind_from_string(const std::string& name) {
    if (name == "relative_entropy" || name == "kl") return KLKind::relative_entropy;
    if (name == "likelihood") return KLKind::likelihood;
    throw std::invalid_argument("unknown constraint kind '" + name + "'");
}

prec_t KLBall::max_likelihood() const {
    prec_t total = 0.0;
    for (prec_t r : reference)
        if (r > 0.0) total += r * std::log(r);
    return total;
}

std::size_t ConstraintBundle::n_variables() const {
    return std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
}

std::size_t ConstraintBundle::block_offset(std::size_t block) const {
    return std::accumulate(block_sizes.begin(), block_sizes.begin() + block, std::size_t{0});
}

ConstraintBundle ConstraintBundle::kl_ball(numvec reference, prec_t beta) {
    ConstraintBundle bundle;
    bundle.block_sizes = {reference.size()};
    bundle.constraints.push_back({KLKind::relative_entropy, std::move(reference), beta, 0});
    return bundle;
}

namespace {

/// Variable range [begin, end) covered by a constraint.
std::pair<std::size_t, std::size_t> scope(const ConstraintBundle& bundle, const KLBall& ball) {
    if (ball.block == all_blocks) return {0, bundle.n_variables()};
    const std::size_t begin = bundle.block_offset(ball.block);
    return {begin, begin + bundle.block_sizes[ball.block]};
}

bool covers_block(const KLBall& ball, std::size_t block) {
    return ball.block == all_blocks || ball.block == block;
}

} // namespace

void ConstraintBundle::require_well_formed() const {
    if (block_sizes.empty()) throw std::invalid_argument("bundle: no blocks");
    for (std::size_t b = 0; b < block_sizes.size(); ++b)
        if (block_sizes[b] == 0) throw std::invalid_argument("bundle: empty block");
    if (constraints.empty()) throw std::invalid_argument("bundle: at least one constraint required");
    for (const auto& ball : constraints) {
        if (ball.block != all_blocks && ball.block >= block_sizes.size())
            throw std::invalid_argument("bundle: constraint block out of range");
        const auto [begin, end] = scope(*this, ball);
        if (ball.reference.size() != end - begin)
            throw std::invalid_argument("bundle: reference length does not match its block(s)");
        if (!std::isfinite(ball.bound)) throw std::invalid_argument("bundle: non-finite bound");
        if (ball.kind == KLKind::relative_entropy && ball.bound < 0.0)
            throw std::invalid_argument("bundle: negative relative-entropy radius");
        // every block slice of the reference is a distribution
        std::size_t pos = 0;
        for (std::size_t b = 0; b < block_sizes.size(); ++b) {
            if (!covers_block(ball, b)) continue;
            prec_t total = 0.0;
            for (std::size_t i = 0; i < block_sizes[b]; ++i, ++pos) {
                const prec_t r = ball.reference[pos];
                if (!(r >= 0.0) || !std::isfinite(r))
                    throw std::invalid_argument("bundle: invalid reference entry");
                if (ball.kind == KLKind::relative_entropy && r <= 0.0)
                    throw std::invalid_argument(
                        "bundle: relative-entropy reference must be positive on the support");
                total += r;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("bundle: reference does not sum to 1");
        }
    }
}

bool ConstraintBundle::separable_relative_entropy() const {
    if (block_sizes.size() == 1)
        return constraints.size() == 1 && constraints[0].kind == KLKind::relative_entropy;
    if (constraints.size() != block_sizes.size()) return false;
    std::vector<bool> seen(block_sizes.size(), false);
    for (const auto& c : constraints) {
        if (c.kind != KLKind::relative_entropy || c.block == all_blocks || seen[c.block])
            return false;
        seen[c.block] = true;
    }
    return true;
}

prec_t constraint_violation(const ConstraintBundle& bundle, std::size_t j, const numvec& x) {
    const KLBall& ball = bundle.constraints[j];
    const auto [begin, end] = scope(bundle, ball);
    prec_t total = 0.0;
    if (ball.kind == KLKind::relative_entropy) {
        for (std::size_t i = begin; i < end; ++i) {
            const prec_t xi = x[i];
            if (xi < 0.0) return std::numeric_limits<prec_t>::infinity();
            if (xi > 0.0) total += xi * std::log(xi / ball.reference[i - begin]);
        }
        return total - ball.bound;
    }
    for (std::size_t i = begin; i < end; ++i) {
        const prec_t r = ball.reference[i - begin];
        if (r == 0.0) continue;
        if (x[i] <= 0.0) return std::numeric_limits<prec_t>::infinity();
        total += r * std::log(x[i]);
    }
    return ball.bound - total;
}

// ------------------------------------------------------------------------------------------
// Single relative-entropy ball
// ------------------------------------------------------------------------------------------

namespace {

struct TiltedPoint {
    numvec q;
    prec_t kl = 0.0;
    prec_t mean = 0.0;     // E_q[values]
    prec_t variance = 0.0; // Var_q[values]
};

/// q ∝ ref exp(-(values - vmin)/lambda) restricted to positive reference entries.
TiltedPoint tilt(const numvec& ref, const numvec& values, prec_t vmin, prec_t lambda) {
    TiltedPoint p;
    p.q.assign(ref.size(), 0.0);
    prec_t z = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (ref[i] <= 0.0) continue;
        p.q[i] = ref[i] * std::exp(-(values[i] - vmin) / lambda);
        z += p.q[i];
    }
    prec_t mean_shift = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        p.q[i] /= z;
        mean_shift += p.q[i] * (values[i] - vmin);
    }
    prec_t var = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const prec_t d = values[i] - vmin - mean_shift;
        var += p.q[i] * d * d;
    }
    p.mean = vmin + mean_shift;
    p.variance = var;
    p.kl = std::max(0.0, -mean_shift / lambda - std::log(z));
    return p;
}

prec_t dot(const numvec& a, const numvec& b) {
    prec_t total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
    return total;
}

} // namespace

AdversarySolution worst_case_expectation_kl(const numvec& reference, prec_t beta,
                                            const numvec& values, prec_t xi,
                                            std::optional<prec_t> warm_lambda) {
    if (!(xi > 0.0)) throw std::invalid_argument("worst_case_expectation_kl: xi must be > 0");
    if (!(beta >= 0.0)) throw std::invalid_argument("worst_case_expectation_kl: beta must be >= 0");
    if (reference.size() != values.size() || reference.empty())
        throw std::invalid_argument("worst_case_expectation_kl: size mismatch");
    prec_t ref_total = 0.0;
    for (prec_t p : reference) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("worst_case_expectation_kl: invalid reference entry");
        ref_total += p;
    }
    if (std::abs(ref_total - 1.0) > 1e-9)
        throw std::invalid_argument("worst_case_expectation_kl: reference does not sum to 1");

    prec_t vmin = std::numeric_limits<prec_t>::infinity();
    prec_t vmax = -std::numeric_limits<prec_t>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw std::invalid_argument("worst_case_expectation_kl: non-finite value");
        if (reference[i] <= 0.0) continue;
        vmin = std::min(vmin, values[i]);
        vmax = std::max(vmax, values[i]);
    }

    AdversarySolution sol;
    if (beta == 0.0) {
        sol.q_bar = reference;
        sol.value = dot(reference, values);
        sol.dual = {std::numeric_limits<prec_t>::infinity()};
        return sol;
    }

    // lambda -> 0 regime: the minimizers already fit inside the ball
    prec_t argmin_mass = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (reference[i] > 0.0 && values[i] == vmin) argmin_mass += reference[i];
    if (-std::log(argmin_mass) <= beta) {
        sol.q_bar.assign(reference.size(), 0.0);
        for (std::size_t i = 0; i < values.size(); ++i)
            if (reference[i] > 0.0 && values[i] == vmin) sol.q_bar[i] = reference[i] / argmin_mass;
        sol.value = vmin;
        sol.dual = {0.0};
        return sol;
    }

    const prec_t range = vmax - vmin;
    prec_t lo = 1e-12;
    prec_t hi = (range + 1.0) / std::max(beta, 1e-12);
    if (warm_lambda && *warm_lambda > lo && *warm_lambda < hi) {
        const prec_t wl = *warm_lambda * 0.5, wh = *warm_lambda * 2.0;
        if (wh < hi && tilt(reference, values, vmin, wh).kl <= beta) hi = wh;
        if (wl > lo && tilt(reference, values, vmin, wl).kl > beta) lo = wl;
    }

    TiltedPoint best = tilt(reference, values, vmin, hi);
    prec_t best_lambda = hi;
    {
        TiltedPoint at_lo = tilt(reference, values, vmin, lo);
        if (at_lo.kl <= beta) {
            // a near-tie with the minimum; lo itself is feasible with a negligible gap
            best = std::move(at_lo);
            best_lambda = lo;
            hi = lo;
        }
    }
    auto gap_of = [&](const TiltedPoint& p, prec_t lambda) { return lambda * (beta - p.kl); };

    // safeguarded Newton in u = ln(lambda) on KL(q_lambda) - beta, bracket kept in [lo, hi]
    prec_t lambda = hi;
    TiltedPoint current = best;
    const prec_t precision_floor = 64.0 * std::numeric_limits<prec_t>::epsilon() *
                                   (std::abs(vmin) + range + 1.0);
    std::size_t it = 0;
    constexpr std::size_t max_iters = 200;
    for (; it < max_iters; ++it) {
        if (gap_of(best, best_lambda) <= xi) break;
        if (hi / lo - 1.0 < 1e-15) break;

        prec_t next = std::sqrt(lo * hi);
        if (current.variance > 0.0) {
            const prec_t u = std::log(lambda) +
                             (current.kl - beta) * lambda * lambda / current.variance;
            const prec_t candidate = std::exp(u);
            if (std::isfinite(candidate) && candidate > lo && candidate < hi) next = candidate;
        }
        lambda = next;
        current = tilt(reference, values, vmin, lambda);
        if (current.kl > beta) {
            lo = lambda;
        } else {
            hi = lambda;
            best = current;
            best_lambda = lambda;
        }
    }

    const prec_t gap = gap_of(best, best_lambda);
    if (gap > std::max(xi, precision_floor))
        throw CertificateError("worst_case_expectation_kl: gap not certified", gap);

    sol.q_bar = std::move(best.q);
    sol.value = best.mean;
    sol.gap = std::max(0.0, gap);
    sol.dual = {best_lambda};
    sol.iterations = it;
    return sol;
}

AdversarySolution worst_case_expectation_kl(const KLBall& ball, const numvec& values, prec_t xi) {
    if (ball.kind != KLKind::relative_entropy)
        throw std::invalid_argument("worst_case_expectation_kl: relative-entropy ball required");
    return worst_case_expectation_kl(ball.reference, ball.bound, values, xi);
}

// ------------------------------------------------------------------------------------------
// Barrier method shared by the linear and exponential objectives
// ------------------------------------------------------------------------------------------

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr prec_t singleton_tol = 1e-14;
constexpr prec_t feasibility_tol = 1e-10;

/// Objective over the full stacked variable vector.
struct Objective {
    virtual ~Objective() = default;
    virtual prec_t value(const numvec& x) const = 0;
    virtual numvec gradient(const numvec& x) const = 0;
    /// Hessian restricted to `free` coordinates, added into h with weight t.
    virtual void add_hessian(const numvec& x, const indvec& free, prec_t t, MatrixXd& h) const = 0;
};

struct LinearObjective final : Objective {
    const numvec& c;
    explicit LinearObjective(const numvec& c) : c(c) {}
    prec_t value(const numvec& x) const override { return dot(c, x); }
    numvec gradient(const numvec&) const override { return c; }
    void add_hessian(const numvec&, const indvec&, prec_t, MatrixXd&) const override {}
};

struct LogSumExpObjective final : Objective {
    const ConstraintBundle& bundle;
    const ExponentialObjective& obj;
    LogSumExpObjective(const ConstraintBundle& b, const ExponentialObjective& o)
        : bundle(b), obj(o) {}

    numvec z(const numvec& x) const {
        numvec out(obj.offsets);
        std::size_t pos = 0;
        for (std::size_t a = 0; a < bundle.block_sizes.size(); ++a)
            for (std::size_t i = 0; i < bundle.block_sizes[a]; ++i, ++pos)
                out[a] += obj.weights[pos] * x[pos];
        return out;
    }
    prec_t value(const numvec& x) const override { return log_sum_exp(z(x), obj.eta); }
    numvec gradient(const numvec& x) const override {
        const numvec p = softmax(z(x), obj.eta);
        numvec g(x.size());
        std::size_t pos = 0;
        for (std::size_t a = 0; a < bundle.block_sizes.size(); ++a)
            for (std::size_t i = 0; i < bundle.block_sizes[a]; ++i, ++pos)
                g[pos] = p[a] * obj.weights[pos];
        return g;
    }
    void add_hessian(const numvec& x, const indvec& free, prec_t t, MatrixXd& h) const override {
        const numvec p = softmax(z(x), obj.eta);
        // block index of every variable
        indvec block_of(x.size());
        std::size_t pos = 0;
        for (std::size_t a = 0; a < bundle.block_sizes.size(); ++a)
            for (std::size_t i = 0; i < bundle.block_sizes[a]; ++i) block_of[pos++] = a;
        VectorXd mean(free.size());
        for (std::size_t k = 0; k < free.size(); ++k)
            mean[k] = p[block_of[free[k]]] * obj.weights[free[k]];
        const prec_t scale = t / obj.eta;
        for (std::size_t k = 0; k < free.size(); ++k)
            for (std::size_t l = 0; l < free.size(); ++l) {
                prec_t entry = -mean[k] * mean[l];
                if (block_of[free[k]] == block_of[free[l]])
                    entry += p[block_of[free[k]]] * obj.weights[free[k]] * obj.weights[free[l]];
                h(k, l) += scale * entry;
            }
    }
};

/// Bundle with singleton constraints resolved into fixed blocks.
struct Reduced {
    const ConstraintBundle* bundle;
    numvec x;                   // full point; fixed blocks hold their pinned values
    std::vector<bool> fixed;    // per block
    indvec free;                // free variable indices
    std::vector<indvec> free_blocks; // free variable indices grouped by free block
    indvec active;              // constraints touching a free variable
    indvec block_of;            // block of every variable
};

Reduced reduce(const ConstraintBundle& bundle) {
    Reduced red;
    red.bundle = &bundle;
    const std::size_t nb = bundle.block_sizes.size();
    red.x.assign(bundle.n_variables(), 0.0);
    red.fixed.assign(nb, false);
    red.block_of.resize(bundle.n_variables());
    for (std::size_t b = 0, pos = 0; b < nb; ++b)
        for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i) red.block_of[pos++] = b;

    for (const auto& ball : bundle.constraints) {
        bool singleton = false;
        if (ball.kind == KLKind::relative_entropy) {
            singleton = ball.bound <= 0.0;
        } else {
            const prec_t ml = ball.max_likelihood();
            const prec_t tol = singleton_tol * (1.0 + std::abs(ml));
            if (ball.bound > ml + feasibility_tol * (1.0 + std::abs(ml)))
                throw InfeasibleError("likelihood level exceeds sum ref ln ref");
            singleton = ball.bound >= ml - tol;
        }
        if (!singleton) continue;
        const auto [begin, end] = scope(bundle, ball);
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t b = red.block_of[i];
            if (red.fixed[b] && std::abs(red.x[i] - ball.reference[i - begin]) > 1e-12)
                throw InfeasibleError("two singleton constraints pin different distributions");
        }
        for (std::size_t i = begin; i < end; ++i) {
            red.x[i] = ball.reference[i - begin];
            red.fixed[red.block_of[i]] = true;
        }
    }

    for (std::size_t b = 0, pos = 0; b < nb; ++b) {
        if (red.fixed[b]) {
            pos += bundle.block_sizes[b];
            continue;
        }
        indvec idx;
        for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i, ++pos) {
            idx.push_back(pos);
            red.free.push_back(pos);
        }
        red.free_blocks.push_back(std::move(idx));
    }
    for (std::size_t j = 0; j < bundle.constraints.size(); ++j) {
        const auto [begin, end] = scope(bundle, bundle.constraints[j]);
        bool touches = false;
        for (std::size_t i = begin; i < end && !touches; ++i)
            touches = !red.fixed[red.block_of[i]];
        if (touches) red.active.push_back(j);
    }
    return red;
}

void require_satisfied(const ConstraintBundle& bundle, const numvec& x, const indvec& which) {
    for (std::size_t j : which) {
        const prec_t v = constraint_violation(bundle, j, x);
        if (v > feasibility_tol) throw InfeasibleError("constraint " + std::to_string(j) + " violated by pinned distribution");
    }
}

prec_t min_slack(const ConstraintBundle& bundle, const Reduced& red, const numvec& x) {
    prec_t slack = std::numeric_limits<prec_t>::infinity();
    for (std::size_t i : red.free)
        if (!(x[i] > 0.0)) return -std::numeric_limits<prec_t>::infinity();
    for (std::size_t j : red.active) slack = std::min(slack, -constraint_violation(bundle, j, x));
    return slack;
}

/// Strictly feasible start from mixtures of the references (free blocks only).
std::optional<numvec> find_interior(const ConstraintBundle& bundle, const Reduced& red) {
    const std::size_t nb = bundle.block_sizes.size();
    // per-block slices of every reference
    auto slice_into = [&](const KLBall& ball, std::size_t b, numvec& x) {
        const auto [begin, end] = scope(bundle, ball);
        const std::size_t off = bundle.block_offset(b);
        const std::size_t local = off - begin;
        for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i)
            x[off + i] = ball.reference[local + i];
        (void)end;
    };

    numvec average = red.x;
    for (std::size_t b = 0; b < nb; ++b) {
        if (red.fixed[b]) continue;
        const std::size_t off = bundle.block_offset(b);
        std::size_t count = 0;
        numvec acc(bundle.block_sizes[b], 0.0);
        for (const auto& ball : bundle.constraints) {
            if (!covers_block(ball, b)) continue;
            numvec tmp(bundle.n_variables());
            slice_into(ball, b, tmp);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += tmp[off + i];
            ++count;
        }
        for (std::size_t i = 0; i < acc.size(); ++i)
            average[off + i] = count ? acc[i] / static_cast<prec_t>(count)
                                     : 1.0 / static_cast<prec_t>(acc.size());
    }

    std::vector<numvec> candidates{average};
    for (const auto& ball : bundle.constraints) {
        numvec c = average;
        for (std::size_t b = 0; b < nb; ++b)
            if (!red.fixed[b] && covers_block(ball, b)) slice_into(ball, b, c);
        numvec mid(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) mid[i] = 0.5 * (c[i] + average[i]);
        candidates.push_back(std::move(c));
        candidates.push_back(std::move(mid));
    }
    // small uniform mixtures keep every coordinate positive
    const std::size_t base = candidates.size();
    for (std::size_t k = 0; k < base; ++k)
        for (prec_t w : {1e-3, 1e-1}) {
            numvec c = candidates[k];
            for (std::size_t b = 0; b < nb; ++b) {
                if (red.fixed[b]) continue;
                const std::size_t off = bundle.block_offset(b);
                const prec_t u = 1.0 / static_cast<prec_t>(bundle.block_sizes[b]);
                for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i)
                    c[off + i] = (1.0 - w) * c[off + i] + w * u;
            }
            candidates.push_back(std::move(c));
        }

    std::optional<numvec> best;
    prec_t best_slack = 0.0;
    for (auto& c : candidates) {
        const prec_t s = min_slack(bundle, red, c);
        if (s > best_slack) {
            best_slack = s;
            best = c;
        }
    }
    return best;
}

struct BarrierState {
    prec_t phi = 0.0; // barrier value (without t f0)
    bool feasible = false;
};

/// Barrier B(x) = -sum_j ln(-f_j(x)) - sum_free ln x_i.
BarrierState barrier_value(const ConstraintBundle& bundle, const Reduced& red, const numvec& x) {
    BarrierState st;
    prec_t phi = 0.0;
    for (std::size_t i : red.free) {
        if (!(x[i] > 0.0)) return st;
        phi -= std::log(x[i]);
    }
    for (std::size_t j : red.active) {
        const prec_t f = constraint_violation(bundle, j, x);
        if (!(f < 0.0)) return st;
        phi -= std::log(-f);
    }
    st.phi = phi;
    st.feasible = true;
    return st;
}

/// Gradient and Hessian of t f0 + B over the free coordinates.
void barrier_derivatives(const ConstraintBundle& bundle, const Reduced& red, const Objective& obj,
                         prec_t t, const numvec& x, VectorXd& g, MatrixXd& h) {
    const std::size_t nf = red.free.size();
    g.setZero(nf);
    h.setZero(nf, nf);
    const numvec g0 = obj.gradient(x);
    for (std::size_t k = 0; k < nf; ++k) {
        const prec_t xi = x[red.free[k]];
        g[k] = t * g0[red.free[k]] - 1.0 / xi;
        h(k, k) += 1.0 / (xi * xi);
    }
    obj.add_hessian(x, red.free, t, h);

    // position of each variable inside the free list
    std::vector<std::ptrdiff_t> local(bundle.n_variables(), -1);
    for (std::size_t k = 0; k < nf; ++k) local[red.free[k]] = static_cast<std::ptrdiff_t>(k);

    VectorXd grad_f(nf);
    for (std::size_t j : red.active) {
        const KLBall& ball = bundle.constraints[j];
        const auto [begin, end] = scope(bundle, ball);
        const prec_t f = constraint_violation(bundle, j, x);
        const prec_t slack = -f;
        grad_f.setZero();
        for (std::size_t i = begin; i < end; ++i) {
            const std::ptrdiff_t k = local[i];
            if (k < 0) continue;
            const prec_t r = ball.reference[i - begin];
            if (ball.kind == KLKind::relative_entropy) {
                grad_f[k] = std::log(x[i] / r) + 1.0;
                h(k, k) += 1.0 / (x[i] * slack);
            } else {
                grad_f[k] = -r / x[i];
                h(k, k) += r / (x[i] * x[i] * slack);
            }
        }
        g += grad_f / slack;
        h += grad_f * grad_f.transpose() / (slack * slack);
    }
}

/// min over x > 0 of a x + lam x ln x - b ln x; returns {value, argmin}.
std::pair<prec_t, prec_t> separable_min(prec_t a, prec_t lam, prec_t b) {
    constexpr prec_t inf = std::numeric_limits<prec_t>::infinity();
    if (b <= 0.0) {
        if (lam <= 0.0) return a >= 0.0 ? std::pair{0.0, 0.0} : std::pair{-inf, inf};
        const prec_t x = std::exp(-1.0 - a / lam);
        return {-lam * x, x};
    }
    if (lam <= 0.0) {
        if (a <= 0.0) return {-inf, inf};
        const prec_t x = b / a;
        return {b - b * std::log(x), x};
    }
    // F(u) = a + lam (u + 1) - b exp(-u), increasing in u = ln x
    auto F = [&](prec_t u) { return a + lam * (u + 1.0) - b * std::exp(-u); };
    prec_t lo = -1.0, hi = 1.0;
    while (F(lo) > 0.0) lo = 2.0 * lo - 1.0;
    while (F(hi) < 0.0) hi = 2.0 * hi + 1.0;
    prec_t u = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const prec_t fu = F(u);
        if (fu == 0.0) break;
        if (fu < 0.0) lo = u; else hi = u;
        const prec_t du = lam + b * std::exp(-u);
        prec_t next = u - fu / du;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - u) <= 1e-15 * (1.0 + std::abs(u))) {
            u = next;
            break;
        }
        u = next;
    }
    const prec_t x = std::exp(u);
    return {a * x + lam * u * x - b * u, x};
}

/**
 * Lower bound on min_x c.x over the bundle from multipliers lambda (one per constraint):
 * max over the simplex multipliers of the separable Lagrange dual.
 */
prec_t dual_lower_bound(const ConstraintBundle& bundle, const Reduced& red, const numvec& c,
                        const numvec& lambda) {
    const std::size_t n = bundle.n_variables();
    numvec a(n, 0.0), lam(n, 0.0), b(n, 0.0);
    for (std::size_t i : red.free) a[i] = c[i];
    prec_t constant = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (red.fixed[red.block_of[i]]) constant += c[i] * red.x[i];

    for (std::size_t j : red.active) {
        const prec_t lj = lambda[j];
        const KLBall& ball = bundle.constraints[j];
        const auto [begin, end] = scope(bundle, ball);
        prec_t fixed_part = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const prec_t r = ball.reference[i - begin];
            const bool is_free = !red.fixed[red.block_of[i]];
            if (ball.kind == KLKind::relative_entropy) {
                if (is_free) {
                    a[i] -= lj * std::log(r);
                    lam[i] += lj;
                } else if (red.x[i] > 0.0) {
                    fixed_part += red.x[i] * std::log(red.x[i] / r);
                }
            } else {
                if (is_free) {
                    b[i] += lj * r;
                } else if (r > 0.0) {
                    fixed_part -= r * std::log(red.x[i]);
                }
            }
        }
        constant += ball.kind == KLKind::relative_entropy ? lj * (fixed_part - ball.bound)
                                                          : lj * (ball.bound + fixed_part);
    }

    prec_t total = constant;
    for (const indvec& blk : red.free_blocks) {
        // nu_min keeps every uncovered coordinate bounded below
        prec_t nu_min = -std::numeric_limits<prec_t>::infinity();
        bool any_covered = false;
        for (std::size_t i : blk) {
            if (lam[i] <= 0.0 && b[i] <= 0.0) nu_min = std::max(nu_min, -a[i]);
            if (lam[i] > 0.0 || b[i] > 0.0) any_covered = true;
        }
        auto block_terms = [&](prec_t nu, prec_t& mass) {
            prec_t value = 0.0;
            mass = 0.0;
            for (std::size_t i : blk) {
                if (lam[i] <= 0.0 && b[i] <= 0.0) continue;
                const auto [v, x] = separable_min(a[i] + nu, lam[i], b[i]);
                value += v;
                mass += x;
            }
            return value;
        };
        prec_t nu;
        if (!any_covered) {
            nu = nu_min;
        } else {
            // mass(nu) is decreasing; find mass(nu) = 1, clipped at nu_min
            prec_t mass = 0.0;
            prec_t lo = std::isfinite(nu_min) ? nu_min : 0.0;
            block_terms(lo, mass);
            if (std::isfinite(nu_min) && mass <= 1.0) {
                nu = nu_min;
            } else {
                prec_t step = 1.0;
                while (true) {
                    block_terms(lo, mass);
                    if (mass > 1.0) break;
                    lo -= step;
                    step *= 2.0;
                }
                prec_t hi = lo + 1.0;
                step = 1.0;
                while (true) {
                    block_terms(hi, mass);
                    if (mass < 1.0) break;
                    hi += step;
                    step *= 2.0;
                }
                for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
                    const prec_t mid = 0.5 * (lo + hi);
                    block_terms(mid, mass);
                    if (mass > 1.0) lo = mid; else hi = mid;
                }
                nu = 0.5 * (lo + hi);
                if (std::isfinite(nu_min)) nu = std::max(nu, nu_min);
            }
        }
        prec_t mass = 0.0;
        total += block_terms(nu, mass) - nu;
    }
    return total;
}

/**
 * Multipliers fitted to stationarity c + sum_j lambda_j grad f_j + nu_b = 0 by least squares at x,
 * clipped at zero. At large t the central-path estimate 1/(t * slack) loses its digits to the
 * rounding of the slack while this fit does not. Empty if no coordinate qualifies.
 */
numvec fitted_multipliers(const ConstraintBundle& bundle, const Reduced& red, const numvec& c,
                          const numvec& x) {
    std::vector<std::ptrdiff_t> row(bundle.n_variables(), -1);
    std::vector<std::ptrdiff_t> block_col(bundle.block_sizes.size(), -1);
    Eigen::Index rows = 0, cols = static_cast<Eigen::Index>(red.active.size());
    for (std::size_t i : red.free) {
        // coordinates pushed onto the positivity bound carry their own multiplier
        if (x[i] <= 1e-9) continue;
        row[i] = rows++;
        if (block_col[red.block_of[i]] < 0) block_col[red.block_of[i]] = cols++;
    }
    if (rows == 0 || red.active.empty()) return {};
    MatrixXd m = MatrixXd::Zero(rows, cols);
    VectorXd rhs = VectorXd::Zero(rows);
    for (std::size_t i = 0; i < row.size(); ++i)
        if (row[i] >= 0) {
            rhs[row[i]] = -c[i];
            m(row[i], block_col[red.block_of[i]]) = 1.0;
        }
    for (std::size_t k = 0; k < red.active.size(); ++k) {
        const KLBall& ball = bundle.constraints[red.active[k]];
        const auto [begin, end] = scope(bundle, ball);
        for (std::size_t i = begin; i < end; ++i) {
            if (row[i] < 0) continue;
            const prec_t r = ball.reference[i - begin];
            m(row[i], static_cast<Eigen::Index>(k)) =
                ball.kind == KLKind::relative_entropy ? std::log(x[i] / r) + 1.0 : -r / x[i];
        }
    }
    const VectorXd sol = m.colPivHouseholderQr().solve(rhs);
    numvec lambda(bundle.constraints.size(), 0.0);
    for (std::size_t k = 0; k < red.active.size(); ++k) {
        const prec_t l = sol[static_cast<Eigen::Index>(k)];
        if (!std::isfinite(l)) return {};
        lambda[red.active[k]] = std::max(0.0, l);
    }
    return lambda;
}

/// Equality-constrained Newton centering of t f0 + B; returns the final Newton decrement^2/2.
prec_t center(const ConstraintBundle& bundle, const Reduced& red, const Objective& obj, prec_t t,
              numvec& x, const BarrierOptions& opts, std::size_t& newton_steps) {
    const std::size_t nf = red.free.size();
    const std::size_t nb = red.free_blocks.size();
    MatrixXd A = MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nf));
    {
        std::size_t k = 0;
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t i = 0; i < red.free_blocks[b].size(); ++i) A(b, k++) = 1.0;
    }
    VectorXd g;
    MatrixXd h;
    prec_t decrement = std::numeric_limits<prec_t>::infinity();
    for (std::size_t it = 0; it < opts.max_newton; ++it) {
        ++newton_steps;
        barrier_derivatives(bundle, red, obj, t, x, g, h);
        Eigen::LDLT<MatrixXd> ldlt(h);
        const MatrixXd Y = ldlt.solve(A.transpose());
        const VectorXd y0 = ldlt.solve(g);
        const MatrixXd S = A * Y;
        const VectorXd w = S.ldlt().solve(-A * y0);
        const VectorXd dx = -y0 - Y * w;
        // dx'H dx instead of -g.dx: the latter cancels badly once t is large
        const prec_t curvature = dx.dot(h * dx);
        decrement = std::max(0.0, curvature) / 2.0;
        if (!std::isfinite(decrement)) break;
        if (decrement <= opts.newton_tol) break;

        const prec_t f_old = obj.value(x);
        const BarrierState b_old = barrier_value(bundle, red, x);
        const prec_t slope = -curvature;
        numvec trial = x;
        prec_t step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
            for (std::size_t k = 0; k < nf; ++k) trial[red.free[k]] = x[red.free[k]] + step * dx[k];
            const BarrierState b_new = barrier_value(bundle, red, trial);
            if (!b_new.feasible) continue;
            // quadratic region: accept the full Newton step
            if (step == 1.0 && decrement < 0.02) {
                accepted = true;
                break;
            }
            const prec_t change = t * (obj.value(trial) - f_old) + (b_new.phi - b_old.phi);
            if (change <= 0.25 * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        // keep every block on the simplex despite rounding
        for (const indvec& blk : red.free_blocks) {
            prec_t total = 0.0;
            for (std::size_t i : blk) total += trial[i];
            for (std::size_t i : blk) trial[i] /= total;
        }
        if (!barrier_value(bundle, red, trial).feasible) break;
        x = std::move(trial);
    }
    return decrement;
}

struct BarrierResult {
    numvec x;
    prec_t value = 0.0;
    prec_t gap = 0.0;
    numvec dual;
    std::size_t iterations = 0;
};

BarrierResult solve_barrier(const ConstraintBundle& bundle, const Objective& obj, prec_t xi,
                            const BarrierOptions& opts) {
    bundle.require_well_formed();
    if (!(xi > 0.0)) throw std::invalid_argument("barrier solver: xi must be > 0");
    Reduced red = reduce(bundle);

    BarrierResult res;
    res.dual.assign(bundle.constraints.size(), 0.0);
    // constraints living entirely on pinned blocks must hold there
    {
        indvec inactive;
        for (std::size_t j = 0; j < bundle.constraints.size(); ++j)
            if (std::find(red.active.begin(), red.active.end(), j) == red.active.end())
                inactive.push_back(j);
        require_satisfied(bundle, red.x, inactive);
    }
    if (red.free.empty()) {
        res.x = red.x;
        res.value = obj.value(red.x);
        return res;
    }

    auto start = find_interior(bundle, red);
    if (!start) throw InfeasibleError("no strictly feasible point found (Slater check failed)");
    numvec x = std::move(*start);

    const prec_t m = static_cast<prec_t>(red.active.size() + red.free.size());
    prec_t t = opts.t_initial;
    prec_t best_gap = std::numeric_limits<prec_t>::infinity(), best_floor = 0.0;
    numvec best_x, best_lambda;
    numvec lambda(bundle.constraints.size(), 0.0);
    for (std::size_t outer = 0; outer < opts.max_outer; ++outer) {
        center(bundle, red, obj, t, x, opts, res.iterations);

        for (std::size_t j : red.active) lambda[j] = 1.0 / (t * -constraint_violation(bundle, j, x));
        const numvec c = obj.gradient(x);
        prec_t lower = dual_lower_bound(bundle, red, c, lambda);
        if (dot(c, x) - lower > xi) {
            numvec fitted = fitted_multipliers(bundle, red, c, x);
            if (!fitted.empty()) {
                const prec_t alt = dual_lower_bound(bundle, red, c, fitted);
                if (alt > lower) {
                    lower = alt;
                    lambda = std::move(fitted);
                }
            }
        }
        const prec_t gap = std::max(0.0, dot(c, x) - lower);
        // below this the dual bound cannot be resolved in double precision
        prec_t scale = std::abs(dot(c, x));
        for (prec_t ci : c) scale = std::max(scale, std::abs(ci));
        const prec_t floor = 4096.0 * std::numeric_limits<prec_t>::epsilon() * (scale + 1.0);
        if (gap <= std::max(xi, floor)) {
            res.x = x;
            res.value = obj.value(x);
            res.gap = gap;
            res.dual = lambda;
            return res;
        }
        if (gap < best_gap) {
            best_gap = gap;
            best_floor = floor;
            best_x = x;
            best_lambda = lambda;
        }
        // centering has lost accuracy once the gap grows well past its best
        if (gap > 1e3 * best_gap && t > 1e10) break;
        // the central-path gap m/t has fallen far below xi without certification: stop
        if (m / t < 1e-6 * xi && outer > 0 && t > 1e14) break;
        t *= opts.t_growth;
    }
    // ill-conditioned centering stalls a little above the floor; accept the best iterate there
    if (!best_x.empty() && best_gap <= 64.0 * best_floor) {
        res.x = std::move(best_x);
        res.value = obj.value(res.x);
        res.gap = best_gap;
        res.dual = std::move(best_lambda);
        return res;
    }
    throw CertificateError("barrier solver: certificate not achieved within budget", best_gap);
}

} // namespace

AdversarySolution worst_case_expectation_multi(const ConstraintBundle& bundle,
                                               const numvec& values, prec_t xi,
                                               const BarrierOptions& opts) {
    if (values.size() != bundle.n_variables())
        throw std::invalid_argument("worst_case_expectation_multi: values size mismatch");
    for (prec_t v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("worst_case_expectation_multi: non-finite value");
    LinearObjective obj(values);
    BarrierResult r = solve_barrier(bundle, obj, xi, opts);
    AdversarySolution sol;
    sol.q_bar = std::move(r.x);
    sol.value = r.value;
    sol.gap = r.gap;
    sol.dual = std::move(r.dual);
    sol.iterations = r.iterations;
    return sol;
}

prec_t ExponentialObjective::log_value(const ConstraintBundle& bundle, const numvec& x) const {
    return LogSumExpObjective(bundle, *this).value(x);
}

AdversarySolution worst_case_exponential_s(const ConstraintBundle& bundle,
                                           const ExponentialObjective& objective, prec_t xi,
                                           const BarrierOptions& opts) {
    if (!(objective.eta > 0.0)) throw std::invalid_argument("worst_case_exponential_s: eta must be > 0");
    if (objective.offsets.size() != bundle.block_sizes.size() ||
        objective.weights.size() != bundle.n_variables())
        throw std::invalid_argument("worst_case_exponential_s: coefficient shape mismatch");
    LogSumExpObjective obj(bundle, objective);
    BarrierResult r = solve_barrier(bundle, obj, xi, opts);
    AdversarySolution sol;
    sol.q_bar = std::move(r.x);
    sol.value = r.value;
    sol.gap = r.gap;
    sol.dual = std::move(r.dual);
    sol.iterations = r.iterations;
    return sol;
}

std::optional<numvec> slater_point(const ConstraintBundle& bundle) {
    bundle.require_well_formed();
    Reduced red;
    try {
        red = reduce(bundle);
    } catch (const InfeasibleError&) {
        return std::nullopt;
    }
    if (red.free.size() != bundle.n_variables()) return std::nullopt;
    return find_interior(bundle, red);
}

// ------------------------------------------------------------------------------------------
// Brute-force oracle
// ------------------------------------------------------------------------------------------

namespace {

/// All compositions of `total` into `parts` non-negative integers.
void compositions(std::size_t total, std::size_t parts, std::vector<std::size_t>& current,
                  std::vector<std::vector<std::size_t>>& out) {
    if (parts == 1) {
        current.push_back(total);
        out.push_back(current);
        current.pop_back();
        return;
    }
    for (std::size_t k = 0; k <= total; ++k) {
        current.push_back(k);
        compositions(total - k, parts - 1, current, out);
        current.pop_back();
    }
}

} // namespace

BruteForceResult brute_force_worst_case(const ConstraintBundle& bundle,
                                        const OracleObjective& objective, prec_t grid_step) {
    bundle.require_well_formed();
    if (bundle.n_variables() > brute_force_max_support)
        throw std::invalid_argument("brute_force_worst_case: support larger than " +
                                    std::to_string(brute_force_max_support));
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw std::invalid_argument("brute_force_worst_case: grid_step must lie in (0, 1]");
    const prec_t inv = 1.0 / grid_step;
    const auto steps = static_cast<std::size_t>(std::llround(inv));
    if (std::abs(inv - static_cast<prec_t>(steps)) > 1e-9 * inv)
        throw std::invalid_argument("brute_force_worst_case: 1/grid_step must be an integer");

    const std::size_t nb = bundle.block_sizes.size();
    std::vector<std::vector<std::vector<std::size_t>>> grids(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<std::size_t> cur;
        compositions(steps, bundle.block_sizes[b], cur, grids[b]);
    }

    auto evaluate = [&](const numvec& x) -> prec_t {
        if (const auto* c = std::get_if<numvec>(&objective)) return dot(*c, x);
        return std::get<ExponentialObjective>(objective).log_value(bundle, x);
    };

    BruteForceResult res;
    // Lipschitz-style tolerance: per block, spread of the objective gradient times the step
    {
        const numvec& w = std::holds_alternative<numvec>(objective)
                              ? std::get<numvec>(objective)
                              : std::get<ExponentialObjective>(objective).weights;
        for (std::size_t b = 0, pos = 0; b < nb; ++b) {
            prec_t lo = std::numeric_limits<prec_t>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i, ++pos) {
                lo = std::min(lo, w[pos]);
                hi = std::max(hi, w[pos]);
            }
            res.tolerance += (hi - lo) * grid_step * static_cast<prec_t>(bundle.block_sizes[b] - 1);
        }
    }

    std::vector<std::size_t> index(nb, 0);
    numvec x(bundle.n_variables());
    while (true) {
        for (std::size_t b = 0, pos = 0; b < nb; ++b)
            for (std::size_t i = 0; i < bundle.block_sizes[b]; ++i, ++pos)
                x[pos] = static_cast<prec_t>(grids[b][index[b]][i]) / static_cast<prec_t>(steps);
        ++res.points_evaluated;
        bool feasible = true;
        for (std::size_t j = 0; j < bundle.constraints.size() && feasible; ++j)
            feasible = constraint_violation(bundle, j, x) <= 1e-12;
        if (feasible) {
            ++res.points_feasible;
            const prec_t v = evaluate(x);
            if (v < res.value) {
                res.value = v;
                res.argmin = x;
            }
        }
        std::size_t b = 0;
        for (; b < nb; ++b) {
            if (++index[b] < grids[b].size()) break;
            index[b] = 0;
        }
        if (b == nb) break;
    }
    return res;
}

} // namespace rermdp
