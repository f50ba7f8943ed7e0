#pragma once

// Reference routines for the tests. Deliberately naive and dense, sharing no code with the
// library beyond its data types.

#include "rermdp/mdp.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using rermdp::numvec;
using Dense = std::vector<std::vector<numvec>>; // [s][a][s']

inline Dense dense_kernel(const rermdp::TabularMDP& mdp) {
    Dense t(mdp.n_states(), std::vector<numvec>(mdp.n_actions(), numvec(mdp.n_states(), 0.0)));
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const auto& d = mdp.nominal(s, a);
            for (std::size_t i = 0; i < d.size(); ++i) t[s][a][d.states[i]] = d.probabilities[i];
        }
    return t;
}

/// iters plain soft Bellman updates from V = 0 (no max shift; moderate values only)
inline numvec plain_soft_iteration(const rermdp::TabularMDP& mdp, double eta, int iters) {
    const Dense t = dense_kernel(mdp);
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    numvec v(ns, 0.0);
    for (int it = 0; it < iters; ++it) {
        numvec next(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            double sum = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                double h = mdp.reward(s, a);
                for (std::size_t sp = 0; sp < ns; ++sp) h += mdp.gamma() * t[s][a][sp] * v[sp];
                sum += std::exp(h / eta);
            }
            next[s] = eta * std::log(sum);
        }
        v = next;
    }
    return v;
}

/// d = sum_{t<terms} gamma^t mu P_pi^t with dense matrix products
inline numvec power_series_visitation(const rermdp::TabularMDP& mdp, const numvec& pi_rowmajor,
                                      const numvec& start, int terms) {
    const Dense t = dense_kernel(mdp);
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    std::vector<numvec> p(ns, numvec(ns, 0.0));
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t sp = 0; sp < ns; ++sp) p[s][sp] += pi_rowmajor[s * na + a] * t[s][a][sp];
    numvec d(ns, 0.0), cur = start;
    double disc = 1.0;
    for (int k = 0; k < terms; ++k) {
        for (std::size_t s = 0; s < ns; ++s) d[s] += disc * cur[s];
        numvec next(ns, 0.0);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t sp = 0; sp < ns; ++sp) next[sp] += cur[s] * p[s][sp];
        cur = next;
        disc *= mdp.gamma();
    }
    return d;
}

inline double kl(const numvec& q, const numvec& ref) {
    double k = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] > 0.0) k += q[i] * std::log(q[i] / ref[i]);
    return k;
}

/// min over q = (x, 1-x) on a uniform grid of [0,1] of q.v subject to KL(q||ref) <= beta
/// (and optionally ref2 . ln q >= alpha)
struct Scan {
    double value = INFINITY;
    double q0 = 0.0;
};
inline Scan scan_two_point(const numvec& ref, const numvec& v, double beta, double step,
                           const numvec* ref2 = nullptr, double alpha = 0.0) {
    Scan best;
    const long n = std::lround(1.0 / step);
    for (long k = 0; k <= n; ++k) {
        const double x = static_cast<double>(k) / static_cast<double>(n);
        const numvec q{x, 1.0 - x};
        if (kl(q, ref) > beta) continue;
        if (ref2) {
            if (x <= 0.0 || x >= 1.0) continue;
            if ((*ref2)[0] * std::log(q[0]) + (*ref2)[1] * std::log(q[1]) < alpha) continue;
        }
        const double val = q[0] * v[0] + q[1] * v[1];
        if (val < best.value) best = {val, x};
    }
    return best;
}

/// discounted entropy-regularized return of one rollout truncated at `horizon`
inline double rollout(const rermdp::TabularMDP& mdp, const Dense& t, const numvec& pi, double eta,
                      std::size_t s, int horizon, std::mt19937_64& rng) {
    const std::size_t na = mdp.n_actions();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double ret = 0.0, disc = 1.0;
    for (int k = 0; k < horizon; ++k) {
        double r = u(rng), acc = 0.0;
        std::size_t a = 0;
        for (; a + 1 < na; ++a) {
            acc += pi[s * na + a];
            if (r < acc) break;
        }
        ret += disc * (mdp.reward(s, a) - eta * std::log(pi[s * na + a]));
        r = u(rng);
        acc = 0.0;
        std::size_t sp = 0;
        for (; sp + 1 < mdp.n_states(); ++sp) {
            acc += t[s][a][sp];
            if (r < acc) break;
        }
        s = sp;
        disc *= mdp.gamma();
    }
    return ret;
}

} // namespace oracle
