#include "rermdp/objectworld.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rermdp {

void ObjectworldSpec::require_valid() const {
    if (grid_size < 2) throw std::invalid_argument("objectworld: grid_size must be >= 2");
    if (n_colors < 1) throw std::invalid_argument("objectworld: n_colors must be >= 1");
    if (object_count() > grid_size * grid_size)
        throw std::invalid_argument("objectworld: more objects than cells");
    if (!(wind >= 0.0 && wind < 1.0)) throw std::invalid_argument("objectworld: wind must be in [0,1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("objectworld: gamma must be in [0,1)");
}

std::size_t Objectworld::feature_index(bool outer, std::size_t color, std::size_t distance) const {
    const std::size_t n = spec.grid_size - 1;
    return (outer ? spec.n_colors * n : 0) + color * n + (distance - 1);
}

namespace {

std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<prec_t>(n)), n - 1);
}

std::size_t move(std::size_t n, std::size_t x, std::size_t y, std::size_t action) {
    switch (action) {
    case 1: if (y > 0) --y; break;
    case 2: if (y + 1 < n) ++y; break;
    case 3: if (x > 0) --x; break;
    case 4: if (x + 1 < n) ++x; break;
    default: break;
    }
    return y * n + x;
}

} // namespace

Objectworld generate_objectworld(const ObjectworldSpec& spec) {
    spec.require_valid();
    const std::size_t n = spec.grid_size, ns = n * n, na = objectworld_actions;
    std::mt19937_64 rng(spec.seed);

    Objectworld world;
    world.spec = spec;

    // distinct cells by partial Fisher-Yates
    indvec cells(ns);
    for (std::size_t i = 0; i < ns; ++i) cells[i] = i;
    for (std::size_t i = 0; i < spec.object_count(); ++i) {
        std::swap(cells[i], cells[i + uniform_below(rng, ns - i)]);
        WorldObject obj;
        obj.x = cells[i] % n;
        obj.y = cells[i] / n;
        obj.inner_color = uniform_below(rng, spec.n_colors);
        obj.outer_color = uniform_below(rng, spec.n_colors);
        world.objects.push_back(obj);
    }

    Kernel kernel(ns * na);
    for (std::size_t s = 0; s < ns; ++s) {
        const std::size_t x = s % n, y = s / n;
        for (std::size_t a = 0; a < na; ++a) {
            numvec dense(ns, 0.0);
            for (std::size_t b = 0; b < na; ++b) {
                const prec_t p = a == b ? 1.0 - spec.wind : spec.wind / 4.0;
                if (p > 0.0) dense[move(n, x, y, b)] += p;
            }
            SparseDist& d = kernel[s * na + a];
            for (std::size_t t = 0; t < ns; ++t)
                if (dense[t] > 0.0) {
                    d.states.push_back(t);
                    d.probabilities.push_back(dense[t]);
                }
        }
    }

    const std::size_t dim = 2 * spec.n_colors * (n - 1);
    std::vector<numvec> phi(ns, numvec(dim, 0.0));
    for (std::size_t s = 0; s < ns; ++s) {
        const prec_t x = static_cast<prec_t>(s % n), y = static_cast<prec_t>(s / n);
        for (int outer = 0; outer < 2; ++outer) {
            for (std::size_t c = 0; c < spec.n_colors; ++c) {
                prec_t nearest = std::numeric_limits<prec_t>::infinity();
                for (const auto& obj : world.objects) {
                    if ((outer ? obj.outer_color : obj.inner_color) != c) continue;
                    nearest = std::min(nearest, std::hypot(x - static_cast<prec_t>(obj.x),
                                                           y - static_cast<prec_t>(obj.y)));
                }
                for (std::size_t d = 1; d < n; ++d)
                    if (nearest <= static_cast<prec_t>(d))
                        phi[s][world.feature_index(outer != 0, c, d)] = 1.0;
            }
        }
    }
    world.features = FeatureMap::state_only(na, phi);

    world.true_theta.assign(dim, 0.0);
    world.true_theta[world.feature_index(true, 0, std::min<std::size_t>(3, n - 1))] = 1.0;
    if (spec.n_colors >= 2)
        world.true_theta[world.feature_index(true, 1, std::min<std::size_t>(2, n - 1))] = -1.0;

    world.mdp = TabularMDP(ns, na, std::move(kernel), world.features.rewards(world.true_theta),
                           spec.gamma);
    world.mdp.require_valid();
    return world;
}

UncertaintySet build_kl_uncertainty(const TabularMDP& mdp, prec_t radius) {
    return UncertaintySet::kl_sa(mdp, radius);
}

std::string to_string(ExpertMode mode) { return mode == ExpertMode::soft ? "soft" : "hard"; }

ExpertMode expert_mode_from_string(const std::string& name) {
    if (name == "soft") return ExpertMode::soft;
    if (name == "hard") return ExpertMode::hard;
    throw std::invalid_argument("unknown expert mode '" + name + "' (expected soft or hard)");
}

GeneratedDemos generate_demonstrations(const TabularMDP& mdp, const UncertaintySet& u, prec_t eta,
                                       const DemoOptions& opts) {
    if (opts.n_paths == 0 || opts.length == 0)
        throw std::invalid_argument("generate_demonstrations: n_paths and length must be >= 1");
    SolverConfig cfg;
    cfg.eta = opts.mode == ExpertMode::hard ? hard_expert_eta : eta;
    cfg.epsilon = opts.epsilon;
    GeneratedDemos out;
    out.expert = robust_value_iteration(mdp, u, cfg).policy;

    std::mt19937_64 rng(opts.seed);
    out.demos.trajectories.reserve(opts.n_paths);
    for (std::size_t i = 0; i < opts.n_paths; ++i) {
        const std::size_t s0 = uniform_below(rng, mdp.n_states());
        out.demos.trajectories.push_back(sample_trajectory(mdp, out.expert, s0, opts.length, rng));
    }
    return out;
}

} // namespace rermdp
