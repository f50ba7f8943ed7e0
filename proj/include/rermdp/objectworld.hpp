#pragma once

#include "rermdp/irl.hpp"

namespace rermdp {

/**
 * N x N grid, state = y * N + x. Actions: 0 stay, 1 up (y-1), 2 down (y+1), 3 left (x-1),
 * 4 right (x+1). The intended move happens with probability 1 - wind, each of the other four
 * with wind / 4; moves into a wall leave the agent in place.
 */
struct ObjectworldSpec {
    std::size_t grid_size = 8;
    std::size_t n_colors = 2;
    /// 0 means grid_size objects
    std::size_t n_objects = 0;
    prec_t wind = 0.3;
    prec_t gamma = 0.9;
    std::uint64_t seed = 0;

    std::size_t object_count() const { return n_objects == 0 ? grid_size : n_objects; }
    void require_valid() const;
};

inline constexpr std::size_t objectworld_actions = 5;

struct WorldObject {
    std::size_t x, y;
    std::size_t inner_color, outer_color;
};

/**
 * Features: for kind in {inner, outer}, color c and d = 1..N-1, the indicator that the
 * Euclidean distance to the nearest object whose `kind` color is c is at most d.
 * Index = kind * C * (N-1) + c * (N-1) + (d-1).
 */
struct Objectworld {
    ObjectworldSpec spec;
    /// rewards already set to features . true_theta
    TabularMDP mdp;
    FeatureMap features;
    numvec true_theta;
    std::vector<WorldObject> objects;

    std::size_t feature_index(bool outer, std::size_t color, std::size_t distance) const;
};

/// Ground truth: +1 within distance min(3, N-1) of an outer color 0 object, -1 within
/// min(2, N-1) of an outer color 1 object (when C >= 2).
Objectworld generate_objectworld(const ObjectworldSpec& spec);

/// One relative-entropy ball of the given radius around every nominal (s,a) row.
UncertaintySet build_kl_uncertainty(const TabularMDP& mdp, prec_t radius);

enum class ExpertMode { soft, hard };

/// eta used for the hard (near-deterministic) expert
inline constexpr prec_t hard_expert_eta = 1e-6;

std::string to_string(ExpertMode mode);
ExpertMode expert_mode_from_string(const std::string& name);

struct DemoOptions {
    std::size_t n_paths = 128;
    std::size_t length = 8;
    ExpertMode mode = ExpertMode::soft;
    std::uint64_t seed = 0;
    prec_t epsilon = 1e-6;
};

struct GeneratedDemos {
    Demonstrations demos;
    /// the robust expert policy the demonstrations were sampled from
    SoftPolicy expert;
};

/**
 * Robust expert policy from (mdp, u) at eta (hard_expert_eta in hard mode), then n_paths
 * trajectories from uniformly drawn start states under the nominal dynamics.
 */
GeneratedDemos generate_demonstrations(const TabularMDP& mdp, const UncertaintySet& u, prec_t eta,
                                       const DemoOptions& opts);

} // namespace rermdp
