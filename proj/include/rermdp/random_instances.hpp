#pragma once

#include "rermdp/soft_dp.hpp"

#include <random>

namespace rermdp {

/// Distribution over n outcomes with every entry >= floor (before normalization).
numvec random_distribution(std::size_t n, std::mt19937_64& rng, prec_t floor = 0.02);

/**
 * Random MDP: each (s,a) row is supported on `support` distinct successors (all states when 0
 * or larger than n_states), rewards uniform in [0, 1).
 */
TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, prec_t gamma,
                      std::mt19937_64& rng, std::size_t support = 0);

} // namespace rermdp
