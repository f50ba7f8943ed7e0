#include "rermdp/random_instances.hpp"

#include <algorithm>

namespace rermdp {

numvec random_distribution(std::size_t n, std::mt19937_64& rng, prec_t floor) {
    numvec p(n);
    prec_t total = 0.0;
    for (prec_t& x : p) {
        x = floor + uniform01(rng);
        total += x;
    }
    for (prec_t& x : p) x /= total;
    return p;
}

TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, prec_t gamma,
                      std::mt19937_64& rng, std::size_t support) {
    const std::size_t k = support == 0 ? n_states : std::min(support, n_states);
    Kernel kernel(n_states * n_actions);
    numvec rewards(n_states * n_actions);
    indvec order(n_states);
    for (std::size_t c = 0; c < kernel.size(); ++c) {
        for (std::size_t i = 0; i < n_states; ++i) order[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<prec_t>(n_states - i)),
                                        n_states - i - 1);
            std::swap(order[i], order[j]);
        }
        indvec chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(chosen.begin(), chosen.end());
        kernel[c].states = chosen;
        kernel[c].probabilities = random_distribution(k, rng);
        rewards[c] = uniform01(rng);
    }
    return TabularMDP(n_states, n_actions, std::move(kernel), std::move(rewards), gamma);
}

} // namespace rermdp
