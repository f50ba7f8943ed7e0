#pragma once

#include "rermdp/mdp.hpp"

#include <map>
#include <string>

namespace rermdp {

/// Per-run record of an iterative solve. `bounds` holds named theoretical bound values
/// (e.g. "accumulated_error", "policy_error") evaluated from the run's parameters.
struct Diagnostics {
    std::size_t iterations = 0;
    numvec residuals;
    prec_t eta = 0.0;
    prec_t gamma = 0.0;
    prec_t epsilon = 0.0;
    /// requested inner accuracy
    prec_t xi = 0.0;
    /// sweep stops once the sup-norm residual drops to this value
    prec_t stop_threshold = 0.0;
    /// largest certified adversary gap actually observed
    prec_t max_adversary_gap = 0.0;
    std::map<std::string, prec_t> bounds;

    prec_t last_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

} // namespace rermdp
