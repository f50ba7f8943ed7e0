#pragma once

#include "rermdp/mdp.hpp"

#include <optional>
#include <string>
#include <variant>

namespace rermdp {

enum class KLKind {
    /// sum_i q_i ln(q_i / ref_i) <= bound
    relative_entropy,
    /// sum_i ref_i ln q_i >= bound
    likelihood,
};

std::string to_string(KLKind kind);
KLKind kl_kind_from_string(const std::string& name);

/// Marks a constraint that spans every block of a bundle.
inline constexpr std::size_t all_blocks = static_cast<std::size_t>(-1);

/**
 * One KL-type constraint. The reference is indexed like the variables it covers: the positions
 * of `block`, or the concatenation of all blocks when block == all_blocks. Every block of the
 * reference sums to one.
 */
struct KLBall {
    KLKind kind = KLKind::relative_entropy;
    numvec reference;
    /// radius beta for relative entropy, level alpha for likelihood
    prec_t bound = 0.0;
    std::size_t block = 0;

    /// sum_i ref_i ln ref_i, the largest feasible likelihood level
    prec_t max_likelihood() const;
};

/**
 * Constraints over one decision variable made of `block_sizes.size()` stacked distributions
 * (a single block for an (s,a) cell, one block per action for an s cell).
 */
struct ConstraintBundle {
    indvec block_sizes;
    std::vector<KLBall> constraints;

    std::size_t n_variables() const;
    std::size_t block_offset(std::size_t block) const;

    /// Throws std::invalid_argument when shapes, references or bounds are malformed.
    void require_well_formed() const;

    /// True when the bundle is exactly one relative-entropy ball per block (or a single ball),
    /// so a linear objective decomposes into independent bisection solves.
    bool separable_relative_entropy() const;

    /// Single-block bundle holding one relative-entropy ball.
    static ConstraintBundle kl_ball(numvec reference, prec_t beta);
};

/// Value of constraint j at x: positive means violated (f_j(x) <= 0 is feasible).
prec_t constraint_violation(const ConstraintBundle& bundle, std::size_t j, const numvec& x);

struct AdversarySolution {
    /// worst-case distribution(s), stacked by block
    numvec q_bar;
    /// objective at q_bar (an upper bound on the optimum)
    prec_t value = 0.0;
    /// certified: value - optimum <= gap
    prec_t gap = 0.0;
    /// dual multipliers, one per constraint
    numvec dual;
    std::size_t iterations = 0;
};

/// Raised when a bundle has no strictly feasible point (and is not a singleton).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the requested certificate is not reached within the iteration budget.
class CertificateError : public std::runtime_error {
public:
    CertificateError(const std::string& what, prec_t achieved)
        : std::runtime_error(what), achieved_gap(achieved) {}
    prec_t achieved_gap;
};

/**
 * min_q E_q[values] over {q : KL(q || reference) <= beta}, restricted to supp(reference).
 *
 * Bisection (geometric in lambda) on the sign of KL(q_lambda || ref) - beta where
 * q_lambda ∝ ref * exp(-values / lambda) is the maximizer of the concave dual
 * g(lambda) = -lambda beta - lambda ln sum_i ref_i exp(-values_i / lambda).
 * The upper end of the bracket is always primal feasible and its certified gap is
 * lambda (beta - KL(q_lambda || ref)). When the minimizers of `values` already fit inside the
 * ball the solution is exact: mass is split over them in proportion to the reference.
 *
 * `warm_lambda` (a previous dual) only narrows the initial bracket.
 */
AdversarySolution worst_case_expectation_kl(const numvec& reference, prec_t beta,
                                            const numvec& values, prec_t xi,
                                            std::optional<prec_t> warm_lambda = std::nullopt);

AdversarySolution worst_case_expectation_kl(const KLBall& ball, const numvec& values, prec_t xi);

/// Options for the log-barrier Newton solver.
struct BarrierOptions {
    prec_t t_initial = 1.0;
    prec_t t_growth = 4.0;
    prec_t newton_tol = 1e-10;
    std::size_t max_newton = 200;
    std::size_t max_outer = 80;
};

/**
 * min_x c.x over every constraint of the bundle simultaneously (x one distribution per block).
 * Solved by a log-barrier method with equality-constrained Newton centering. The gap is
 * certified by evaluating the Lagrange dual function at the central-path multipliers; the
 * dual is separable per coordinate and is minimized exactly.
 */
AdversarySolution worst_case_expectation_multi(const ConstraintBundle& bundle,
                                               const numvec& values, prec_t xi,
                                               const BarrierOptions& opts = {});

/// Coefficients of z(a, s | V, q) = offset_a + sum_i weight_{a,i} q_{a,i}, stacked by block.
struct ExponentialObjective {
    numvec offsets;
    numvec weights;
    prec_t eta = 1.0;

    /// eta ln sum_a exp(z_a(x) / eta)
    prec_t log_value(const ConstraintBundle& bundle, const numvec& x) const;
};

/**
 * min_q sum_a exp(z_a(q)/eta) over the bundle. Solved in the log domain: the returned
 * `value` is eta ln(sum_a exp(z_a(q_bar)/eta)) and `gap` certifies it against the optimum of
 * the same log-domain quantity. The certificate uses the linearization of the convex
 * log-sum-exp at q_bar together with the separable Lagrange dual.
 */
AdversarySolution worst_case_exponential_s(const ConstraintBundle& bundle,
                                           const ExponentialObjective& objective, prec_t xi,
                                           const BarrierOptions& opts = {});

/// Objective for the brute-force oracle.
using OracleObjective = std::variant<numvec, ExponentialObjective>;

struct BruteForceResult {
    prec_t value = std::numeric_limits<prec_t>::infinity();
    numvec argmin;
    std::size_t points_evaluated = 0;
    std::size_t points_feasible = 0;
    /// Lipschitz constant (sup-norm of the objective gradient over the simplex) times the step
    prec_t tolerance = 0.0;
};

/// Largest total number of variables the grid oracle accepts.
inline constexpr std::size_t brute_force_max_support = 4;

/**
 * Exhaustive grid over every block simplex with spacing grid_step (1/grid_step must be an
 * integer within 1e-9). Exponential objectives are reported in the log domain like
 * worst_case_exponential_s. Test oracle only.
 */
BruteForceResult brute_force_worst_case(const ConstraintBundle& bundle,
                                        const OracleObjective& objective, prec_t grid_step);

/// Strictly feasible point built from reference mixtures, or nullopt. Singletons (radius 0)
/// have no strictly feasible point and are handled separately by the solvers.
std::optional<numvec> slater_point(const ConstraintBundle& bundle);

} // namespace rermdp
