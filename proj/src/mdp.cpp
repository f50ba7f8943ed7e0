#include "rermdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rermdp {

TabularMDP::TabularMDP(const std::vector<std::vector<numvec>>& transitions,
                       const std::vector<numvec>& rewards, prec_t gamma)
    : n_states_(transitions.size()), n_actions_(transitions.empty() ? 0 : transitions[0].size()),
      gamma_(gamma) {
    kernel_.resize(n_states_ * n_actions_);
    rewards_.assign(n_states_ * n_actions_, 0.0);
    for (std::size_t s = 0; s < n_states_; ++s) {
        if (transitions[s].size() != n_actions_)
            throw std::invalid_argument("transitions: inconsistent action count at state " +
                                        std::to_string(s));
        if (s >= rewards.size() || rewards[s].size() != n_actions_)
            throw std::invalid_argument("rewards: shape does not match transitions");
        for (std::size_t a = 0; a < n_actions_; ++a) {
            const auto& row = transitions[s][a];
            SparseDist& dist = kernel_[cell(s, a)];
            for (std::size_t sn = 0; sn < row.size(); ++sn) {
                // negative entries are kept so validate_mdp can report them
                if (row[sn] != 0.0) {
                    dist.states.push_back(sn);
                    dist.probabilities.push_back(row[sn]);
                }
            }
            rewards_[cell(s, a)] = rewards[s][a];
        }
    }
}

TabularMDP::TabularMDP(std::size_t n_states, std::size_t n_actions, Kernel kernel,
                       numvec rewards, prec_t gamma)
    : n_states_(n_states), n_actions_(n_actions), kernel_(std::move(kernel)),
      rewards_(std::move(rewards)), gamma_(gamma) {
    if (kernel_.size() != n_states_ * n_actions_)
        throw std::invalid_argument("kernel size must equal n_states * n_actions");
    if (rewards_.size() != n_states_ * n_actions_)
        throw std::invalid_argument("reward size must equal n_states * n_actions");
}

TabularMDP TabularMDP::with_rewards(numvec rewards) const {
    if (rewards.size() != rewards_.size())
        throw std::invalid_argument("with_rewards: size mismatch");
    TabularMDP copy = *this;
    copy.rewards_ = std::move(rewards);
    return copy;
}

TabularMDP TabularMDP::with_gamma(prec_t gamma) const {
    TabularMDP copy = *this;
    copy.gamma_ = gamma;
    return copy;
}

std::size_t TabularMDP::max_support() const {
    std::size_t result = 0;
    for (const auto& d : kernel_) result = std::max(result, d.size());
    return result;
}

void TabularMDP::require_valid() const {
    const auto report = validate_mdp(*this);
    if (!report.passed()) throw std::invalid_argument("invalid MDP: " + report.summary());
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& g : global_issues) {
        out << (first ? "" : "; ") << g;
        first = false;
    }
    for (const auto& issue : issues) {
        out << (first ? "" : "; ") << "(s=" << issue.state << ", a=" << issue.action
            << "): " << issue.message;
        first = false;
    }
    return out.str();
}

ValidationReport validate_mdp(const TabularMDP& mdp) {
    ValidationReport report;
    if (mdp.n_states() == 0) report.global_issues.emplace_back("n_states must be positive");
    if (mdp.n_actions() == 0) report.global_issues.emplace_back("n_actions must be positive");
    if (!(mdp.gamma() >= 0.0 && mdp.gamma() < 1.0))
        report.global_issues.emplace_back("gamma must lie in [0, 1)");

    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const SparseDist& d = mdp.nominal(s, a);
            auto fail = [&](std::string msg) { report.issues.push_back({s, a, std::move(msg)}); };
            if (d.states.size() != d.probabilities.size()) {
                fail("support and probability lists differ in length");
                continue;
            }
            if (d.size() == 0) fail("empty support");
            prec_t total = 0.0;
            bool bad_entry = false;
            for (std::size_t i = 0; i < d.size(); ++i) {
                const prec_t p = d.probabilities[i];
                if (!std::isfinite(p)) {
                    fail("non-finite transition probability to s'=" +
                         std::to_string(d.states[i]));
                    bad_entry = true;
                } else if (p < 0.0) {
                    fail("negative transition probability to s'=" + std::to_string(d.states[i]));
                    bad_entry = true;
                } else if (p == 0.0) {
                    fail("support lists zero-probability successor s'=" +
                         std::to_string(d.states[i]));
                }
                if (d.states[i] >= mdp.n_states())
                    fail("successor index " + std::to_string(d.states[i]) + " out of range");
                total += p;
            }
            if (!bad_entry && d.size() > 0 && std::abs(total - 1.0) > 1e-12) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "transition row sums to " << total;
                fail(msg.str());
            }
            if (!std::isfinite(mdp.reward(s, a))) fail("non-finite reward");
        }
    }
    return report;
}

void SoftPolicy::require_valid() const {
    for (std::size_t s = 0; s < n_states_; ++s) {
        prec_t total = 0.0;
        for (std::size_t a = 0; a < n_actions_; ++a) {
            const prec_t p = (*this)(s, a);
            if (!(p >= 0.0) || !std::isfinite(p))
                throw std::invalid_argument("policy: invalid probability at state " +
                                            std::to_string(s));
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-10)
            throw std::invalid_argument("policy: row " + std::to_string(s) + " does not sum to 1");
    }
}

prec_t SoftPolicy::distance(const SoftPolicy& other) const {
    if (other.probs_.size() != probs_.size())
        throw std::invalid_argument("policy distance: shape mismatch");
    prec_t result = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i)
        result = std::max(result, std::abs(probs_[i] - other.probs_[i]));
    return result;
}

void SolverConfig::require_valid() const {
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("eta must be strictly positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("epsilon must be strictly positive");
    if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
}

prec_t sup_norm_diff(const numvec& a, const numvec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sup_norm_diff: size mismatch");
    prec_t result = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) result = std::max(result, std::abs(a[i] - b[i]));
    return result;
}

} // namespace rermdp
