#pragma once

#include "rermdp/objectworld.hpp"

#include <json.hpp>

#include <filesystem>

namespace rermdp::io {

using nlohmann::json;

/// Malformed or missing input (the CLI maps it to exit code 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// {n_states, n_actions, gamma, rewards [s][a], transitions [[s,a,s',p],...]}.
/// Entries with p == 0 are skipped; nothing else is checked beyond shapes (see validate_mdp).
TabularMDP mdp_from_json(const json& doc);
json mdp_to_json(const TabularMDP& mdp);

/**
 * {rectangularity: "sa"|"s", cells: [{constraints: [{kind, reference, radius_or_level,
 * action?}]}]}. A reference may list the nominal support entries or all n_states entries.
 * "action" picks the block of an s-rectangular cell ("all" spans the cell). The shorthand
 * {rectangularity, kl_radius} builds one ball per nominal row.
 */
UncertaintySet uncertainty_from_json(const json& doc, const TabularMDP& mdp);
json uncertainty_to_json(const UncertaintySet& u);

/// One trajectory per line: [[s,a],...].
Demonstrations read_trajectories(const std::filesystem::path& path);
std::string trajectories_to_jsonl(const Demonstrations& demos);

json diagnostics_to_json(const Diagnostics& diag);
json policy_to_json(const SoftPolicy& pi);
SoftPolicy policy_from_json(const json& doc);

/// Per-state feature vectors, true theta and the generating spec.
json features_sidecar(const Objectworld& world);

} // namespace rermdp::io
