#include "rermdp/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace rermdp::io {

namespace {

template <typename T>
T get(const json& doc, const char* key, const std::string& where) {
    if (!doc.is_object() || !doc.contains(key))
        throw InputError(where + ": missing field '" + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

} // namespace

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

TabularMDP mdp_from_json(const json& doc) {
    const std::string where = "mdp";
    const auto ns = get<std::size_t>(doc, "n_states", where);
    const auto na = get<std::size_t>(doc, "n_actions", where);
    const auto gamma = get<prec_t>(doc, "gamma", where);
    if (ns == 0 || na == 0) throw InputError("mdp: n_states and n_actions must be positive");

    const auto rewards = get<std::vector<numvec>>(doc, "rewards", where);
    if (rewards.size() != ns) throw InputError("mdp: rewards must have n_states rows");
    numvec flat;
    for (std::size_t s = 0; s < ns; ++s) {
        if (rewards[s].size() != na)
            throw InputError("mdp: rewards row " + std::to_string(s) + " must have n_actions entries");
        flat.insert(flat.end(), rewards[s].begin(), rewards[s].end());
    }

    const json& triplets = doc.contains("transitions") ? doc.at("transitions") : json();
    if (!triplets.is_array()) throw InputError("mdp: 'transitions' must be an array");
    std::vector<std::map<std::size_t, prec_t>> rows(ns * na);
    for (const auto& t : triplets) {
        if (!t.is_array() || t.size() != 4 || !t[0].is_number_integer() ||
            !t[1].is_number_integer() || !t[2].is_number_integer() || !t[3].is_number())
            throw InputError("mdp: each transition must be [s, a, s', p]");
        const auto s = t[0].get<long long>(), a = t[1].get<long long>(), sp = t[2].get<long long>();
        if (s < 0 || a < 0 || sp < 0 || static_cast<std::size_t>(s) >= ns ||
            static_cast<std::size_t>(a) >= na || static_cast<std::size_t>(sp) >= ns)
            throw InputError("mdp: transition " + t.dump() + " is out of range");
        const prec_t p = t[3].get<prec_t>();
        auto& row = rows[static_cast<std::size_t>(s) * na + static_cast<std::size_t>(a)];
        if (!row.emplace(static_cast<std::size_t>(sp), p).second)
            throw InputError("mdp: duplicate transition " + t.dump());
    }
    Kernel kernel(ns * na);
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (const auto& [sp, p] : rows[c]) {
            if (p == 0.0) continue;
            kernel[c].states.push_back(sp);
            kernel[c].probabilities.push_back(p);
        }
    return TabularMDP(ns, na, std::move(kernel), std::move(flat), gamma);
}

json mdp_to_json(const TabularMDP& mdp) {
    json rewards = json::array();
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        json row = json::array();
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) row.push_back(mdp.reward(s, a));
        rewards.push_back(row);
    }
    json transitions = json::array();
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const SparseDist& d = mdp.nominal(s, a);
            for (std::size_t i = 0; i < d.size(); ++i)
                transitions.push_back({s, a, d.states[i], d.probabilities[i]});
        }
    return {{"n_states", mdp.n_states()},
            {"n_actions", mdp.n_actions()},
            {"gamma", mdp.gamma()},
            {"rewards", rewards},
            {"transitions", transitions}};
}

namespace {

/// Reference over a support: accepts support-length or dense (n_states) vectors.
numvec project_reference(const numvec& ref, const SparseDist& support, std::size_t ns,
                         const std::string& where) {
    if (ref.size() == support.size()) return ref;
    if (ref.size() != ns)
        throw InputError(where + ": reference must have " + std::to_string(support.size()) +
                         " (support) or " + std::to_string(ns) + " entries");
    numvec out(support.size());
    numvec rest = ref;
    for (std::size_t i = 0; i < support.size(); ++i) {
        out[i] = ref[support.states[i]];
        rest[support.states[i]] = 0.0;
    }
    for (prec_t x : rest)
        if (x != 0.0) throw InputError(where + ": reference puts mass outside the nominal support");
    return out;
}

} // namespace

UncertaintySet uncertainty_from_json(const json& doc, const TabularMDP& mdp) {
    const std::string where = "uncertainty";
    UncertaintySet u;
    try {
        u.rectangularity = rectangularity_from_string(get<std::string>(doc, "rectangularity", where));
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (doc.contains("kl_radius")) {
        const auto beta = get<prec_t>(doc, "kl_radius", where);
        if (!(beta >= 0.0)) throw InputError("uncertainty: kl_radius must be >= 0");
        return u.rectangularity == Rectangularity::SA ? UncertaintySet::kl_sa(mdp, beta)
                                                      : UncertaintySet::kl_s(mdp, beta);
    }
    const json& cells = doc.contains("cells") ? doc.at("cells") : json();
    if (!cells.is_array()) throw InputError("uncertainty: 'cells' must be an array");
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const bool sa = u.rectangularity == Rectangularity::SA;
    const std::size_t expected = sa ? ns * na : ns;
    if (cells.size() != expected)
        throw InputError("uncertainty: expected " + std::to_string(expected) + " cells, found " +
                         std::to_string(cells.size()));

    for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::string cw = "uncertainty cell " + std::to_string(c);
        ConstraintBundle bundle;
        if (sa) {
            bundle.block_sizes = {mdp.kernel()[c].size()};
        } else {
            for (std::size_t a = 0; a < na; ++a) bundle.block_sizes.push_back(mdp.nominal(c, a).size());
        }
        const json& list = cells[c].is_object() && cells[c].contains("constraints")
                               ? cells[c].at("constraints") : json();
        if (!list.is_array() || list.empty())
            throw InputError(cw + ": needs a non-empty 'constraints' array");
        for (const auto& item : list) {
            KLBall ball;
            try {
                ball.kind = kl_kind_from_string(get<std::string>(item, "kind", cw));
            } catch (const std::invalid_argument& e) {
                throw InputError(cw + ": " + e.what());
            }
            ball.bound = get<prec_t>(item, "radius_or_level", cw);
            const auto ref = get<numvec>(item, "reference", cw);
            if (sa) {
                ball.reference = project_reference(ref, mdp.kernel()[c], ns, cw);
            } else {
                ball.block = 0;
                if (item.contains("action")) {
                    if (item.at("action") == "all") ball.block = all_blocks;
                    else ball.block = get<std::size_t>(item, "action", cw);
                }
                if (ball.block == all_blocks) {
                    if (ref.size() == bundle.n_variables()) {
                        ball.reference = ref;
                    } else {
                        if (ref.size() != na * ns)
                            throw InputError(cw + ": reference spanning all actions needs " +
                                             std::to_string(bundle.n_variables()) + " or " +
                                             std::to_string(na * ns) + " entries");
                        for (std::size_t a = 0; a < na; ++a) {
                            const numvec part(ref.begin() + static_cast<std::ptrdiff_t>(a * ns),
                                              ref.begin() + static_cast<std::ptrdiff_t>((a + 1) * ns));
                            const numvec proj = project_reference(part, mdp.nominal(c, a), ns, cw);
                            ball.reference.insert(ball.reference.end(), proj.begin(), proj.end());
                        }
                    }
                } else {
                    if (ball.block >= na) throw InputError(cw + ": action out of range");
                    ball.reference = project_reference(ref, mdp.nominal(c, ball.block), ns, cw);
                }
            }
            bundle.constraints.push_back(std::move(ball));
        }
        u.cells.push_back(std::move(bundle));
    }
    return u;
}

json uncertainty_to_json(const UncertaintySet& u) {
    json cells = json::array();
    for (const auto& bundle : u.cells) {
        json list = json::array();
        for (const auto& ball : bundle.constraints) {
            json item = {{"kind", to_string(ball.kind)},
                         {"reference", ball.reference},
                         {"radius_or_level", ball.bound}};
            if (u.rectangularity == Rectangularity::S) {
                if (ball.block == all_blocks) item["action"] = "all";
                else item["action"] = ball.block;
            }
            list.push_back(item);
        }
        cells.push_back({{"constraints", list}});
    }
    return {{"rectangularity", to_string(u.rectangularity)}, {"cells", cells}};
}

Demonstrations read_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    Demonstrations demos;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(where + ": " + e.what());
        }
        if (!doc.is_array()) throw InputError(where + ": expected [[s,a],...]");
        Trajectory t;
        for (const auto& step : doc) {
            if (!step.is_array() || step.size() != 2 || !step[0].is_number_unsigned() ||
                !step[1].is_number_unsigned())
                throw InputError(where + ": each step must be [s, a] with non-negative integers");
            t.steps.push_back({step[0].get<std::size_t>(), step[1].get<std::size_t>()});
        }
        demos.trajectories.push_back(std::move(t));
    }
    return demos;
}

std::string trajectories_to_jsonl(const Demonstrations& demos) {
    std::ostringstream out;
    for (const auto& t : demos.trajectories) {
        json line = json::array();
        for (const Step& st : t.steps) line.push_back({st.state, st.action});
        out << line.dump() << "\n";
    }
    return out.str();
}

json diagnostics_to_json(const Diagnostics& diag) {
    json bounds = json::object();
    for (const auto& [k, v] : diag.bounds) bounds[k] = v;
    return {{"iterations", diag.iterations},
            {"residuals", diag.residuals},
            {"eta", diag.eta},
            {"gamma", diag.gamma},
            {"epsilon", diag.epsilon},
            {"xi", diag.xi},
            {"stop_threshold", diag.stop_threshold},
            {"max_adversary_gap", diag.max_adversary_gap},
            {"bounds", bounds}};
}

json policy_to_json(const SoftPolicy& pi) {
    json rows = json::array();
    for (std::size_t s = 0; s < pi.n_states(); ++s) {
        json row = json::array();
        for (std::size_t a = 0; a < pi.n_actions(); ++a) row.push_back(pi(s, a));
        rows.push_back(row);
    }
    return rows;
}

SoftPolicy policy_from_json(const json& doc) {
    if (!doc.is_array() || doc.empty() || !doc[0].is_array() || doc[0].empty())
        throw InputError("policy: expected a non-empty [s][a] table");
    SoftPolicy pi(doc.size(), doc[0].size());
    for (std::size_t s = 0; s < doc.size(); ++s) {
        if (!doc[s].is_array() || doc[s].size() != pi.n_actions())
            throw InputError("policy: ragged row " + std::to_string(s));
        for (std::size_t a = 0; a < pi.n_actions(); ++a) pi(s, a) = doc[s][a].get<prec_t>();
    }
    return pi;
}

json features_sidecar(const Objectworld& world) {
    const auto& f = world.features;
    json per_state = json::array();
    for (std::size_t s = 0; s < f.n_states(); ++s) {
        const auto phi = f(s, 0);
        per_state.push_back(numvec(phi.begin(), phi.end()));
    }
    json objects = json::array();
    for (const auto& o : world.objects)
        objects.push_back({{"x", o.x}, {"y", o.y}, {"inner_color", o.inner_color},
                           {"outer_color", o.outer_color}});
    const auto& sp = world.spec;
    return {{"features", per_state},
            {"true_theta", world.true_theta},
            {"objects", objects},
            {"spec", {{"grid_size", sp.grid_size},
                      {"n_colors", sp.n_colors},
                      {"n_objects", sp.object_count()},
                      {"wind", sp.wind},
                      {"gamma", sp.gamma},
                      {"seed", sp.seed}}}};
}

} // namespace rermdp::io
