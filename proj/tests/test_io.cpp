#include "rermdp/io.hpp"
#include "rermdp/objectworld.hpp"
#include "rermdp/random_instances.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace rermdp;
using io::json;

namespace fs = std::filesystem;

namespace {

const fs::path fixtures = RERMDP_FIXTURES;

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "rermdp_test_io";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("mdp json: fixture loads and round-trips") {
    const auto mdp = io::mdp_from_json(io::read_json(fixtures / "three_state.json"));
    CHECK(mdp.n_states() == 3);
    CHECK(mdp.n_actions() == 2);
    CHECK(mdp.gamma() == 0.9);
    CHECK(mdp.reward(2, 1) == 0.8);
    CHECK(mdp.nominal(1, 0).size() == 3);
    CHECK(validate_mdp(mdp).passed());
    const auto again = io::mdp_from_json(io::mdp_to_json(mdp));
    CHECK(again.rewards() == mdp.rewards());
    for (std::size_t c = 0; c < 6; ++c) {
        CHECK(again.kernel()[c].states == mdp.kernel()[c].states);
        CHECK(again.kernel()[c].probabilities == mdp.kernel()[c].probabilities);
    }
}

TEST_CASE("mdp json: malformed documents raise input errors") {
    json doc = io::read_json(fixtures / "three_state.json");
    json dup = doc;
    dup["transitions"].push_back({0, 0, 0, 0.1});
    CHECK_THROWS_AS(io::mdp_from_json(dup), io::InputError);
    json range = doc;
    range["transitions"].push_back({0, 5, 0, 0.1});
    CHECK_THROWS_AS(io::mdp_from_json(range), io::InputError);
    json missing = doc;
    missing.erase("gamma");
    CHECK_THROWS_AS(io::mdp_from_json(missing), io::InputError);
    json shape = doc;
    shape["rewards"].erase(0);
    CHECK_THROWS_AS(io::mdp_from_json(shape), io::InputError);
    CHECK_THROWS_AS(io::read_json(fixtures / "no_such_file.json"), io::InputError);
}

TEST_CASE("mdp json: a corrupted row loads but fails validation at its cell") {
    const auto mdp = io::mdp_from_json(io::read_json(fixtures / "corrupted_row.json"));
    const auto report = validate_mdp(mdp);
    REQUIRE_FALSE(report.passed());
    CHECK(report.issues.front().state == 0);
    CHECK(report.issues.front().action == 0);
}

TEST_CASE("uncertainty json: fixtures, shorthand and round trip") {
    const auto mdp = io::mdp_from_json(io::read_json(fixtures / "three_state.json"));
    const auto sa = io::uncertainty_from_json(io::read_json(fixtures / "three_state_kl.json"), mdp);
    CHECK(sa.rectangularity == Rectangularity::SA);
    CHECK(sa.cells.size() == 6);
    CHECK(sa.max_radius() == 0.1);

    const auto s = io::uncertainty_from_json(io::read_json(fixtures / "three_state_kl_s.json"), mdp);
    CHECK(s.rectangularity == Rectangularity::S);
    REQUIRE(s.cells.size() == 3);
    CHECK(s.cells[0].constraints.size() == 3);
    CHECK(s.cells[0].constraints[2].block == all_blocks);
    CHECK_NOTHROW(s.require_compatible(mdp));

    const auto short_form = io::uncertainty_from_json({{"rectangularity", "sa"}, {"kl_radius", 0.1}}, mdp);
    for (std::size_t c = 0; c < 6; ++c)
        CHECK(short_form.cells[c].constraints[0].reference == sa.cells[c].constraints[0].reference);

    const auto back = io::uncertainty_from_json(io::uncertainty_to_json(s), mdp);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(back.cells[c].constraints[j].reference == s.cells[c].constraints[j].reference);
            CHECK(back.cells[c].constraints[j].bound == s.cells[c].constraints[j].bound);
            CHECK(back.cells[c].constraints[j].block == s.cells[c].constraints[j].block);
        }
}

TEST_CASE("uncertainty json: dense references and shape errors") {
    const auto mdp = io::mdp_from_json(io::read_json(fixtures / "three_state.json"));
    json doc = io::read_json(fixtures / "three_state_kl.json");
    // full-length reference over all states for cell (0,0)
    doc["cells"][0]["constraints"][0]["reference"] = {0.7, 0.3, 0.0};
    const auto u = io::uncertainty_from_json(doc, mdp);
    CHECK(u.cells[0].constraints[0].reference == numvec{0.7, 0.3});

    json bad = io::read_json(fixtures / "three_state_kl.json");
    bad["cells"].erase(0);
    CHECK_THROWS_AS(io::uncertainty_from_json(bad, mdp), io::InputError);
    json wrong_len = io::read_json(fixtures / "three_state_kl.json");
    wrong_len["cells"][0]["constraints"][0]["reference"] = {0.5, 0.25, 0.25, 0.0};
    CHECK_THROWS_AS(io::uncertainty_from_json(wrong_len, mdp), io::InputError);
    json kind = io::read_json(fixtures / "three_state_kl.json");
    kind["rectangularity"] = "sas";
    CHECK_THROWS(io::uncertainty_from_json(kind, mdp));
}

TEST_CASE("trajectories: JSON lines round trip") {
    Demonstrations d;
    d.trajectories.push_back({{{0, 1}, {2, 0}}});
    d.trajectories.push_back({{{1, 1}}});
    const fs::path path = temp_dir() / "demos.jsonl";
    io::write_text(path, io::trajectories_to_jsonl(d));
    const auto back = io::read_trajectories(path);
    CHECK(back.trajectories == d.trajectories);

    io::write_text(path, "[[0,1],[2]]\n");
    CHECK_THROWS_AS(io::read_trajectories(path), io::InputError);
}

TEST_CASE("policy and diagnostics serialization") {
    SoftPolicy pi(2, 2);
    pi(0, 0) = 0.25, pi(0, 1) = 0.75, pi(1, 0) = 1.0;
    const auto back = io::policy_from_json(io::policy_to_json(pi));
    CHECK(back.data() == pi.data());

    Diagnostics d;
    d.iterations = 2;
    d.residuals = {0.5, 0.1};
    d.xi = 1e-3;
    d.bounds["policy_error"] = 0.2;
    const json j = io::diagnostics_to_json(d);
    CHECK(j["iterations"] == 2);
    CHECK(j["residuals"].size() == 2);
    CHECK(j["bounds"]["policy_error"] == 0.2);
    CHECK(j["xi"] == 1e-3);
}

TEST_CASE("features sidecar echoes the spec and the weights") {
    ObjectworldSpec spec;
    spec.grid_size = 3;
    const auto w = generate_objectworld(spec);
    const json side = io::features_sidecar(w);
    CHECK(side["features"].size() == 9);
    CHECK(side["features"][0].size() == w.features.dim());
    CHECK(side["true_theta"].get<numvec>() == w.true_theta);
    CHECK(side["spec"]["grid_size"] == 3);
}

TEST_CASE("write_json ends with a newline and reads back") {
    const fs::path path = temp_dir() / "doc.json";
    io::write_json(path, {{"a", 1}});
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.back() == '\n');
    CHECK(io::read_json(path)["a"] == 1);
}
