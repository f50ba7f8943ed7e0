#include <json.hpp>

#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path cli = RERMDP_CLI;
const fs::path fixtures = RERMDP_FIXTURES;

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rermdp_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Run run(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = cli.string() + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string fx(const std::string& name) { return (fixtures / name).string(); }

} // namespace

TEST_CASE("solve matches the high-precision golden files") {
    for (const auto& [unc, golden] : {std::pair{std::string("three_state_kl.json"), std::string("three_state_kl.json")},
                                      std::pair{std::string(""), std::string("three_state_nominal.json")}}) {
        const auto dir = scratch("golden_" + golden);
        std::string args = "solve --mdp " + fx("three_state.json") + " --epsilon 1e-9 --out " + dir.string();
        if (!unc.empty()) args += " --uncertainty " + fx(unc);
        const Run r = run(args, dir);
        REQUIRE(r.code == 0);
        const json ref = json::parse(slurp(fixtures / "golden" / golden));
        const json value = json::parse(slurp(dir / "value.json"));
        const json policy = json::parse(slurp(dir / "policy.json"));
        for (std::size_t s = 0; s < 3; ++s) {
            CHECK(std::abs(value["value"][s].get<double>() - ref["value"][s].get<double>()) <= 1e-8);
            for (std::size_t a = 0; a < 2; ++a)
                CHECK(std::abs(policy["policy"][s][a].get<double>() -
                               ref["policy"][s][a].get<double>()) <= 1e-8);
        }
        const json summary = json::parse(r.out);
        for (const char* key : {"eta", "gamma", "epsilon", "xi"}) CHECK(summary["config"].contains(key));
        CHECK(summary["residual"].get<double>() <= summary["stop_threshold"].get<double>());
    }
}

TEST_CASE("solve with zero radii writes the nominal files byte for byte") {
    const auto a = scratch("radii0"), b = scratch("nominal");
    REQUIRE(run("solve --mdp " + fx("three_state.json") + " --uncertainty " + fx("three_state_kl0.json") +
                    " --out " + a.string(), a).code == 0);
    REQUIRE(run("solve --mdp " + fx("three_state.json") + " --out " + b.string(), b).code == 0);
    for (const char* f : {"value.json", "policy.json", "diagnostics.json"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("solve is deterministic and runs the s-rectangular fixture") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::string base = "solve --mdp " + fx("three_state.json") + " --uncertainty " + fx("three_state_kl_s.json");
    REQUIRE(run(base + " --out " + a.string(), a).code == 0);
    REQUIRE(run(base + " --out " + b.string(), b).code == 0);
    for (const char* f : {"value.json", "policy.json", "diagnostics.json"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("input errors exit with code 2 and a JSON error naming the problem") {
    const auto dir = scratch("errors");
    const std::string missing = (fixtures / "does_not_exist.json").string();
    const Run r = run("solve --mdp " + missing + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
    const json err = json::parse(r.err);
    CHECK(err["error"]["kind"] == "input");
    CHECK(err["error"]["message"].get<std::string>().find(missing) != std::string::npos);

    CHECK(run("solve --mdp " + fx("three_state.json") + " --eta -1 --out " + dir.string(), dir).code == 2);
    CHECK(run("solve --bogus-flag", dir).code == 2);
    CHECK(run("", dir).code == 2);
}

TEST_CASE("flags can come from a config file") {
    const auto a = scratch("config_a"), b = scratch("config_b");
    {
        std::ofstream cfg(a / "run.toml");
        cfg << "eta = 0.5\nepsilon = 1e-7\n";
    }
    REQUIRE(run("solve --config " + (a / "run.toml").string() + " --mdp " + fx("three_state.json") + " --out " +
                    a.string(), a).code == 0);
    REQUIRE(run("solve --eta 0.5 --epsilon 1e-7 --mdp " + fx("three_state.json") + " --out " + b.string(), b).code == 0);
    CHECK(slurp(a / "value.json") == slurp(b / "value.json"));
}

TEST_CASE("oracle-check passes on the fixtures, with injected error, and fails on a corrupted row") {
    const auto dir = scratch("oracle");
    Run ok = run("oracle-check --instances 20 --mdp " + fx("three_state.json") + " --uncertainty " +
                     fx("three_state_kl.json"), dir);
    CHECK(ok.code == 0);
    CHECK(json::parse(ok.out)["passed"] == true);

    CHECK(run("oracle-check --instances 10 --inject 1e-2", dir).code == 0);

    const Run bad = run("oracle-check --mdp " + fx("corrupted_row.json"), dir);
    CHECK(bad.code == 1);
    const std::string msg = json::parse(bad.err)["error"]["message"];
    CHECK(msg.find("s=0") != std::string::npos);
    CHECK(msg.find("a=0") != std::string::npos);
}

TEST_CASE("irl smoke run emits well-formed CSV quickly and deterministically") {
    const auto a = scratch("irl_a"), b = scratch("irl_b");
    const std::string args = "irl --grid 4 --repetitions 2 --radii 0,0.05 --iterations 20 --jobs 2";
    const auto t0 = std::chrono::steady_clock::now();
    const Run r = run(args + " --out " + a.string(), a);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 60.0);

    std::istringstream csv(slurp(a / "irl.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epsilon,seed,method,evd,evd_transfer");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::size_t commas = 0;
        for (char ch : line) commas += ch == ',';
        CHECK(commas == 4);
        CHECK((line.find(",maxent,") != std::string::npos || line.find(",robust_maxent,") != std::string::npos));
    }
    CHECK(rows == 2 * 2 * 2);
    CHECK(slurp(a / "summary.csv").rfind("epsilon,method,n,evd_mean,evd_se,evd_transfer_mean,evd_transfer_se", 0) == 0);
    CHECK(json::parse(slurp(a / "config.json")).contains("eta"));

    REQUIRE(run(args + " --out " + b.string(), b).code == 0);
    CHECK(slurp(a / "irl.csv") == slurp(b / "irl.csv"));
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
}

TEST_CASE("bench reports timings") {
    const auto dir = scratch("bench");
    const Run r = run("bench --states 5,10 --actions 2 --support 3", dir);
    REQUIRE(r.code == 0);
    CHECK(!r.out.empty());
}
