// rermdp command-line front end: solve, irl, oracle-check, bench.

#include "rermdp/io.hpp"
#include "rermdp/random_instances.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace rermdp;
using io::json;
namespace fs = std::filesystem;

namespace {

/// A property check failed; `replay` holds the offending instance.
struct PropertyFailure : std::runtime_error {
    PropertyFailure(const std::string& what, json replay)
        : std::runtime_error(what), replay(std::move(replay)) {}
    json replay;
};

struct Common {
    std::string mdp_path;
    std::string uncertainty_path;
    double eta = 1.0;
    double epsilon = 1e-6;
    std::optional<double> gamma;
    std::uint64_t seed = 0;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--mdp", c.mdp_path, "MDP JSON file");
    cmd->add_option("--uncertainty", c.uncertainty_path, "uncertainty set JSON file");
    cmd->add_option("--eta", c.eta, "entropy regularization coefficient")->capture_default_str();
    cmd->add_option("--epsilon", c.epsilon, "target accuracy")->capture_default_str();
    cmd->add_option("--gamma", c.gamma, "discount factor override");
    cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
    cmd->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw io::InputError(std::string("--") + name + " must be a positive finite number");
}

TabularMDP load_mdp(const Common& c) {
    if (c.mdp_path.empty()) throw io::InputError("--mdp is required");
    TabularMDP mdp = io::mdp_from_json(io::read_json(c.mdp_path));
    if (c.gamma) mdp = mdp.with_gamma(*c.gamma);
    return mdp;
}

UncertaintySet load_uncertainty(const Common& c, const TabularMDP& mdp) {
    if (c.uncertainty_path.empty()) return UncertaintySet::nominal(mdp);
    return io::uncertainty_from_json(io::read_json(c.uncertainty_path), mdp);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::InputError("cannot create output directory '" + dir + "': " + ec.message());
}

json config_echo(double eta, double gamma, double epsilon, double xi) {
    return {{"eta", eta}, {"gamma", gamma}, {"epsilon", epsilon}, {"xi", xi}};
}

/// Runs task(i) for i in [0, n) on `jobs` threads.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& task) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) task(i);
    };
    std::vector<std::thread> pool;
    const unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- solve

int cmd_solve(const Common& c) {
    require_positive(c.eta, "eta");
    require_positive(c.epsilon, "epsilon");
    const TabularMDP mdp = load_mdp(c);
    mdp.require_valid();
    const UncertaintySet u = load_uncertainty(c, mdp);
    u.require_compatible(mdp);

    SolverConfig cfg;
    cfg.eta = c.eta;
    cfg.epsilon = c.epsilon;
    cfg.seed = c.seed;
    const RobustSolution sol = robust_value_iteration(mdp, u, cfg);
    const auto& d = sol.diagnostics;
    const json echo = config_echo(c.eta, mdp.gamma(), c.epsilon, d.xi);

    ensure_dir(c.out);
    io::write_json(fs::path(c.out) / "value.json", {{"config", echo}, {"value", sol.value}});
    io::write_json(fs::path(c.out) / "policy.json",
                   {{"config", echo}, {"policy", io::policy_to_json(sol.policy)}});
    io::write_json(fs::path(c.out) / "diagnostics.json", io::diagnostics_to_json(d));

    const json summary = {{"config", echo},
                          {"residual", d.last_residual()},
                          {"sweeps", d.iterations},
                          {"stop_threshold", d.stop_threshold},
                          {"max_adversary_gap", d.max_adversary_gap},
                          {"bounds", io::diagnostics_to_json(d)["bounds"]}};
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- irl

struct IrlArgs {
    std::size_t grid = 8;
    std::size_t colors = 2;
    std::size_t objects = 0;
    double wind = 0.3;
    std::size_t repetitions = 8;
    std::size_t samples = 128;
    std::size_t length = 8;
    std::vector<double> radii{0.0, 0.025, 0.05, 0.075, 0.1};
    std::size_t iterations = 60;
    double learning_rate = 0.5;
    std::string expert = "soft";
    bool transfer = true;
};

struct IrlRow {
    double epsilon;
    std::uint64_t seed;
    std::string method;
    double evd, evd_transfer;
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

int cmd_irl(const Common& c, const IrlArgs& a) {
    require_positive(c.eta, "eta");
    if (a.repetitions == 0 || a.samples == 0 || a.length == 0 || a.iterations == 0)
        throw io::InputError("repetitions, samples, length and iterations must be >= 1");
    if (a.radii.empty()) throw io::InputError("--radii needs at least one value");
    for (double r : a.radii)
        if (!(r >= 0.0)) throw io::InputError("--radii entries must be >= 0");
    const ExpertMode mode = [&] {
        try {
            return expert_mode_from_string(a.expert);
        } catch (const std::invalid_argument& e) {
            throw io::InputError(e.what());
        }
    }();

    ObjectworldSpec base;
    base.grid_size = a.grid;
    base.n_colors = a.colors;
    base.n_objects = a.objects;
    base.wind = a.wind;
    base.gamma = c.gamma.value_or(0.9);
    try {
        base.require_valid();
    } catch (const std::invalid_argument& e) {
        throw io::InputError(e.what());
    }
    const double expert_eta = mode == ExpertMode::hard ? hard_expert_eta : c.eta;

    const std::size_t n_tasks = a.radii.size() * a.repetitions;
    std::vector<std::vector<IrlRow>> rows(n_tasks);
    std::vector<std::string> errors(n_tasks);

    parallel_for(n_tasks, c.jobs, [&](std::size_t t) {
        const double radius = a.radii[t / a.repetitions];
        const std::uint64_t seed = c.seed + t % a.repetitions;
        try {
            ObjectworldSpec spec = base;
            spec.seed = seed;
            const Objectworld world = generate_objectworld(spec);
            spec.seed = seed + 1000003;
            const Objectworld fresh = generate_objectworld(spec);

            const UncertaintySet u = build_kl_uncertainty(world.mdp, radius);
            DemoOptions dopt;
            dopt.n_paths = a.samples;
            dopt.length = a.length;
            dopt.mode = mode;
            dopt.seed = seed;
            const GeneratedDemos demos = generate_demonstrations(world.mdp, u, c.eta, dopt);

            TrainOptions topt;
            topt.learning_rate = a.learning_rate;
            topt.iterations = a.iterations;
            topt.seed = seed;
            for (const bool robust : {false, true}) {
                const TrainResult tr =
                    train_maxent(demos.demos, world.mdp, world.features, robust ? &u : nullptr, c.eta, topt);
                IrlRow row{radius, seed, robust ? "robust_maxent" : "maxent", 0.0,
                           std::numeric_limits<double>::quiet_NaN()};
                row.evd = expected_value_difference(
                              world.mdp, learned_policy(world.mdp, world.features, tr.theta, expert_eta),
                              expert_eta).value;
                if (a.transfer)
                    row.evd_transfer =
                        expected_value_difference(
                            fresh.mdp, learned_policy(fresh.mdp, fresh.features, tr.theta, expert_eta),
                            expert_eta).value;
                rows[t].push_back(row);
            }
        } catch (const std::exception& e) {
            errors[t] = e.what();
            rows[t].clear();
        }
    });

    ensure_dir(c.out);
    std::ostringstream csv;
    csv << "epsilon,seed,method,evd,evd_transfer\n";
    json failures = json::array();
    std::size_t ok = 0;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        if (!errors[t].empty()) {
            failures.push_back({{"epsilon", a.radii[t / a.repetitions]},
                                {"seed", c.seed + t % a.repetitions},
                                {"error", errors[t]}});
            continue;
        }
        ++ok;
        for (const auto& r : rows[t])
            csv << fmt(r.epsilon) << "," << r.seed << "," << r.method << "," << fmt(r.evd) << ","
                << fmt(r.evd_transfer) << "\n";
    }
    io::write_text(fs::path(c.out) / "irl.csv", csv.str());

    std::ostringstream summary;
    summary << "epsilon,method,n,evd_mean,evd_se,evd_transfer_mean,evd_transfer_se\n";
    for (std::size_t e = 0; e < a.radii.size(); ++e) {
        for (const char* method : {"maxent", "robust_maxent"}) {
            numvec evd, transfer;
            for (std::size_t r = 0; r < a.repetitions; ++r)
                for (const auto& row : rows[e * a.repetitions + r])
                    if (row.method == method) {
                        evd.push_back(row.evd);
                        transfer.push_back(row.evd_transfer);
                    }
            auto stats = [](const numvec& x) -> std::pair<double, double> {
                if (x.empty()) return {std::nan(""), std::nan("")};
                double m = 0.0;
                for (double v : x) m += v;
                m /= static_cast<double>(x.size());
                if (x.size() < 2) return {m, 0.0};
                double ss = 0.0;
                for (double v : x) ss += (v - m) * (v - m);
                return {m, std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()))};
            };
            const auto [em, es] = stats(evd);
            const auto [tm, ts] = stats(transfer);
            summary << fmt(a.radii[e]) << "," << method << "," << evd.size() << "," << fmt(em) << ","
                    << fmt(es) << "," << fmt(tm) << "," << fmt(ts) << "\n";
        }
    }
    io::write_text(fs::path(c.out) / "summary.csv", summary.str());

    const json echo = {{"eta", c.eta},
                       {"expert_eta", expert_eta},
                       {"gamma", base.gamma},
                       {"grid_size", a.grid},
                       {"n_colors", a.colors},
                       {"n_objects", base.object_count()},
                       {"wind", a.wind},
                       {"repetitions", a.repetitions},
                       {"samples", a.samples},
                       {"length", a.length},
                       {"radii", a.radii},
                       {"iterations", a.iterations},
                       {"learning_rate", a.learning_rate},
                       {"expert", a.expert},
                       {"seed", c.seed},
                       {"failures", failures}};
    io::write_json(fs::path(c.out) / "config.json", echo);
    std::cout << json({{"completed", ok}, {"failed", n_tasks - ok}, {"config", echo}}).dump() << "\n";
    return ok == 0 ? 1 : 0;
}

// ---------------------------------------------------------------- oracle-check

struct OracleArgs {
    std::size_t instances = 50;
    double grid_step = 1e-3;
    double inject = 1e-3;
    double xi = 1e-8;
};

struct Check {
    std::string name;
    std::size_t instances = 0;
    double max_violation = -std::numeric_limits<double>::infinity();

    void observe(double violation, const std::function<json()>& replay) {
        ++instances;
        max_violation = std::max(max_violation, violation);
        if (violation > 0.0) throw PropertyFailure(name + " violated by " + fmt(violation), replay());
    }
    json report() const {
        return {{"name", name}, {"instances", instances}, {"max_violation", max_violation}};
    }
};

json bundle_json(const ConstraintBundle& b) {
    json cons = json::array();
    for (const auto& k : b.constraints)
        cons.push_back({{"kind", to_string(k.kind)}, {"reference", k.reference},
                        {"radius_or_level", k.bound}, {"block", k.block}});
    return {{"block_sizes", b.block_sizes}, {"constraints", cons}};
}

int cmd_oracle_check(const Common& c, const OracleArgs& o) {
    require_positive(c.eta, "eta");
    require_positive(o.grid_step, "grid-step");
    require_positive(o.xi, "xi");
    if (!(o.inject >= 0.0)) throw io::InputError("--inject must be >= 0");
    std::mt19937_64 rng(c.seed);
    std::vector<Check> done;

    std::optional<TabularMDP> fixture;
    std::optional<UncertaintySet> fixture_u;
    if (!c.mdp_path.empty()) {
        fixture = load_mdp(c);
        const ValidationReport report = validate_mdp(*fixture);
        if (!report.passed()) {
            json issues = json::array();
            for (const auto& i : report.issues)
                issues.push_back({{"state", i.state}, {"action", i.action}, {"message", i.message}});
            for (const auto& g : report.global_issues) issues.push_back({{"message", g}});
            throw PropertyFailure("MDP validation failed: " + report.summary(),
                                  {{"mdp", c.mdp_path}, {"issues", issues}});
        }
        fixture_u = c.uncertainty_path.empty() ? UncertaintySet::kl_sa(*fixture, 0.1)
                                               : load_uncertainty(c, *fixture);
        fixture_u->require_compatible(*fixture);
    }

    // bisection against the grid oracle
    Check bis{"bisection_vs_grid"};
    for (std::size_t i = 0; i < o.instances; ++i) {
        const std::size_t k = 2 + i % 2;
        const numvec ref = random_distribution(k, rng, 0.1);
        numvec v(k);
        for (auto& x : v) x = uniform01(rng) * 4.0 - 2.0;
        const double beta = 0.02 + 0.3 * uniform01(rng);
        const auto bundle = ConstraintBundle::kl_ball(ref, beta);
        const auto sol = worst_case_expectation_kl(ref, beta, v, o.xi);
        const auto brute = brute_force_worst_case(bundle, v, o.grid_step);
        bis.observe(std::abs(sol.value - brute.value) - (brute.tolerance + o.xi), [&] {
            return json{{"bundle", bundle_json(bundle)}, {"values", v}, {"solver", sol.value},
                        {"oracle", brute.value}};
        });
    }
    done.push_back(bis);

    // barrier with a relative-entropy and a likelihood constraint
    Check bar{"barrier_vs_grid"};
    for (std::size_t i = 0; i < o.instances; ++i) {
        const std::size_t k = 2 + i % 2;
        ConstraintBundle bundle;
        bundle.block_sizes = {k};
        const numvec r1 = random_distribution(k, rng, 0.1), r2 = random_distribution(k, rng, 0.1);
        bundle.constraints.push_back({KLKind::relative_entropy, r1, 0.05 + 0.2 * uniform01(rng), 0});
        KLBall lik{KLKind::likelihood, r2, 0.0, 0};
        lik.bound = lik.max_likelihood() - (0.05 + 0.2 * uniform01(rng));
        bundle.constraints.push_back(lik);
        if (!slater_point(bundle)) continue;
        numvec v(k);
        for (auto& x : v) x = uniform01(rng);
        const auto sol = worst_case_expectation_multi(bundle, v, o.xi);
        const auto brute = brute_force_worst_case(bundle, v, o.grid_step);
        bar.observe(std::abs(sol.value - brute.value) - (brute.tolerance + o.xi), [&] {
            return json{{"bundle", bundle_json(bundle)}, {"values", v}, {"solver", sol.value},
                        {"oracle", brute.value}};
        });
    }
    done.push_back(bar);

    // approximation bound with an injected adversary error
    Check inj{"injected_error_bound"};
    for (const double gamma : {0.5, 0.9}) {
        const TabularMDP mdp = fixture ? fixture->with_gamma(gamma) : random_mdp(4, 3, gamma, rng, 3);
        const UncertaintySet u = fixture_u ? *fixture_u : UncertaintySet::kl_sa(mdp, 0.1);
        if (u.rectangularity != Rectangularity::SA) continue;
        ValueFunction exact(mdp.n_states(), 0.0), loose = exact;
        for (std::size_t n = 1; n <= 30; ++n) {
            exact = robust_soft_bellman(mdp, u, exact, c.eta, 1e-10).value;
            BellmanOptions opts;
            std::mt19937_64 local(c.seed + n);
            numvec delta(mdp.n_states() * mdp.n_actions());
            for (auto& d : delta) d = uniform01(local) * std::max(0.0, o.inject - 2e-10);
            opts.injected_error = [&](std::size_t cell) { return delta[cell]; };
            loose = robust_soft_bellman(mdp, u, loose, c.eta, 1e-10, opts).value;
            const double bound = error_bounds(o.inject, gamma, n, c.eta, c.epsilon).accumulated_error;
            inj.observe(sup_norm_diff(exact, loose) - bound, [&] {
                return json{{"gamma", gamma}, {"n", n}, {"mdp", io::mdp_to_json(mdp)}};
            });
        }
    }
    done.push_back(inj);

    if (fixture) {
        Check con{"fixture_contraction"};
        const double xi = o.xi;
        for (std::size_t i = 0; i < o.instances; ++i) {
            ValueFunction v(fixture->n_states()), w(fixture->n_states());
            for (auto& x : v) x = uniform01(rng) * 10.0 - 5.0;
            for (auto& x : w) x = uniform01(rng) * 10.0 - 5.0;
            const auto tv = robust_soft_bellman(*fixture, *fixture_u, v, c.eta, xi).value;
            const auto tw = robust_soft_bellman(*fixture, *fixture_u, w, c.eta, xi).value;
            con.observe(sup_norm_diff(tv, tw) - fixture->gamma() * sup_norm_diff(v, w) - 4.0 * xi,
                        [&] { return json{{"v", v}, {"w", w}}; });
        }
        done.push_back(con);
    }

    json report = json::array();
    for (const auto& ch : done) report.push_back(ch.report());
    std::cout << json({{"passed", true}, {"checks", report},
                       {"config", config_echo(c.eta, fixture ? fixture->gamma() : 0.9, c.epsilon, o.xi)}})
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::vector<std::size_t> states{10, 25, 50};
    std::size_t actions = 4;
    std::size_t support = 5;
    double radius = 0.1;
    std::string rectangularity = "sa";
    double gamma = 0.9;
};

int cmd_bench(const Common& c, const BenchArgs& b) {
    require_positive(c.eta, "eta");
    require_positive(c.epsilon, "epsilon");
    Rectangularity rect;
    try {
        rect = rectangularity_from_string(b.rectangularity);
    } catch (const std::invalid_argument& e) {
        throw io::InputError(e.what());
    }
    const double gamma = c.gamma.value_or(b.gamma);
    std::mt19937_64 rng(c.seed);
    json results = json::array();
    for (const std::size_t ns : b.states) {
        const TabularMDP mdp = random_mdp(ns, b.actions, gamma, rng, b.support);
        const UncertaintySet u = rect == Rectangularity::SA ? UncertaintySet::kl_sa(mdp, b.radius)
                                                            : UncertaintySet::kl_s(mdp, b.radius);
        SolverConfig cfg;
        cfg.eta = c.eta;
        cfg.epsilon = c.epsilon;
        const auto t0 = std::chrono::steady_clock::now();
        const RobustSolution sol = robust_value_iteration(mdp, u, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        results.push_back({{"n_states", ns},
                           {"n_actions", b.actions},
                           {"sweeps", sol.diagnostics.iterations},
                           {"seconds", secs},
                           {"seconds_per_sweep", secs / static_cast<double>(sol.diagnostics.iterations)}});
    }
    std::cout << json({{"rectangularity", b.rectangularity},
                       {"radius", b.radius},
                       {"config", config_echo(c.eta, gamma, c.epsilon, value_accuracy_xi(c.epsilon, gamma))},
                       {"results", results}})
                     .dump(2)
              << "\n";
    return 0;
}

void print_error(const std::string& kind, const std::string& message, const json& extra = {}) {
    json err = {{"error", {{"kind", kind}, {"message", message}}}};
    if (!extra.is_null()) err["error"]["replay"] = extra;
    std::cerr << err.dump() << "\n";
}

} // namespace

// Flat keys in a config file belong to the subcommand being run.
class SectionDefault : public CLI::ConfigTOML {
  public:
    explicit SectionDefault(std::string section) : section_(std::move(section)) {}
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        if (section_.empty()) return items;
        for (auto& item : items)
            if (item.parents.empty()) item.parents = {section_};
        return items;
    }

  private:
    std::string section_;
};

// `rermdp solve --config f` is read as `rermdp --config f solve`.
void hoist_config(std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string file;
        std::size_t width = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            width = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            width = 1;
        } else {
            continue;
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i + width));
        args.insert(args.begin(), {"--config", file});
        return;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Robust entropy-regularized MDP solver"};
    app.set_config("--config", "", "TOML/INI file; flat keys apply to the subcommand, [command] sections also work");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    Common solve_c, irl_c, oracle_c, bench_c;
    IrlArgs irl_a;
    OracleArgs oracle_a;
    BenchArgs bench_a;

    auto* solve = app.add_subcommand("solve", "robust value iteration and policy extraction");
    add_common(solve, solve_c);

    auto* irl = app.add_subcommand("irl", "MaxEnt vs robust MaxEnt on Objectworld");
    add_common(irl, irl_c);
    irl->add_option("--grid", irl_a.grid)->capture_default_str();
    irl->add_option("--colors", irl_a.colors)->capture_default_str();
    irl->add_option("--objects", irl_a.objects, "0 means grid size")->capture_default_str();
    irl->add_option("--wind", irl_a.wind)->capture_default_str();
    irl->add_option("--repetitions", irl_a.repetitions)->capture_default_str();
    irl->add_option("--samples", irl_a.samples)->capture_default_str();
    irl->add_option("--length", irl_a.length)->capture_default_str();
    irl->add_option("--radii", irl_a.radii, "uncertainty radii to sweep")->delimiter(',')->capture_default_str();
    irl->add_option("--iterations", irl_a.iterations)->capture_default_str();
    irl->add_option("--learning-rate", irl_a.learning_rate)->capture_default_str();
    irl->add_option("--expert", irl_a.expert, "soft or hard")->capture_default_str();
    irl->add_flag("!--no-transfer", irl_a.transfer, "skip the transfer environment");

    auto* oracle = app.add_subcommand("oracle-check", "oracle agreement and bound checks");
    add_common(oracle, oracle_c);
    oracle->add_option("--instances", oracle_a.instances)->capture_default_str();
    oracle->add_option("--grid-step", oracle_a.grid_step)->capture_default_str();
    oracle->add_option("--inject", oracle_a.inject, "adversary error added to every cell")->capture_default_str();
    oracle->add_option("--xi", oracle_a.xi)->capture_default_str();

    auto* bench = app.add_subcommand("bench", "time robust value iteration on random MDPs");
    add_common(bench, bench_c);
    bench->add_option("--states", bench_a.states)->delimiter(',')->capture_default_str();
    bench->add_option("--actions", bench_a.actions)->capture_default_str();
    bench->add_option("--support", bench_a.support)->capture_default_str();
    bench->add_option("--radius", bench_a.radius)->capture_default_str();
    bench->add_option("--rectangularity", bench_a.rectangularity)->capture_default_str();

    std::vector<std::string> args(argv + 1, argv + argc);
    std::string chosen;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            ++i;
        } else if (args[i].rfind('-', 0) != 0) {
            chosen = args[i];
            break;
        }
    }
    hoist_config(args);
    app.config_formatter(std::make_shared<SectionDefault>(chosen));

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("input", e.what());
        return 2;
    }

    try {
        if (*solve) return cmd_solve(solve_c);
        if (*irl) return cmd_irl(irl_c, irl_a);
        if (*oracle) return cmd_oracle_check(oracle_c, oracle_a);
        if (*bench) return cmd_bench(bench_c, bench_a);
    } catch (const io::InputError& e) {
        print_error("input", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        print_error("input", e.what());
        return 2;
    } catch (const PropertyFailure& e) {
        print_error("property", e.what(), e.replay);
        return 1;
    } catch (const std::exception& e) {
        print_error("solver", e.what());
        return 1;
    }
    return 2;
}
