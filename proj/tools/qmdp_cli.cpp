// qmdp: command-line front end for the quantile MDP library.

#include "qmdp/qmdp.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace qmdp;

UncertainMdp with_gamma(const UncertainMdp& mdp, std::optional<double> gamma) {
    if (!gamma) return mdp;
    return UncertainMdp(*gamma, mdp.q(), mdp.scenarios(), mdp.probs());
}

std::string actions_str(const Policy& pol) {
    std::string s;
    for (std::size_t i = 0; i < pol.n_states(); ++i) s += (i ? " " : "") + std::to_string(pol.action(i));
    return s;
}

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

// Parses "HxAxS", e.g. "4x3x8".
RandomInstanceSpec parse_dims(const std::string& dims) {
    RandomInstanceSpec spec;
    if (std::sscanf(dims.c_str(), "%zux%zux%zu", &spec.n_states, &spec.n_actions, &spec.n_scenarios) != 3)
        throw Error("expected dimensions as HxAxS, got \"" + dims + "\"");
    return spec;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile-minimizing MDP solver"};
    app.require_subcommand(1);

    std::string instance, out, config, scenarios_csv, dims, variant = "QMDP_D_bigM", name, kind = "inventory";
    std::vector<double> alphas;
    double alpha = 0.9, time_limit = 3600.0, gamma_value = 0.99;
    std::uint64_t seed = 1;
    bool monotone = false, brute = false, basic = false, local_search = false;
    unsigned threads = 1;
    std::size_t reps = 1;
    std::vector<std::string> methods;
    std::string heuristic = "alg1", export_dir = ".", out_dir = ".";

    auto* gen = app.add_subcommand("generate", "Generate an instance file");
    gen->add_option("--kind", kind, "inventory or random")->check(CLI::IsMember({"inventory", "random"}));
    gen->add_option("--config", config, "Inventory configuration (JSON)");
    gen->add_option("--scenarios", scenarios_csv, "Scenario table (CSV) instead of sampled scenarios");
    gen->add_option("--dims", dims, "Random instance dimensions HxAxS");
    auto* gen_gamma = gen->add_option("--gamma", gamma_value, "Discount factor");
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--out", out, "Output instance file")->required();

    std::optional<double> gamma_override;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("instance", instance, "Instance file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--alpha", alpha, "Quantile level in (0,1]");
        sub->add_option("--gamma", gamma_override, "Override the instance discount factor");
    };

    auto* solve = app.add_subcommand("solve", "Solve exactly over deterministic policies");
    add_common(solve);
    solve->add_flag("--monotone", monotone, "Restrict to monotone policies");
    solve->add_flag("--brute", brute, "Enumerate all policies instead of branch-and-bound");
    solve->add_option("--time-limit", time_limit, "Seconds");
    solve->add_option("--threads", threads, "Search threads");
    solve->add_option("--out", out, "Result file (JSON)");

    auto* bounds = app.add_subcommand("bounds", "Per-scenario bounds and scenario fixing");
    add_common(bounds);
    bounds->add_option("--out", out, "CSV file (default stdout)");

    auto* heur = app.add_subcommand("heuristic", "Feasible policy from a heuristic");
    add_common(heur);
    heur->add_option("--method", heuristic, "alg1 or mv")->check(CLI::IsMember({"alg1", "mv"}));
    heur->add_flag("--local-search", local_search, "Single-swap improvement of the scenario selection");
    heur->add_option("--out", out, "Result file (JSON)");

    auto* exp_cmd = app.add_subcommand("export", "Write an LP-format model");
    add_common(exp_cmd);
    exp_cmd->add_option("--variant", variant, "QMDP_D_bigM, QMDP_D_McCormick, QMDP_R_McCormick_relax or QMDP_M_bigM");
    exp_cmd->add_flag("--basic", basic, "Use 1e6 for every big-M instead of computed bounds");
    exp_cmd->add_option("--name", name, "Instance name used in the file name");
    exp_cmd->add_option("--out", out_dir, "Output directory");

    auto* expt = app.add_subcommand("experiment", "Batch runs with CSV output");
    expt->add_option("--instance", instance, "Instance file")->check(CLI::ExistingFile);
    expt->add_option("--config", config, "Inventory configuration (JSON)");
    expt->add_option("--dims", dims, "Random instances HxAxS");
    auto* expt_gamma = expt->add_option("--gamma", gamma_value, "Discount factor for random instances");
    expt->add_option("--alpha", alphas, "Quantile levels")->expected(1, -1);
    expt->add_option("--method", methods, "exact, exact_monotone, brute, mv, alg1, bounds, export:<variant>")
        ->expected(1, -1)
        ->required();
    expt->add_option("--reps", reps, "Replications");
    expt->add_option("--seed", seed, "Base seed");
    expt->add_option("--time-limit", time_limit, "Seconds per exact solve");
    expt->add_option("--threads", threads, "Replications run concurrently");
    expt->add_option("--name", name, "Instance id in the report");
    expt->add_option("--export-dir", export_dir, "Directory for exported models");
    expt->add_option("--out", out, "CSV file (default stdout)");

    auto* val = app.add_subcommand("validate", "Check an instance file");
    val->add_option("instance", instance, "Instance file (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            UncertainMdp mdp;
            if (kind == "random") {
                auto spec = parse_dims(dims.empty() ? "4x3x4" : dims);
                spec.gamma = gamma_value;
                spec.seed = seed;
                mdp = random_instance(spec);
            } else {
                InventoryConfig cfg = config.empty() ? InventoryConfig{} : load_inventory_config(config);
                if (gen_gamma->count()) cfg.gamma = gamma_value;
                cfg.rng_seed = seed;
                mdp = scenarios_csv.empty() ? generate_instance(cfg)
                                            : build_instance(cfg, load_scenario_table(scenarios_csv, cfg.tail_eps));
            }
            save_instance(out, mdp);
            std::cout << "wrote " << out << ": " << mdp.n_states() << " states, " << mdp.n_actions()
                      << " actions, " << mdp.n_scenarios() << " scenarios\n";
            return 0;
        }

        if (*val) {
            const auto text = detail::read_file(instance);
            const auto issues = validate_instance_text(text);
            if (!issues.empty()) {
                for (const auto& d : issues) std::cerr << instance << ": " << d.str() << '\n';
                return 1;
            }
            const auto mdp = parse_instance(text);
            double lo = 1.0, hi = 1.0;
            for (const auto& sc : mdp.scenarios())
                for (std::size_t i = 0; i < mdp.n_states(); ++i)
                    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
                        double sum = 0.0;
                        for (double x : sc.row(i, a)) sum += x;
                        lo = std::min(lo, sum);
                        hi = std::max(hi, sum);
                    }
            const auto cache = compute_bounds(mdp, 1.0);
            const auto [bmin, bmax] = std::minmax_element(cache.b_under.begin(), cache.b_under.end());
            const auto [tmin, tmax] = std::minmax_element(cache.b_bar.begin(), cache.b_bar.end());
            std::cout << "OK: " << mdp.n_states() << " states, " << mdp.n_actions() << " actions, "
                      << mdp.n_scenarios() << " scenarios, gamma " << mdp.gamma() << '\n'
                      << "row sums in [" << lo << ", " << hi << "]\n"
                      << "scenario minimum cost in [" << *bmin << ", " << *bmax << "], maximum cost in [" << *tmin
                      << ", " << *tmax << "]\n";
            return 0;
        }

        if (*expt) {
            ExperimentSpec spec;
            const int sources = !instance.empty() + !config.empty() + !dims.empty();
            if (sources != 1) throw Error("experiment: give exactly one of --instance, --config, --dims");
            if (!instance.empty()) {
                spec.source = load_instance(instance);
                spec.instance_id = std::filesystem::path(instance).stem().string();
            } else if (!config.empty()) {
                auto cfg = load_inventory_config(config);
                if (expt_gamma->count()) cfg.gamma = gamma_value;
                spec.source = cfg;
                spec.instance_id = "inventory";
            } else {
                auto rs = parse_dims(dims);
                rs.gamma = gamma_value;
                spec.source = rs;
                spec.instance_id = "random_" + dims;
            }
            if (!name.empty()) spec.instance_id = name;
            if (!alphas.empty()) spec.alphas = alphas;
            spec.methods = methods;
            spec.replications = reps;
            spec.seed = seed;
            spec.time_limit = time_limit;
            spec.threads = threads;
            spec.export_dir = export_dir;
            const auto rows = run_experiment(spec);
            if (out.empty() || out == "-") {
                write_csv(std::cout, rows);
            } else {
                std::ofstream f(out);
                if (!f) throw Error("cannot open " + out + " for writing");
                write_csv(f, rows);
            }
            bool failed = false;
            for (const auto& r : rows)
                if (r.is_error()) {
                    std::cerr << "error: " << r.instance << " alpha=" << r.alpha << " " << r.method << ": "
                              << r.message << '\n';
                    failed = true;
                }
            return failed ? 1 : 0;
        }

        const auto mdp = with_gamma(load_instance(instance), gamma_override);
        const auto cache = compute_bounds(mdp, alpha);

        if (*solve) {
            SolveResult res;
            if (brute) {
                res = brute_force(mdp, alpha, monotone);
            } else {
                SolveOptions opt;
                opt.monotone = monotone;
                opt.time_limit = time_limit;
                opt.threads = threads;
                std::optional<double> ub;
                if (!monotone) ub = initial_solution(mdp, cache, alpha).value;
                res = solve_exact(mdp, alpha, fix_scenarios(cache, ub), opt);
            }
            std::cout << "status " << to_string(res.status) << "\nvalue " << std::setprecision(12) << res.value
                      << "\npolicy " << actions_str(res.policy) << "\nnodes " << res.nodes << "\ngap " << res.gap
                      << "\nb_l " << cache.b_l << "\nb_u " << cache.b_u << '\n';
            if (!out.empty())
                write_json(out, {{"status", to_string(res.status)}, {"value", res.value},
                                 {"policy", policy_to_json(res.policy)}, {"selected", res.selected},
                                 {"nodes", res.nodes}, {"gap", res.gap}, {"b_l", cache.b_l}, {"b_u", cache.b_u},
                                 {"wall_ms", res.wall_ms}});
            return res.status == SolveStatus::infeasible ? 1 : 0;
        }

        if (*bounds) {
            const auto fixed = fix_scenarios(cache);
            std::cerr << std::setprecision(12) << "b_l " << fixed.b_l << "\nb_u " << fixed.b_u << "\nforced0 mass "
                      << fixed.forced_mass(ScenarioFix::forced0) << "\nforced1 mass "
                      << fixed.forced_mass(ScenarioFix::forced1) << '\n';
            if (out.empty() || out == "-") {
                write_bounds_csv(std::cout, fixed);
            } else {
                std::ofstream f(out);
                if (!f) throw Error("cannot open " + out + " for writing");
                write_bounds_csv(f, fixed);
            }
            return 0;
        }

        if (*heur) {
            Policy pol;
            if (heuristic == "mv") {
                pol = mean_value_policy(mdp);
            } else {
                InitialSolutionOptions opt;
                opt.local_search = local_search;
                pol = initial_solution(mdp, cache, alpha, opt).policy;
            }
            const auto pv = var_of_policy(mdp, pol, alpha);
            std::cout << std::setprecision(12) << "value " << pv.value << "\npolicy " << actions_str(pol) << '\n';
            if (!out.empty())
                write_json(out, {{"method", heuristic}, {"value", pv.value}, {"policy", policy_to_json(pol)},
                                 {"scenario_costs", pv.costs}});
            return 0;
        }

        if (*exp_cmd) {
            const auto kind_parsed = parse_model_kind(variant);
            if (!kind_parsed) throw Error("unknown variant \"" + variant + "\"");
            const ModelVariant mv{*kind_parsed, !basic};
            const auto fixed = fix_scenarios(cache);
            const std::string inst = name.empty() ? std::filesystem::path(instance).stem().string() : name;
            std::filesystem::create_directories(out_dir);
            const auto path = std::filesystem::path(out_dir) / model_file_name(inst, mv, alpha);
            const auto cnt = export_model(path, mdp, alpha, mv, mv.uses_cache ? &fixed : nullptr);
            std::cout << "wrote " << path.string() << ": " << cnt.rows << " rows, " << cnt.variables
                      << " variables (" << cnt.binaries << " binary)\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
