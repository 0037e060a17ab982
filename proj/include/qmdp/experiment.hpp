#pragma once

// Batch experiments: instances x alphas x methods, one CSV row per run plus
// mean/max rows over replications.

#include "qmdp/exact_solver.hpp"
#include "qmdp/heuristics.hpp"
#include "qmdp/inventory.hpp"
#include "qmdp/milp_export.hpp"
#include "qmdp/preprocess.hpp"
#include "qmdp/random.hpp"

#include <filesystem>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <variant>

namespace qmdp {

/// Where each replication's instance comes from. Generators are reseeded with
/// seed + replication index; a fixed instance is reused as is.
using InstanceSource = std::variant<UncertainMdp, InventoryConfig, RandomInstanceSpec>;

struct ExperimentSpec {
    std::string instance_id = "instance";
    InstanceSource source;
    numvec alphas{0.9};
    std::vector<std::string> methods{"exact"};
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    double time_limit = 3600.0;
    unsigned threads = 1;                 ///< replications run concurrently
    std::filesystem::path export_dir = "."; ///< destination of export:<variant> models

    void validate() const {
        if (methods.empty()) throw Error("experiment: no methods given");
        if (alphas.empty()) throw Error("experiment: no alpha values given");
        for (double a : alphas) check_alpha(a);
        if (replications == 0) throw Error("experiment: replications must be positive");
        for (const auto& m : methods) {
            static const std::vector<std::string> known{"exact", "exact_monotone", "brute", "mv", "alg1", "bounds"};
            const bool is_export = m.rfind("export:", 0) == 0;
            if (is_export) {
                std::string v = m.substr(7);
                if (v.ends_with("_basic")) v.resize(v.size() - 6);
                if (!parse_model_kind(v)) throw Error("experiment: unknown export variant \"" + m.substr(7) + "\"");
            } else if (std::find(known.begin(), known.end(), m) == known.end()) {
                throw Error("experiment: unknown method \"" + m + "\"");
            }
        }
    }
};

struct ExperimentRow {
    std::string instance;
    std::size_t n_scenarios = 0, n_states = 0, n_actions = 0;
    double alpha = 0.0;
    std::string method;
    double value = std::numeric_limits<double>::quiet_NaN();
    double pct_vpi = std::numeric_limits<double>::quiet_NaN();
    double pct_vss = std::numeric_limits<double>::quiet_NaN();
    std::size_t nodes = 0;
    double wall_ms = 0.0;
    std::string status;
    std::string message; ///< error text, not part of the CSV

    bool is_error() const { return status == "error"; }
};

namespace detail {

inline UncertainMdp materialize(const InstanceSource& src, std::uint64_t seed) {
    return std::visit(
        [&](const auto& s) -> UncertainMdp {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, UncertainMdp>) {
                return s;
            } else {
                T cfg = s;
                if constexpr (std::is_same_v<T, InventoryConfig>) cfg.rng_seed = seed;
                else cfg.seed = seed;
                if constexpr (std::is_same_v<T, InventoryConfig>) return generate_instance(cfg);
                else return random_instance(cfg);
            }
        },
        src);
}

inline ModelVariant parse_export_method(const std::string& method) {
    std::string v = method.substr(7);
    ModelVariant var;
    if (v.ends_with("_basic")) {
        var.uses_cache = false;
        v.resize(v.size() - 6);
    }
    var.kind = *parse_model_kind(v);
    return var;
}

inline std::vector<ExperimentRow> run_replication(const ExperimentSpec& spec, std::size_t rep) {
    std::vector<ExperimentRow> rows;
    const std::string id = spec.replications > 1 ? spec.instance_id + "_r" + std::to_string(rep) : spec.instance_id;
    UncertainMdp mdp;
    BoundsCache base;
    Policy mv;
    try {
        mdp = materialize(spec.source, spec.seed + rep);
        base = compute_bounds(mdp, spec.alphas.front());
        mv = mean_value_policy(mdp);
    } catch (const std::exception& e) {
        ExperimentRow r;
        r.instance = id;
        r.method = "load";
        r.status = "error";
        r.message = e.what();
        rows.push_back(r);
        return rows;
    }

    for (double alpha : spec.alphas) {
        const BoundsCache cache = with_alpha(base, alpha);
        const double mv_value = var_of_policy(mdp, mv, alpha).value;
        for (const auto& method : spec.methods) {
            ExperimentRow r;
            r.instance = id;
            r.n_scenarios = mdp.n_scenarios();
            r.n_states = mdp.n_states();
            r.n_actions = mdp.n_actions();
            r.alpha = alpha;
            r.method = method;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (method == "exact" || method == "exact_monotone") {
                    SolveOptions opt;
                    opt.monotone = method == "exact_monotone";
                    opt.time_limit = spec.time_limit;
                    const double ub = initial_solution(mdp, cache, alpha).value;
                    const auto fixed = fix_scenarios(cache, opt.monotone ? std::nullopt : std::optional(ub));
                    const auto res = solve_exact(mdp, alpha, fixed, opt);
                    r.value = res.value;
                    r.nodes = res.nodes;
                    r.status = to_string(res.status);
                } else if (method == "brute") {
                    const auto res = brute_force(mdp, alpha);
                    r.value = res.value;
                    r.nodes = res.nodes;
                    r.status = "optimal";
                } else if (method == "mv") {
                    r.value = mv_value;
                    r.status = "heuristic";
                } else if (method == "alg1") {
                    r.value = initial_solution(mdp, cache, alpha).value;
                    r.status = "heuristic";
                } else if (method == "bounds") {
                    r.value = cache.b_l;
                    r.status = "bound";
                } else {
                    const auto variant = parse_export_method(method);
                    std::filesystem::create_directories(spec.export_dir);
                    const auto path = spec.export_dir / model_file_name(id, variant, alpha);
                    const auto fixed = fix_scenarios(cache);
                    export_model(path, mdp, alpha, variant, variant.uses_cache ? &fixed : nullptr);
                    r.status = "exported";
                }
                if (std::isfinite(r.value) && method != "bounds") {
                    r.pct_vpi = percent_diff(r.value, cache.b_l);
                    r.pct_vss = percent_diff(mv_value, r.value);
                }
            } catch (const std::exception& e) {
                r.status = "error";
                r.message = e.what();
            }
            r.wall_ms = 1e3 * elapsed_seconds(t0);
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

} // namespace detail

/// Appends mean and max rows per (alpha, method) over the replications.
inline void append_aggregates(std::vector<ExperimentRow>& rows) {
    std::map<std::pair<double, std::string>, std::vector<const ExperimentRow*>> groups;
    std::vector<std::pair<double, std::string>> order;
    for (const auto& r : rows) {
        if (r.is_error() || r.method == "load") continue;
        auto key = std::pair{r.alpha, r.method};
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    std::vector<ExperimentRow> agg;
    for (const auto& key : order) {
        const auto& g = groups[key];
        ExperimentRow mean = *g.front(), mx = *g.front();
        mean.instance = "mean";
        mx.instance = "max";
        mean.status = mx.status = "aggregate";
        auto fold = [&](double ExperimentRow::*field) {
            double sum = 0.0, best = -std::numeric_limits<double>::infinity();
            for (const auto* r : g) {
                sum += r->*field;
                best = std::max(best, r->*field);
            }
            mean.*field = sum / static_cast<double>(g.size());
            mx.*field = best;
        };
        fold(&ExperimentRow::value);
        fold(&ExperimentRow::pct_vpi);
        fold(&ExperimentRow::pct_vss);
        fold(&ExperimentRow::wall_ms);
        std::size_t nsum = 0, nmax = 0;
        for (const auto* r : g) {
            nsum += r->nodes;
            nmax = std::max(nmax, r->nodes);
        }
        mean.nodes = nsum / g.size();
        mx.nodes = nmax;
        agg.push_back(std::move(mean));
        agg.push_back(std::move(mx));
    }
    rows.insert(rows.end(), agg.begin(), agg.end());
}

inline std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<std::vector<ExperimentRow>> per_rep(spec.replications);
    if (spec.threads <= 1) {
        for (std::size_t r = 0; r < spec.replications; ++r) per_rep[r] = detail::run_replication(spec, r);
    } else {
        for (std::size_t start = 0; start < spec.replications; start += spec.threads) {
            std::vector<std::future<std::vector<ExperimentRow>>> jobs;
            const std::size_t end = std::min(spec.replications, start + spec.threads);
            for (std::size_t r = start; r < end; ++r)
                jobs.push_back(std::async(std::launch::async, detail::run_replication, std::cref(spec), r));
            for (std::size_t r = start; r < end; ++r) per_rep[r] = jobs[r - start].get();
        }
    }
    std::vector<ExperimentRow> rows;
    for (auto& v : per_rep) rows.insert(rows.end(), v.begin(), v.end());
    if (spec.replications > 1) append_aggregates(rows);
    return rows;
}

inline void write_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
    auto num = [&](double x) {
        if (std::isfinite(x)) os << x;
    };
    const auto old = os.precision(12);
    os << "instance,n_scenarios,n_states,n_actions,alpha,method,value,pct_vpi,pct_vss,nodes,wall_ms,status\n";
    for (const auto& r : rows) {
        os << r.instance << ',' << r.n_scenarios << ',' << r.n_states << ',' << r.n_actions << ',' << r.alpha
           << ',' << r.method << ',';
        num(r.value);
        os << ',';
        num(r.pct_vpi);
        os << ',';
        num(r.pct_vss);
        os << ',' << r.nodes << ',' << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat
           << std::setprecision(12) << ',' << r.status << '\n';
    }
    os.precision(old);
}

} // namespace qmdp
