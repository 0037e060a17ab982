#pragma once

// Exact quantile minimization over stationary deterministic policies by
// depth-first branch-and-bound on state-action assignments, plus the
// exhaustive enumeration used to cross-check it.

#include "qmdp/evaluation.hpp"
#include "qmdp/heuristics.hpp"
#include "qmdp/preprocess.hpp"
#include "qmdp/quantile.hpp"

#include <atomic>
#include <chrono>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

namespace qmdp {

enum class SolveStatus { optimal, time_limit, infeasible };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::time_limit: return "time_limit";
    default: return "infeasible";
    }
}

struct SolveResult {
    Policy policy;
    double value = std::numeric_limits<double>::infinity();
    indvec selected; ///< scenarios with z^s = 1 for the returned policy
    std::size_t nodes = 0;
    double gap = 0.0; ///< (value - best bound) / value when stopped early
    SolveStatus status = SolveStatus::infeasible;
    double wall_ms = 0.0;
};

struct SolveOptions {
    bool monotone = false;       ///< restrict to action index nonincreasing in state index
    double time_limit = 3600.0;  ///< seconds
    double tol = 1e-9;           ///< absolute pruning / improvement tolerance
    unsigned threads = 1;        ///< > 1 explores root subtrees concurrently
    bool use_heuristics = true;  ///< seed the incumbent with mean-value and robust policies
};

inline constexpr std::size_t kBruteForceLimit = 1'000'000;

namespace detail {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

inline std::size_t policy_count(std::size_t n_states, std::size_t n_actions) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < n_states; ++i) {
        if (count > kBruteForceLimit / n_actions) return kBruteForceLimit + 1;
        count *= n_actions;
    }
    return count;
}

/// Calls f(actions) for every deterministic policy in lexicographic order.
template <typename F>
void for_each_policy(std::size_t n_states, std::size_t n_actions, bool monotone, F&& f) {
    indvec act(n_states, 0);
    while (true) {
        bool ok = true;
        if (monotone)
            for (std::size_t i = 1; i < n_states && ok; ++i) ok = act[i] <= act[i - 1];
        if (ok) f(static_cast<const indvec&>(act));
        std::size_t k = n_states;
        while (k > 0) {
            --k;
            if (++act[k] < n_actions) break;
            act[k] = 0;
            if (k == 0) return;
        }
        if (n_states == 0) return;
    }
}

inline bool lex_less(const indvec& x, const indvec& y) {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Enumerates every deterministic (optionally monotone) policy. Ties go to the
/// lexicographically first policy.
inline SolveResult brute_force(const UncertainMdp& mdp, double alpha, bool monotone = false,
                               double tol = 1e-9) {
    check_alpha(alpha);
    const auto t0 = std::chrono::steady_clock::now();
    if (detail::policy_count(mdp.n_states(), mdp.n_actions()) > kBruteForceLimit)
        throw Error("brute_force: search space |A|^|H| exceeds " + std::to_string(kBruteForceLimit));
    SolveResult best;
    const EvalOptions eval{kDefaultTol, EvalMethod::direct};
    detail::for_each_policy(mdp.n_states(), mdp.n_actions(), monotone, [&](const indvec& act) {
        ++best.nodes;
        auto pol = Policy::deterministic(act, mdp.n_actions());
        auto pv = var_of_policy(mdp, pol, alpha, eval);
        if (pv.value < best.value - tol) {
            best.value = pv.value;
            best.policy = std::move(pol);
            best.selected = std::move(pv.satisfied);
        }
    });
    best.status = SolveStatus::optimal;
    best.wall_ms = 1e3 * detail::elapsed_seconds(t0);
    return best;
}

namespace detail {

/// Per-scenario relaxation of a partial assignment: free states choose their
/// own best action in every scenario independently.
struct NodeRelaxation {
    std::vector<indvec> actions; ///< per scenario; empty when the scenario is excluded
    numvec values;               ///< per scenario q.v, +inf when excluded
    double bound = 0.0;
};

class BranchAndBound {
public:
    BranchAndBound(const UncertainMdp& mdp, double alpha, const BoundsCache& cache,
                   const SolveOptions& opt)
        : mdp_(mdp), alpha_(alpha), cache_(cache), opt_(opt), t0_(std::chrono::steady_clock::now()) {
        const std::size_t n = mdp.n_states();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        numvec spread(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = 0; s < mdp.n_scenarios(); ++s)
                spread[i] = std::max(spread[i], cache.big_m(i, s));
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t x, std::size_t y) { return spread[x] > spread[y]; });
        forced1_floor_ = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < cache.n_scenarios(); ++s)
            if (cache.z_fixed[s] == ScenarioFix::forced1)
                forced1_floor_ = std::max(forced1_floor_, valid_lb_cut(cache, s));
    }

    void offer(const Policy& pol) {
        if (opt_.monotone && !pol.is_monotone()) return;
        auto pv = var_of_policy(mdp_, pol, alpha_, {kDefaultTol, EvalMethod::automatic});
        update_incumbent(pol, std::move(pv));
    }

    /// Bound of a partial assignment; exposed for bound-validity checks.
    NodeRelaxation relax(const indvec& assigned, const NodeRelaxation* parent,
                         std::size_t changed_state) const {
        const std::size_t S = mdp_.n_scenarios();
        const auto ranges = action_ranges(assigned);
        const double inc = incumbent_value();
        NodeRelaxation r;
        r.actions.resize(S);
        r.values.assign(S, std::numeric_limits<double>::infinity());
        double f1 = forced1_floor_;
        for (std::size_t s = 0; s < S; ++s) {
            if (excluded(s, inc)) continue;
            if (parent && !parent->actions[s].empty() &&
                ranges[changed_state].contains(parent->actions[s][changed_state]) &&
                parent_still_feasible(parent->actions[s], ranges)) {
                r.actions[s] = parent->actions[s];
                r.values[s] = parent->values[s];
            } else {
                auto sol = restricted_min_value(mdp_, s, ranges,
                                                parent && !parent->actions[s].empty()
                                                    ? &parent->actions[s] : nullptr);
                r.actions[s] = std::move(sol.actions);
                r.values[s] = sol.value;
            }
            if (cache_.z_fixed[s] == ScenarioFix::forced1) f1 = std::max(f1, r.values[s]);
        }
        r.bound = std::max({var_alpha(r.values, mdp_.probs(), alpha_).value, cache_.b_l, f1});
        return r;
    }

    SolveResult run() {
        const std::size_t n = mdp_.n_states();
        indvec assigned(n, kUnassigned);
        const auto root = relax(assigned, nullptr, 0);
        root_bound_ = root.bound;
        nodes_ = 1;

        if (opt_.threads <= 1 || n == 0) {
            dfs(assigned, root, 0);
        } else {
            auto children = expand(assigned, root, 0);
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (std::size_t k = next++; k < children.size(); k = next++) {
                    auto& [child_assigned, child_relax] = children[k];
                    if (child_relax.bound >= incumbent_value() - opt_.tol) continue;
                    dfs(child_assigned, child_relax, 1);
                }
            };
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < opt_.threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }

        SolveResult out;
        {
            std::lock_guard lock(mu_);
            out.policy = best_policy_;
            out.value = best_value_;
            out.selected = best_selected_;
        }
        out.nodes = nodes_.load();
        out.wall_ms = 1e3 * elapsed_seconds(t0_);
        if (!std::isfinite(out.value)) {
            out.status = SolveStatus::infeasible;
        } else if (timed_out_) {
            out.status = SolveStatus::time_limit;
            out.gap = out.value > 0.0 ? std::max(0.0, (out.value - root_bound_) / out.value) : 0.0;
        } else {
            out.status = SolveStatus::optimal;
        }
        return out;
    }

    double incumbent_value() const {
        std::lock_guard lock(mu_);
        return best_value_;
    }

    /// Bound-only use: prune against a known value without holding its policy.
    void set_incumbent_value(double v) {
        std::lock_guard lock(mu_);
        best_value_ = v;
    }

    std::vector<ActionRange> action_ranges(const indvec& assigned) const {
        const std::size_t n = assigned.size(), m = mdp_.n_actions();
        std::vector<ActionRange> ranges(n, ActionRange{0, m - 1});
        if (!opt_.monotone) {
            for (std::size_t i = 0; i < n; ++i)
                if (assigned[i] != kUnassigned) ranges[i] = {assigned[i], assigned[i]};
            return ranges;
        }
        // Monotone: actions of lower states bound from above, higher states from below.
        std::size_t cap = m - 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (assigned[i] != kUnassigned) {
                ranges[i] = {assigned[i], assigned[i]};
                cap = assigned[i];
            } else {
                ranges[i].hi = cap;
            }
        }
        std::size_t floor = 0;
        for (std::size_t i = n; i-- > 0;) {
            if (assigned[i] != kUnassigned)
                floor = assigned[i];
            else
                ranges[i].lo = floor;
        }
        return ranges;
    }

    const indvec& branching_order() const { return order_; }

private:
    using Child = std::pair<indvec, NodeRelaxation>;

    bool excluded(std::size_t s, double inc) const {
        return cache_.z_fixed[s] == ScenarioFix::forced0 || cache_.b_under[s] > inc;
    }

    static bool parent_still_feasible(const indvec& act, const std::vector<ActionRange>& ranges) {
        for (std::size_t i = 0; i < act.size(); ++i)
            if (!ranges[i].contains(act[i])) return false;
        return true;
    }

    std::vector<Child> expand(const indvec& assigned, const NodeRelaxation& node, std::size_t depth) {
        const std::size_t state = order_[depth];
        const auto ranges = action_ranges(assigned);
        std::vector<Child> children;
        for (std::size_t a = ranges[state].lo; a <= ranges[state].hi; ++a) {
            indvec child = assigned;
            child[state] = a;
            auto rel = relax(child, &node, state);
            ++nodes_;
            if (rel.bound >= incumbent_value() - opt_.tol) continue;
            children.emplace_back(std::move(child), std::move(rel));
        }
        std::stable_sort(children.begin(), children.end(), [](const Child& x, const Child& y) {
            return x.second.bound < y.second.bound;
        });
        return children;
    }

    void dfs(const indvec& assigned, const NodeRelaxation& node, std::size_t depth) {
        if (timed_out_) return;
        if (elapsed_seconds(t0_) > opt_.time_limit) {
            timed_out_ = true;
            return;
        }
        if (node.bound >= incumbent_value() - opt_.tol) return;
        if (depth == mdp_.n_states()) {
            auto pol = Policy::deterministic(assigned, mdp_.n_actions());
            auto pv = var_of_policy(mdp_, pol, alpha_, {kDefaultTol, EvalMethod::automatic});
            update_incumbent(pol, std::move(pv));
            return;
        }
        for (auto& [child, rel] : expand(assigned, node, depth)) dfs(child, rel, depth + 1);
    }

    void update_incumbent(const Policy& pol, PolicyVar pv) {
        std::lock_guard lock(mu_);
        const bool better = pv.value < best_value_ - opt_.tol;
        const bool tie = !better && pv.value <= best_value_ + opt_.tol &&
                         detail::lex_less(pol.actions(), best_policy_.actions());
        if (better || tie) {
            best_value_ = std::min(best_value_, pv.value);
            best_policy_ = pol;
            best_selected_ = std::move(pv.satisfied);
        }
    }

    const UncertainMdp& mdp_;
    double alpha_;
    const BoundsCache& cache_;
    SolveOptions opt_;
    std::chrono::steady_clock::time_point t0_;
    indvec order_;
    double forced1_floor_ = 0.0;
    double root_bound_ = 0.0;

    mutable std::mutex mu_;
    double best_value_ = std::numeric_limits<double>::infinity();
    Policy best_policy_;
    indvec best_selected_;
    std::atomic<std::size_t> nodes_{0};
    std::atomic<bool> timed_out_{false};
};

inline void check_cache(const UncertainMdp& mdp, double alpha, const BoundsCache& cache) {
    if (cache.n_scenarios() != mdp.n_scenarios() || cache.n_states() != mdp.n_states() ||
        cache.z_fixed.size() != mdp.n_scenarios())
        throw Error("bounds cache dimensions do not match the model");
    if (cache.alpha != alpha) throw Error("bounds cache was computed for a different alpha");
}

} // namespace detail

/// Optimal deterministic (optionally monotone) policy minimizing VaR_alpha.
inline SolveResult solve_exact(const UncertainMdp& mdp, double alpha, const BoundsCache& cache,
                               const SolveOptions& opt = {}) {
    check_alpha(alpha);
    detail::check_cache(mdp, alpha, cache);
    detail::BranchAndBound bb(mdp, alpha, cache, opt);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a)
        bb.offer(Policy::deterministic(indvec(mdp.n_states(), a), mdp.n_actions()));
    if (opt.use_heuristics) {
        bb.offer(initial_solution(mdp, cache, alpha).policy);
        bb.offer(mean_value_policy(mdp));
    }
    return bb.run();
}

/// Bound of the search node fixing the actions in `partial` (nullopt = free).
/// With a finite `incumbent`, scenarios that cannot lie in the cover of an
/// improving policy are dropped, so the bound is only valid for completions
/// whose value is below the incumbent.
inline double node_lower_bound(const UncertainMdp& mdp, double alpha, const BoundsCache& cache,
                               const std::vector<std::optional<std::size_t>>& partial, bool monotone = false,
                               double incumbent = std::numeric_limits<double>::infinity()) {
    check_alpha(alpha);
    detail::check_cache(mdp, alpha, cache);
    if (partial.size() != mdp.n_states()) throw Error("node_lower_bound: partial assignment has wrong length");
    SolveOptions opt;
    opt.monotone = monotone;
    detail::BranchAndBound bb(mdp, alpha, cache, opt);
    bb.set_incumbent_value(incumbent);
    indvec assigned(mdp.n_states(), detail::kUnassigned);
    for (std::size_t i = 0; i < partial.size(); ++i)
        if (partial[i]) {
            if (*partial[i] >= mdp.n_actions()) throw Error("node_lower_bound: action out of range");
            assigned[i] = *partial[i];
        }
    return bb.relax(assigned, nullptr, 0).bound;
}

/// Policy minimizing the probability-weighted expected cost, by enumeration.
inline Policy expected_value_policy(const UncertainMdp& mdp) {
    if (detail::policy_count(mdp.n_states(), mdp.n_actions()) > kBruteForceLimit)
        throw Error("expected_value_policy: search space too large");
    Policy best;
    double best_val = std::numeric_limits<double>::infinity();
    const EvalOptions eval{kDefaultTol, EvalMethod::direct};
    detail::for_each_policy(mdp.n_states(), mdp.n_actions(), false, [&](const indvec& act) {
        auto pol = Policy::deterministic(act, mdp.n_actions());
        const auto costs = scenario_costs(mdp, pol, eval);
        const double ev = detail::dot(costs, mdp.probs());
        if (ev < best_val - 1e-9) {
            best_val = ev;
            best = std::move(pol);
        }
    });
    return best;
}

/// 100 (x - y) / x, zero when x is zero.
inline double percent_diff(double x, double y) { return x != 0.0 ? 100.0 * (x - y) / x : 0.0; }

struct Metrics {
    double opt = 0.0;
    double lb = 0.0;    ///< b_l
    double mv = 0.0;    ///< VaR of the mean-value policy
    double e_var = 0.0; ///< VaR of the expected-value-optimal policy
    double vpi = 0.0;
    double vss = 0.0;
    double pct_vpi = 0.0;
    double pct_vss = 0.0;
    double e_var_gap = 0.0; ///< 100 (E-VaR - OPT) / E-VaR
};

inline Metrics metrics(const UncertainMdp& mdp, double alpha, const BoundsCache& cache,
                       const SolveResult& exact, const Policy& mv_policy,
                       const Policy* ev_policy = nullptr) {
    Metrics m;
    m.opt = exact.value;
    m.lb = cache.b_l;
    m.mv = var_of_policy(mdp, mv_policy, alpha).value;
    m.vpi = m.opt - m.lb;
    m.vss = m.mv - m.opt;
    m.pct_vpi = percent_diff(m.opt, m.lb);
    m.pct_vss = percent_diff(m.mv, m.opt);
    const Policy ev = ev_policy ? *ev_policy : expected_value_policy(mdp);
    m.e_var = var_of_policy(mdp, ev, alpha).value;
    m.e_var_gap = percent_diff(m.e_var, m.opt);
    return m;
}

} // namespace qmdp
